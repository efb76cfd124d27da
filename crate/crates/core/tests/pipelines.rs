mod common;

use posdd::benchmarks::{self, EPSILON, ETA};
use posdd::consistency::residual;
use posdd::io::{read_dataset_csv, write_dataset_csv, ResultRecord};
use posdd::linalg::{Matrix, TimeKind};
use posdd::polytope::{contains_point, sample_interior};
use posdd::simulate::{ensemble, EnsembleOptions};
use posdd::synthesis::{verify_controller, SynthesisOptions, SynthesisStatus};
use posdd::{build_consistency, generate_dataset, synthesize_stabilizing, GenerationPolicy, PlantModel, Prior};

fn ct_plant() -> PlantModel<f64> {
    let (a, b) = benchmarks::three_state();
    PlantModel::Single { a, b }
}

fn to_f32(m: &Matrix<f64>) -> Matrix<f32> {
    Matrix::from_fn(m.rows(), m.cols(), |i, j| m.get(i, j) as f32)
}

fn opts() -> SynthesisOptions {
    SynthesisOptions {
        eta: ETA,
        normalize_v: true,
        ..Default::default()
    }
}

#[test]
fn ground_truth_lies_in_its_consistency_set() {
    let d = generate_dataset(
        &ct_plant(),
        TimeKind::Continuous,
        30,
        EPSILON,
        3,
        &GenerationPolicy::iid(),
    )
    .unwrap();
    let cs = build_consistency(&d, Prior::metzler()).unwrap();
    let x = cs.pack(&ct_plant()).unwrap();
    assert!(contains_point(&cs.polytope, x.as_slice(), 1e-12).unwrap());
    let r = residual(&d, &ct_plant()).unwrap();
    assert!(r.max_abs() <= EPSILON);
}

#[test]
fn certificate_holds_on_sampled_plants() {
    let d = generate_dataset(
        &ct_plant(),
        TimeKind::Continuous,
        12,
        EPSILON,
        1,
        &GenerationPolicy::iid(),
    )
    .unwrap();
    let cs = build_consistency(&d, Prior::metzler()).unwrap();
    let r = synthesize_stabilizing(&cs, &opts()).unwrap();
    assert_eq!(r.status, SynthesisStatus::Feasible);
    let v = r.v_normalized().unwrap().into_vec();
    let k = r.k().unwrap();
    for p in sample_interior(&cs.polytope, 200, 9).unwrap() {
        let PlantModel::Single { a, b } = cs.unpack(p.as_slice()).unwrap() else {
            unreachable!()
        };
        assert!(verify_controller(&[(a, b)], &v, k, TimeKind::Continuous, ETA).passed);
    }
}

#[test]
fn closed_loops_stay_positive_and_decay() {
    let d = generate_dataset(
        &ct_plant(),
        TimeKind::Continuous,
        12,
        EPSILON,
        1,
        &GenerationPolicy::iid(),
    )
    .unwrap();
    let cs = build_consistency(&d, Prior::metzler()).unwrap();
    let r = synthesize_stabilizing(&cs, &opts()).unwrap();
    let v = r.v_normalized().unwrap().into_vec();
    let ens = ensemble(
        &cs,
        &r.gains,
        &v,
        None,
        &[1.0, 0.5, 2.0],
        20,
        4,
        &EnsembleOptions::default(),
    )
    .unwrap();
    assert!(ens.max_lyapunov_increase <= 1e-9);
    for tr in &ens.trajectories {
        assert!(tr.min_state() >= -1e-12);
        let lyap = tr.lyapunov.as_ref().unwrap();
        assert!(lyap.last().unwrap() < &(0.1 * lyap[0]));
    }
}

#[test]
fn dataset_survives_a_file_round_trip() {
    let (lo, hi) = benchmarks::lpv_box();
    let (a, b) = benchmarks::lpv_plant();
    let policy = GenerationPolicy::iid().with_theta_box(lo, hi);
    let d = generate_dataset(
        &PlantModel::Lpva { a, b },
        TimeKind::Continuous,
        15,
        EPSILON,
        2,
        &policy,
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    write_dataset_csv(&d, std::fs::File::create(&path).unwrap()).unwrap();
    let back = read_dataset_csv::<f64, _>(std::fs::File::open(&path).unwrap(), TimeKind::Continuous, EPSILON).unwrap();
    assert_eq!(back.x, d.x);
    assert_eq!(back.u, d.u);
    assert_eq!(back.xdelta, d.xdelta);
    assert_eq!(back.theta, d.theta);
}

#[test]
fn result_record_round_trips() {
    let r = benchmarks::lpv(1, 0).unwrap();
    let rec = ResultRecord::from_result(&r.result, &opts());
    let json = rec.to_json().unwrap();
    let back = ResultRecord::from_json(&json).unwrap();
    assert_eq!(back, rec);
    let gains: Vec<Matrix<f64>> = back.gain_matrices().unwrap();
    assert_eq!(gains, r.result.gains);
    assert_eq!(back.to_json().unwrap(), json);
}

#[test]
fn single_precision_pipeline() {
    let (a, b) = benchmarks::three_state();
    let plant = PlantModel::Single {
        a: to_f32(&a),
        b: to_f32(&b),
    };
    let d = generate_dataset(&plant, TimeKind::Continuous, 12, EPSILON, 1, &GenerationPolicy::iid()).unwrap();
    let cs = build_consistency(&d, Prior::metzler()).unwrap();
    let r = synthesize_stabilizing(
        &cs,
        &SynthesisOptions {
            verification_samples: 30,
            ..opts()
        },
    )
    .unwrap();
    assert_eq!(r.status, SynthesisStatus::Feasible, "{:?}", r.diagnostics);
    let v: Vec<f64> = r.v_normalized().unwrap().iter().map(|&x| f64::from(x)).collect();
    let k32 = r.k().unwrap();
    let k = Matrix::from_fn(k32.rows(), k32.cols(), |i, j| f64::from(k32.get(i, j)));
    assert!(verify_controller(&[(a, b)], &v, &k, TimeKind::Continuous, ETA).passed);
}

#[test]
fn oracle_agrees_on_the_reference_plant() {
    let (a, b) = benchmarks::three_state();
    let plants = vec![(a.to_f64_rows(), b.to_f64_rows())];
    assert!(common::stabilizable_on(&plants, 3, 2, TimeKind::Continuous, ETA));
    let zero = vec![vec![0.0; 2]; 3];
    assert!(!common::stabilizable_on(
        &[(a.to_f64_rows(), zero)],
        3,
        2,
        TimeKind::Continuous,
        ETA
    ));
}
