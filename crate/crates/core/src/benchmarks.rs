//! Reference plants and the end-to-end experiments built on them: robust
//! stabilization in continuous and discrete time, peak-to-peak gain versus
//! sample count, switched plants and a gain-scheduled affine plant.
//!
//! Each experiment generates its own seeded data, runs synthesis and checks
//! the result against the ground truth and against plants sampled from the
//! consistency set.

use serde::Serialize;

use crate::consistency::{
    build_consistency, build_lpva_consistency, build_switched_consistency, generate_dataset, GenerationPolicy,
    ModePolicy, PlantModel, Prior, StatePolicy,
};
use crate::linalg::{check_positive_stability, eigenvalues, Matrix, StabilityReport, TimeKind};
use crate::simulate::{
    ensemble, simulate_ct, simulate_lpv, simulate_switched, EnsembleOptions, SwitchingProcess, ThetaProcess,
};
use crate::synthesis::{
    nominal_p2p, synthesize_lpva, synthesize_p2p, synthesize_stabilizing, synthesize_switched_common,
    synthesize_switched_per_mode, verify_controller, ControllerResult, ExtendedPlant, SignPattern, SynthesisOptions,
    SynthesisStatus, VerificationReport,
};
use crate::Error;

fn mat(rows: &[&[f64]]) -> Matrix<f64> {
    Matrix::from_rows(rows).expect("literal matrix")
}

pub const ETA: f64 = 1e-3;
pub const EPSILON: f64 = 0.1;

/// Open-loop unstable, internally positive plant with three states and two inputs.
pub fn three_state() -> (Matrix<f64>, Matrix<f64>) {
    (
        mat(&[&[-0.55, 0.3, 0.65], &[0.06, -1.35, 0.25], &[0.1, 0.15, 0.4]]),
        mat(&[&[0.18, 0.08], &[0.47, 0.25], &[0.07, 0.95]]),
    )
}

/// Published robust certificate `(v, K)` for [`three_state`] from five samples.
pub fn three_state_published() -> (Vec<f64>, Matrix<f64>) {
    (
        vec![0.5570, 0.1401, 0.3029],
        mat(&[&[0.0279, -0.2660, 0.5041], &[0.0107, -0.0222, -0.8650]]),
    )
}

/// Nonnegative five-state plant with spectral radius about 1.261.
pub fn five_state_dt() -> (Matrix<f64>, Matrix<f64>) {
    (
        mat(&[
            &[0.4, 0.1, 0.0, 0.1, 0.1],
            &[0.1, 0.5, 0.1, 0.0, 0.1],
            &[0.0, 0.1, 0.6, 0.2, 0.2],
            &[0.1, 0.0, 0.2, 0.7, 0.3],
            &[0.1, 0.1, 0.1, 0.2, 1.0],
        ]),
        mat(&[
            &[0.0, 0.0, 0.0],
            &[0.0, 0.0, 0.0],
            &[0.0, 1.0, 0.0],
            &[0.0, 0.0, 1.0],
            &[1.0, 0.0, 0.0],
        ]),
    )
}

/// Decentralized pattern for [`five_state_dt`]: only the last state feeds
/// inputs 1 and 2, input 2 also sees state 3 and input 3 sees states 4 and 5.
pub fn five_state_pattern() -> SignPattern {
    SignPattern::parse(&["0000-", "00*0+", "000**"]).expect("literal pattern")
}

/// Plant, exogenous channels for the peak-to-peak experiment.
pub fn p2p_plant() -> (Matrix<f64>, Matrix<f64>, ExtendedPlant<f64>) {
    let a = mat(&[&[-0.2, 0.2, 0.2], &[0.4, -0.7, 0.2], &[0.0, 0.8, -3.0]]);
    let b = mat(&[&[-0.4, 0.5], &[0.2, -0.8], &[-1.0, 2.0]]);
    let c = Matrix::identity(3).vstack(&Matrix::zeros(2, 3)).expect("shapes");
    let d = Matrix::zeros(3, 2).vstack(&Matrix::identity(2)).expect("shapes");
    let e = Matrix::identity(2).vstack(&Matrix::zeros(1, 2)).expect("shapes");
    let f = Matrix::zeros(5, 2);
    (a, b, ExtendedPlant { c, d, e, f })
}

pub const P2P_OPEN_LOOP_GAIN: f64 = 32.178;
pub const P2P_OPTIMAL_GAIN: f64 = 3.742;

/// Two three-state modes; the second has no actuation of state 2.
pub fn switched_modes() -> Vec<(Matrix<f64>, Matrix<f64>)> {
    let (a1, b1) = three_state();
    let a2 = mat(&[&[0.1, 0.1, 0.1], &[0.1, -1.9, 0.15], &[0.1, 0.1, 0.6]]);
    let b2 = mat(&[&[1.0, 0.0], &[0.0, 0.0], &[0.0, 1.0]]);
    vec![(a1, b1), (a2, b2)]
}

/// Published common certificate for [`switched_modes`]. It does not satisfy
/// the strict condition on mode 2: row 2 of `B₂` is zero and `(A₂v)₂ > 0`.
pub fn switched_common_published() -> (Vec<f64>, Matrix<f64>) {
    (
        vec![0.4989, 0.0572, 0.4439],
        mat(&[&[-0.1390, -0.0860, -0.0663], &[0.0362, -0.0810, -0.8146]]),
    )
}

/// Affine plant `A(θ) = θ₁A₁ + θ₂A₂ + θ₃A₃` with shared `B`.
pub fn lpv_plant() -> (Vec<Matrix<f64>>, Matrix<f64>) {
    (
        vec![
            mat(&[&[-0.9190, 0.5555], &[0.4936, -0.5761]]),
            mat(&[&[-1.2653, 0.0574], &[0.2981, 0.2455]]),
            mat(&[&[0.9328, 0.5702], &[0.0636, -1.0487]]),
        ],
        mat(&[&[0.4570, 0.2828], &[0.2115, 0.8863]]),
    )
}

/// Parameter box `{1} × [-1, 1] × [-0.5, 0.9]`.
pub fn lpv_box() -> (Vec<f64>, Vec<f64>) {
    (vec![1.0, -1.0, -0.5], vec![1.0, 1.0, 0.9])
}

/// Vertices of [`lpv_box`].
pub fn lpv_vertices() -> Vec<Vec<f64>> {
    vec![
        vec![1.0, -1.0, -0.5],
        vec![1.0, -1.0, 0.9],
        vec![1.0, 1.0, -0.5],
        vec![1.0, 1.0, 0.9],
    ]
}

/// Published vertex gains (ordered as [`lpv_vertices`]) and common `v`.
pub fn lpv_published() -> (Vec<f64>, Vec<Matrix<f64>>) {
    (
        vec![0.4482, 0.5518],
        vec![
            mat(&[&[-14.2950, 9.9057], &[6.2326, -5.8745]]),
            mat(&[&[-20.8043, 9.7975], &[8.5165, -6.9282]]),
            mat(&[&[-6.9969, 6.5542], &[2.5340, -4.3078]]),
            mat(&[&[-5.2847, 2.3813], &[2.0480, -2.3017]]),
        ],
    )
}

/// Summary of an ensemble of closed loops built from sampled plants.
#[derive(Debug, Clone, Serialize)]
pub struct EnsembleSummary {
    pub members: usize,
    pub max_lyapunov_increase: f64,
    pub min_state: f64,
    /// Largest `‖x(t_end)‖∞` over the members.
    pub max_final_norm: f64,
    pub all_verified: bool,
}

fn summarize(
    ens: &crate::simulate::Ensemble<f64>,
    v: &[f64],
    gains: &[Matrix<f64>],
    kind: TimeKind,
    omega: Option<&[Vec<f64>]>,
) -> EnsembleSummary {
    let all_verified = ens.plants.iter().all(|p| match p {
        PlantModel::Single { a, b } => verify_controller(&[(a.clone(), b.clone())], v, &gains[0], kind, ETA).passed,
        PlantModel::Switched { modes } => modes.iter().enumerate().all(|(s, ab)| {
            let k = if gains.len() == 1 { &gains[0] } else { &gains[s] };
            verify_controller(std::slice::from_ref(ab), v, k, kind, ETA).passed
        }),
        PlantModel::Lpva { a, b } => omega.is_some_and(|om| {
            om.iter().zip(gains).all(|(w, k)| {
                let ac = PlantModel::lpva_a_at(a, w);
                verify_controller(&[(ac, b.clone())], v, k, kind, ETA).passed
            })
        }),
    });
    EnsembleSummary {
        members: ens.trajectories.len(),
        max_lyapunov_increase: ens.max_lyapunov_increase,
        min_state: ens
            .trajectories
            .iter()
            .map(|t| t.min_state())
            .fold(f64::INFINITY, f64::min),
        max_final_norm: ens
            .trajectories
            .iter()
            .map(|t| t.final_state().iter().fold(0.0_f64, |a, x| a.max(x.abs())))
            .fold(0.0, f64::max),
        all_verified,
    }
}

fn opts(seed: u64, normalize_v: bool) -> SynthesisOptions {
    SynthesisOptions {
        eta: ETA,
        normalize_v,
        seed,
        ..Default::default()
    }
}

fn closed_loop_report(
    a: &Matrix<f64>,
    b: &Matrix<f64>,
    k: &Matrix<f64>,
    kind: TimeKind,
) -> Result<StabilityReport, Error> {
    Ok(check_positive_stability(&a.add(&b.matmul(k)?)?, kind)?)
}

#[derive(Debug, Clone)]
pub struct StabilizationReport {
    pub samples: usize,
    pub faces: usize,
    /// Published certificate checked on the ground truth, where one exists.
    pub published: Option<VerificationReport>,
    pub result: ControllerResult<f64>,
    /// Certificate checked on the ground truth.
    pub ground_truth: Option<VerificationReport>,
    pub closed_loop: Option<StabilityReport>,
    pub ensemble: Option<EnsembleSummary>,
}

/// Robust continuous-time stabilization of [`three_state`] from `samples`
/// noisy iid samples with a Metzler prior, then 100 sampled closed loops
/// from `x(0) = 1` over `[0, 20]`.
pub fn ct_stabilization(samples: usize, seed: u64) -> Result<StabilizationReport, Error> {
    let (a, b) = three_state();
    let (pv, pk) = three_state_published();
    let published = verify_controller(&[(a.clone(), b.clone())], &pv, &pk, TimeKind::Continuous, ETA);
    let plant = PlantModel::Single {
        a: a.clone(),
        b: b.clone(),
    };
    let data = generate_dataset(
        &plant,
        TimeKind::Continuous,
        samples,
        EPSILON,
        seed,
        &GenerationPolicy::iid(),
    )?;
    let cs = build_consistency(&data, Prior::metzler())?;
    let o = opts(seed, true);
    let result = synthesize_stabilizing(&cs, &o)?;
    let mut report = StabilizationReport {
        samples,
        faces: cs.polytope.n_faces(),
        published: Some(published),
        result,
        ground_truth: None,
        closed_loop: None,
        ensemble: None,
    };
    if report.result.is_feasible() {
        let v = report.result.v_normalized().expect("feasible").into_vec();
        let k = report.result.gains.clone();
        report.ground_truth = Some(verify_controller(
            &[(a.clone(), b.clone())],
            &v,
            &k[0],
            TimeKind::Continuous,
            ETA,
        ));
        report.closed_loop = Some(closed_loop_report(&a, &b, &k[0], TimeKind::Continuous)?);
        let eo = EnsembleOptions {
            t_end: 20.0,
            ..Default::default()
        };
        let ens = ensemble(&cs, &k, &v, None, &[1.0, 1.0, 1.0], 100, seed, &eo)?;
        report.ensemble = Some(summarize(&ens, &v, &k, TimeKind::Continuous, None));
    }
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct DiscreteReport {
    pub unconstrained: StabilizationReport,
    pub patterned: StabilizationReport,
    pub pattern: SignPattern,
}

fn dt_run(
    cs: &crate::consistency::ConsistencySet<f64>,
    o: &SynthesisOptions,
    samples: usize,
) -> Result<StabilizationReport, Error> {
    let (a, b) = five_state_dt();
    let result = synthesize_stabilizing(cs, o)?;
    let mut report = StabilizationReport {
        samples,
        faces: cs.polytope.n_faces(),
        published: None,
        result,
        ground_truth: None,
        closed_loop: None,
        ensemble: None,
    };
    if report.result.is_feasible() {
        let v = report.result.v_normalized().expect("feasible").into_vec();
        let k = report.result.gains.clone();
        report.ground_truth = Some(verify_controller(
            &[(a.clone(), b.clone())],
            &v,
            &k[0],
            TimeKind::Discrete,
            ETA,
        ));
        report.closed_loop = Some(closed_loop_report(&a, &b, &k[0], TimeKind::Discrete)?);
        let ens = ensemble(cs, &k, &v, None, &[1.0; 5], 30, o.seed, &EnsembleOptions::default())?;
        report.ensemble = Some(summarize(&ens, &v, &k, TimeKind::Discrete, None));
    }
    Ok(report)
}

/// Discrete-time stabilization of [`five_state_dt`] from 60 samples, with
/// and without [`five_state_pattern`].
pub fn dt_stabilization(seed: u64) -> Result<DiscreteReport, Error> {
    let (a, b) = five_state_dt();
    let samples = 60;
    let plant = PlantModel::Single { a, b };
    let data = generate_dataset(
        &plant,
        TimeKind::Discrete,
        samples,
        EPSILON,
        seed,
        &GenerationPolicy::iid(),
    )?;
    let cs = build_consistency(&data, Prior::POSITIVE)?.reduced()?;
    let pattern = five_state_pattern();
    let unconstrained = dt_run(&cs, &opts(seed, true), samples)?;
    let o = SynthesisOptions {
        sign_pattern: Some(pattern.clone()),
        ..opts(seed, true)
    };
    let patterned = dt_run(&cs, &o, samples)?;
    Ok(DiscreteReport {
        unconstrained,
        patterned,
        pattern,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct P2pRow {
    pub samples: usize,
    pub metzler: Option<f64>,
    pub no_prior: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct P2pReport {
    pub open_loop_gain: f64,
    pub optimal_gain: f64,
    pub optimal_k: Vec<Vec<f64>>,
    pub rows: Vec<P2pRow>,
    /// Gain from noise-free data.
    pub exact_data_gain: Option<f64>,
}

pub const P2P_HORIZONS: [usize; 5] = [20, 30, 50, 80, 120];

/// Gains of the known plant, then worst-case gains over nested datasets.
pub fn p2p_sweep(seed: u64, horizons: &[usize]) -> Result<P2pReport, Error> {
    let (a, b, ext) = p2p_plant();
    let o = SynthesisOptions {
        verification_samples: 20,
        ..opts(seed, false)
    };
    let zero = Matrix::zeros(b.cols(), a.rows());
    let open = nominal_p2p(&a, &b, &ext, TimeKind::Continuous, &o, Some(&zero))?;
    let best = nominal_p2p(&a, &b, &ext, TimeKind::Continuous, &o, None)?;
    let gamma = |r: &ControllerResult<f64>| if r.is_feasible() { r.gamma } else { None };
    let plant = PlantModel::Single {
        a: a.clone(),
        b: b.clone(),
    };
    let max_t = horizons.iter().copied().max().unwrap_or(0).max(a.rows() + b.cols());
    let full = generate_dataset(
        &plant,
        TimeKind::Continuous,
        max_t,
        EPSILON,
        seed,
        &GenerationPolicy::iid(),
    )?;
    let mut rows = Vec::new();
    for &t in horizons {
        let d = full.truncate(t)?;
        let m = synthesize_p2p(&build_consistency(&d, Prior::metzler())?, &ext, &o)?;
        let f = synthesize_p2p(&build_consistency(&d, Prior::NONE)?, &ext, &o)?;
        rows.push(P2pRow {
            samples: t,
            metzler: gamma(&m),
            no_prior: gamma(&f),
        });
    }
    let exact = generate_dataset(&plant, TimeKind::Continuous, 20, 0.0, seed, &GenerationPolicy::iid())?;
    let exact_r = synthesize_p2p(&build_consistency(&exact, Prior::NONE)?, &ext, &o)?;
    Ok(P2pReport {
        open_loop_gain: gamma(&open).unwrap_or(f64::NAN),
        optimal_gain: gamma(&best).unwrap_or(f64::NAN),
        optimal_k: best.k().map(Matrix::to_f64_rows).unwrap_or_default(),
        rows,
        exact_data_gain: gamma(&exact_r),
    })
}

/// States and inputs uniform on `[-5, 5]`, modes visited in turn.
pub fn switched_policy() -> GenerationPolicy {
    GenerationPolicy {
        input_lo: -5.0,
        input_hi: 5.0,
        state: StatePolicy::Iid { lo: -5.0, hi: 5.0 },
        modes: ModePolicy::RoundRobin,
        theta_box: None,
    }
}

#[derive(Debug, Clone)]
pub struct SwitchedRun {
    pub samples: usize,
    pub faces: usize,
    pub common: ControllerResult<f64>,
    pub per_mode: ControllerResult<f64>,
}

#[derive(Debug, Clone)]
pub struct SwitchedReport {
    pub published_common: VerificationReport,
    pub runs: Vec<SwitchedRun>,
    /// Ground truth under the certificate of the largest feasible run.
    pub ground_truth: Option<VerificationReport>,
    pub ensemble: Option<EnsembleSummary>,
}

/// Common and mode-dependent gains for [`switched_modes`] at each horizon.
pub fn switched(seed: u64, horizons: &[usize]) -> Result<SwitchedReport, Error> {
    let modes = switched_modes();
    let (pv, pk) = switched_common_published();
    let published_common = verify_controller(&modes, &pv, &pk, TimeKind::Continuous, ETA);
    let plant = PlantModel::Switched { modes: modes.clone() };
    let max_t = horizons.iter().copied().max().unwrap_or(0);
    let full = generate_dataset(&plant, TimeKind::Continuous, max_t, EPSILON, seed, &switched_policy())?;
    let o = opts(seed, true);
    let mut runs = Vec::new();
    let mut best: Option<(crate::consistency::ConsistencySet<f64>, ControllerResult<f64>)> = None;
    for &t in horizons {
        let cs = build_switched_consistency(&full.truncate(t)?, Prior::POSITIVE, modes.len())?;
        let common = synthesize_switched_common(&cs, &o)?;
        let per_mode = synthesize_switched_per_mode(&cs, &o)?;
        let chosen = if common.is_feasible() {
            Some(&common)
        } else {
            per_mode.is_feasible().then_some(&per_mode)
        };
        if let Some(r) = chosen {
            if best
                .as_ref()
                .is_none_or(|(c, _)| c.polytope.n_faces() < cs.polytope.n_faces())
            {
                best = Some((cs.clone(), r.clone()));
            }
        }
        runs.push(SwitchedRun {
            samples: t,
            faces: cs.polytope.n_faces(),
            common,
            per_mode,
        });
    }
    let (mut ground_truth, mut ens_summary) = (None, None);
    if let Some((cs, r)) = best {
        let v = r.v_normalized().expect("feasible").into_vec();
        let mut gt = verify_controller(&[], &v, &r.gains[0], TimeKind::Continuous, ETA);
        for (s, ab) in modes.iter().enumerate() {
            let k = if r.gains.len() == 1 { &r.gains[0] } else { &r.gains[s] };
            gt.merge(&verify_controller(
                std::slice::from_ref(ab),
                &v,
                k,
                TimeKind::Continuous,
                ETA,
            ));
        }
        ground_truth = Some(gt);
        let eo = EnsembleOptions {
            t_end: 10.0,
            switching: Some(SwitchingProcess {
                mean_dwell: 0.3,
                n_modes: modes.len(),
                seed,
            }),
            ..Default::default()
        };
        let ens = ensemble(&cs, &r.gains, &v, None, &[0.5, 1.5, 1.0], 15, seed, &eo)?;
        ens_summary = Some(summarize(&ens, &v, &r.gains, TimeKind::Continuous, None));
    }
    Ok(SwitchedReport {
        published_common,
        runs,
        ground_truth,
        ensemble: ens_summary,
    })
}

/// Simulate the switched ground truth under a certificate.
pub fn switched_trajectory(
    gains: &[Matrix<f64>],
    x0: &[f64],
    t_end: f64,
    seed: u64,
) -> Result<crate::simulate::Trajectory<f64>, Error> {
    let modes = switched_modes();
    let p = SwitchingProcess {
        mean_dwell: 0.3,
        n_modes: modes.len(),
        seed,
    };
    Ok(simulate_switched(&modes, gains, x0, t_end, &p, 0.01)?)
}

#[derive(Debug, Clone)]
pub struct LpvReport {
    /// Eigenvalues of the plant at the vertex `(1, -1, 0.9)`, real parts.
    pub unstable_vertex_eigs: Vec<(f64, f64)>,
    /// Published vertex gains, each checked on its own vertex plant.
    pub published: Vec<VerificationReport>,
    pub faces: usize,
    pub result: ControllerResult<f64>,
    pub ground_truth: Option<VerificationReport>,
    /// `‖x(20)‖∞` of the ground truth from `(0.5, 1.5)` for each of the seeded parameter sequences.
    pub final_norms: Vec<f64>,
    pub ensemble: Option<EnsembleSummary>,
}

pub const LPV_SAMPLES: usize = 10;

/// Gain-scheduled stabilization of [`lpv_plant`] from ten samples.
pub fn lpv(seed: u64, sequences: usize) -> Result<LpvReport, Error> {
    let (a, b) = lpv_plant();
    let omega = lpv_vertices();
    let (lo, hi) = lpv_box();
    let vertex = PlantModel::lpva_a_at(&a, &[1.0, -1.0, 0.9]);
    let unstable_vertex_eigs = eigenvalues(&vertex)?.iter().map(|z| (z.re, z.im)).collect();
    let (pv, pk) = lpv_published();
    let published = omega
        .iter()
        .zip(&pk)
        .map(|(w, k)| {
            verify_controller(
                &[(PlantModel::lpva_a_at(&a, w), b.clone())],
                &pv,
                k,
                TimeKind::Continuous,
                ETA,
            )
        })
        .collect();

    let plant = PlantModel::Lpva {
        a: a.clone(),
        b: b.clone(),
    };
    let policy = GenerationPolicy::iid().with_theta_box(lo.clone(), hi.clone());
    let data = generate_dataset(&plant, TimeKind::Continuous, LPV_SAMPLES, EPSILON, seed, &policy)?;
    let cs = build_lpva_consistency(&data, Prior::POSITIVE, a.len())?;
    let result = synthesize_lpva(&cs, &omega, &opts(seed, true))?;
    let mut report = LpvReport {
        unstable_vertex_eigs,
        published,
        faces: cs.polytope.n_faces(),
        result,
        ground_truth: None,
        final_norms: Vec::new(),
        ensemble: None,
    };
    if report.result.is_feasible() {
        let v = report.result.v_normalized().expect("feasible").into_vec();
        let gains = report.result.gains.clone();
        let mut gt = verify_controller(&[], &v, &gains[0], TimeKind::Continuous, ETA);
        for (w, k) in omega.iter().zip(&gains) {
            gt.merge(&verify_controller(
                &[(PlantModel::lpva_a_at(&a, w), b.clone())],
                &v,
                k,
                TimeKind::Continuous,
                ETA,
            ));
        }
        report.ground_truth = Some(gt);
        for s in 0..sequences {
            let p = ThetaProcess::uniform(lo.clone(), hi.clone(), seed.wrapping_add(s as u64));
            let tr = simulate_lpv(&a, &b, &omega, &gains, &[0.5, 1.5], 20.0, &p, 0.01)?;
            report
                .final_norms
                .push(tr.final_state().iter().fold(0.0_f64, |m, x| m.max(x.abs())));
        }
        let eo = EnsembleOptions {
            t_end: 20.0,
            theta: Some(ThetaProcess::uniform(lo, hi, seed)),
            ..Default::default()
        };
        let ens = ensemble(&cs, &gains, &v, Some(&omega), &[0.5, 1.5], 15, seed, &eo)?;
        report.ensemble = Some(summarize(&ens, &v, &gains, TimeKind::Continuous, Some(&omega)));
    }
    Ok(report)
}

/// Feasibility of a run as a short word.
pub fn verdict(status: SynthesisStatus) -> &'static str {
    match status {
        SynthesisStatus::Feasible => "feasible",
        SynthesisStatus::Infeasible => "infeasible",
        SynthesisStatus::NumericalFailure => "numerical failure",
    }
}

/// Single-mode convenience: closed loop of the continuous ground truth.
pub fn ct_trajectory(k: &Matrix<f64>, x0: &[f64], t_end: f64) -> Result<crate::simulate::Trajectory<f64>, Error> {
    let (a, b) = three_state();
    Ok(simulate_ct(&a, &b, k, x0, t_end, 0.01)?)
}
