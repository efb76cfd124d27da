use super::*;
use crate::consistency::{build_consistency, Dataset, Prior};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn m(rows: &[&[f64]]) -> Matrix<f64> {
    Matrix::from_rows(rows).unwrap()
}

fn quiet() -> SynthesisOptions {
    SynthesisOptions {
        verification_samples: 0,
        ..Default::default()
    }
}

#[test]
fn row_counts() {
    assert_eq!(stab_polytope_rows::<f64>(2, 1, TimeKind::Continuous, 1e-3).len(), 4);
    assert_eq!(stab_polytope_rows::<f64>(3, 2, TimeKind::Continuous, 1e-3).len(), 9);
    assert_eq!(stab_polytope_rows::<f64>(3, 2, TimeKind::Discrete, 1e-3).len(), 12);
}

#[test]
fn rows_match_dense_closed_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for kind in [TimeKind::Continuous, TimeKind::Discrete] {
        for _ in 0..20 {
            let (n, mm) = (rng.random_range(1..4), rng.random_range(1..3));
            let a = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let b = Matrix::from_fn(n, mm, |_, _| rng.random_range(-1.0..1.0));
            let v: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
            let y = Matrix::from_fn(mm, n, |_, _| rng.random_range(-1.0..1.0));
            let eta = 1e-3;
            let mut xi = v.clone();
            xi.extend(vec_of(&[&y]));
            let rows = stab_polytope_rows(n, mm, kind, eta);
            let (g2, h2) = evaluate_rows(&rows, &xi, n * (n + mm));
            let theta = vec_of(&[&a, &b]);
            let lhs = g2.mul_vec(&theta).unwrap();
            // Closed loop M = AX + BY.
            let m_cl = a
                .matmul(&Matrix::diag(&v))
                .unwrap()
                .add(&b.matmul(&y).unwrap())
                .unwrap();
            let sums = m_cl.row_sums();
            for i in 0..n {
                let expect = sums[i] + eta - if kind == TimeKind::Discrete { v[i] } else { 0.0 };
                assert!((lhs[i] - h2[i] - expect).abs() < 1e-12);
            }
            let mut r = n;
            for k in 0..n {
                for i in 0..n {
                    if i == k && kind == TimeKind::Continuous {
                        continue;
                    }
                    assert!((lhs[r] - h2[r] + m_cl.get(i, k)).abs() < 1e-12);
                    r += 1;
                }
            }
        }
    }
}

#[test]
fn nominal_trivial_cases() {
    let stable = m(&[&[-1.0, 0.5], &[0.2, -1.0]]);
    let r = nominal_stabilize(&stable, &Matrix::zeros(2, 1), TimeKind::Continuous, &quiet()).unwrap();
    assert!(r.is_feasible());
    assert!(r.verification.unwrap().passed);
    let unstable: Matrix<f64> = Matrix::identity(2);
    let r = nominal_stabilize(&unstable, &Matrix::zeros(2, 1), TimeKind::Continuous, &quiet()).unwrap();
    assert_eq!(r.status, SynthesisStatus::Infeasible);
    // A full-authority input stabilizes it.
    let r = nominal_stabilize(&unstable, &Matrix::identity(2), TimeKind::Continuous, &quiet()).unwrap();
    assert!(r.is_feasible());
    let acl = unstable.add(r.k().unwrap()).unwrap();
    assert!(
        crate::linalg::check_positive_stability(&acl, TimeKind::Continuous)
            .unwrap()
            .is_hurwitz
    );
}

#[test]
fn zero_input_p2p_hits_the_floor() {
    let a = m(&[&[-1.0, 0.0], &[0.0, -2.0]]);
    let ext = ExtendedPlant {
        c: Matrix::zeros(1, 2),
        d: Matrix::zeros(1, 1),
        e: Matrix::zeros(2, 1),
        f: Matrix::zeros(1, 1),
    };
    let r = nominal_p2p(&a, &Matrix::zeros(2, 1), &ext, TimeKind::Continuous, &quiet(), None).unwrap();
    assert!(r.gamma.unwrap() <= 1e-3 + 1e-12);
}

#[test]
fn sign_patterns() {
    let p = SignPattern::parse(&["0*", "+-"]).unwrap();
    assert_eq!(p.shape(), (2, 2));
    assert_eq!(p.get(1, 1), Sign::Nonpos);
    assert!(p.admits(&m(&[&[0.0, -3.0], &[1.0, -1.0]]), 1e-9));
    assert!(!p.admits(&m(&[&[1e-12, -3.0], &[1.0, -1.0]]), 1e-9));
    assert!(!p.admits(&m(&[&[0.0, 0.0], &[-1.0, -1.0]]), 1e-9));
    assert!(SignPattern::parse(&["0x"]).is_err());
    assert!(SignPattern::parse(&["0*", "+"]).is_err());
    let json = serde_json::to_string(&p).unwrap();
    assert_eq!(json, r#"[["0","*"],["+","-"]]"#);
    assert_eq!(serde_json::from_str::<SignPattern>(&json).unwrap(), p);

    // Zero entries stay exactly zero through synthesis.
    let a = Matrix::identity(2);
    let b = Matrix::identity(2);
    let pattern = SignPattern::parse(&["-0", "0-"]).unwrap();
    let opts = SynthesisOptions {
        sign_pattern: Some(pattern.clone()),
        ..quiet()
    };
    let r = nominal_stabilize(&a, &b, TimeKind::Continuous, &opts).unwrap();
    assert!(pattern.admits(r.k().unwrap(), 1e-9));
}

#[test]
fn gain_schedule_interpolates() {
    let omega = vec![vec![0.0], vec![1.0]];
    let k1 = m(&[&[1.0, 0.0]]);
    let k2 = m(&[&[0.0, 4.0]]);
    let k = gain_schedule(&[0.25], &omega, &[k1.clone(), k2.clone()]).unwrap();
    assert!((k.get(0, 0) - 0.75).abs() < 1e-12 && (k.get(0, 1) - 1.0).abs() < 1e-12);
    assert_eq!(
        gain_schedule(&[1.5], &omega, &[k1.clone(), k2.clone()]).unwrap_err(),
        SynthesisError::OutsideHull
    );
    let at_vertex = gain_schedule(&[1.0], &omega, &[k1, k2.clone()]).unwrap();
    assert!(at_vertex.sub(&k2).unwrap().max_abs() < 1e-12);
}

#[test]
fn no_control_authority_is_infeasible() {
    let a = m(&[&[0.5, 0.1], &[0.2, 0.3]]);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = Matrix::from_fn(2, 6, |_, _| rng.random_range(-1.0..1.0));
    let u = Matrix::from_fn(1, 6, |_, _| rng.random_range(-1.0..1.0));
    let xd = a.matmul(&x).unwrap();
    let d = Dataset::new(TimeKind::Continuous, x, u, xd, 0.0).unwrap();
    let cs = build_consistency(&d, Prior::NONE).unwrap();
    let r = synthesize_stabilizing(&cs, &quiet()).unwrap();
    assert_eq!(r.status, SynthesisStatus::Infeasible);
}

#[test]
fn exact_data_agrees_with_nominal_design() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let a = Matrix::from_fn(2, 2, |i, j| {
            if i == j {
                rng.random_range(-1.0..1.0)
            } else {
                rng.random_range(0.0..1.0)
            }
        });
        let b = Matrix::from_fn(2, 1, |_, _| rng.random_range(-1.0..1.0));
        let x = Matrix::from_fn(2, 5, |_, _| rng.random_range(-1.0..1.0));
        let u = Matrix::from_fn(1, 5, |_, _| rng.random_range(-1.0..1.0));
        let xd = a.matmul(&x).unwrap().add(&b.matmul(&u).unwrap()).unwrap();
        let d = Dataset::new(TimeKind::Continuous, x, u, xd, 0.0).unwrap();
        let cs = build_consistency(&d, Prior::NONE).unwrap();
        let data = synthesize_stabilizing(&cs, &quiet()).unwrap();
        let nominal = nominal_stabilize(&a, &b, TimeKind::Continuous, &quiet()).unwrap();
        assert_eq!(data.status, nominal.status);
        if data.is_feasible() {
            let r = verify_controller(
                &[(a.clone(), b.clone())],
                data.v.as_ref().unwrap(),
                data.k().unwrap(),
                TimeKind::Continuous,
                1e-3,
            );
            assert!(r.passed);
            assert!(data.diagnostics.farkas_residual < 1e-9);
            assert!(data.z[0].as_slice().iter().all(|&z| z >= -1e-12));
        }
    }
}

#[test]
fn certificate_is_scale_invariant() {
    let a = m(&[&[-0.5, 0.4], &[0.3, 0.2]]);
    let b = m(&[&[0.0], &[1.0]]);
    let r = nominal_stabilize(&a, &b, TimeKind::Continuous, &quiet()).unwrap();
    let (v, k) = (r.v.clone().unwrap(), r.k().unwrap().clone());
    let y = r.y[0].clone();
    for alpha in [1.0, 2.0, 10.0] {
        let vs: Vec<f64> = v.iter().map(|x| alpha * x).collect();
        let ys = y.scale(alpha);
        let ks = Matrix::from_fn(1, 2, |j, c| ys.get(j, c) / vs[c]);
        assert!(ks.sub(&k).unwrap().max_abs() < 1e-12);
        assert!(verify_controller(&[(a.clone(), b.clone())], &vs, &ks, TimeKind::Continuous, 1e-3).passed);
    }
}

#[test]
fn rejects_bad_inputs() {
    let cs_err = SynthesisOptions { eta: 0.0, ..quiet() };
    assert!(matches!(
        nominal_stabilize(
            &Matrix::<f64>::identity(2),
            &Matrix::zeros(2, 1),
            TimeKind::Continuous,
            &cs_err
        ),
        Err(SynthesisError::Precondition(_))
    ));
    assert!(matches!(
        nominal_stabilize(
            &Matrix::<f64>::zeros(2, 3),
            &Matrix::zeros(2, 1),
            TimeKind::Continuous,
            &quiet()
        ),
        Err(SynthesisError::Dimension(_))
    ));
}
