//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use posdd::benchmarks::{self, ETA, P2P_HORIZONS, P2P_OPEN_LOOP_GAIN, P2P_OPTIMAL_GAIN};
use posdd::consistency::{
    build_consistency, build_switched_consistency, generate_dataset, GenerationPolicy, PlantModel, Prior,
};
use posdd::linalg::{eigenvalues, Matrix, TimeKind, Vector};
use posdd::lp::{self, LpProblem, LpStatus, SolverOptions};
use posdd::polytope::{check_containment_farkas, Polytope};
use posdd::simulate::LYAPUNOV_SLACK;
use posdd::synthesis::{
    nominal_p2p, synthesize_stabilizing, synthesize_switched_common, synthesize_switched_per_mode, verify_controller,
    Sign, SynthesisOptions, SynthesisStatus,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn timed<F: FnOnce() -> Outcome>(limit: Duration, f: F) -> Outcome {
    let start = Instant::now();
    let detail = f()?;
    let took = start.elapsed();
    ensure(took < limit, format!("took {took:?}, limit {limit:?}"))?;
    Ok(format!("{detail} ({:.2}s)", took.as_secs_f64()))
}

fn criterion_1() -> Outcome {
    timed(Duration::from_secs(1), || {
        let (a, b, ext) = benchmarks::p2p_plant();
        let opts = SynthesisOptions {
            eta: ETA,
            verification_samples: 0,
            ..Default::default()
        };
        let zero = Matrix::zeros(2, 3);
        let open = nominal_p2p(&a, &b, &ext, TimeKind::Continuous, &opts, Some(&zero)).map_err(|e| e.to_string())?;
        let best = nominal_p2p(&a, &b, &ext, TimeKind::Continuous, &opts, None).map_err(|e| e.to_string())?;
        let (g0, g1) = (
            open.gamma.ok_or("no open-loop gain")?,
            best.gamma.ok_or("no optimal gain")?,
        );
        ensure((g0 - P2P_OPEN_LOOP_GAIN).abs() <= 0.05, format!("open-loop gain {g0}"))?;
        ensure((g1 - P2P_OPTIMAL_GAIN).abs() <= 0.01, format!("optimal gain {g1}"))?;
        let k = best.k().ok_or("no gain")?;
        ensure(
            k.as_slice().iter().all(|&x| x >= -1e-9),
            "optimal gain has a negative entry",
        )?;
        Ok(format!("open-loop gain {g0:.4}, synthesized gain {g1:.4}"))
    })
}

fn criterion_2() -> Outcome {
    let (a, _) = benchmarks::three_state();
    let mut re: Vec<f64> = eigenvalues(&a)
        .map_err(|e| e.to_string())?
        .iter()
        .map(|z| z.re)
        .collect();
    re.sort_by(f64::total_cmp);
    let expect = [-1.3851, -0.6055, 0.4907];
    ensure(
        re.iter().zip(expect).all(|(x, e)| (x - e).abs() < 1e-3),
        format!("poles {re:?}"),
    )?;
    let (al, _) = benchmarks::lpv_plant();
    let vertex = PlantModel::lpva_a_at(&al, &[1.0, -1.0, 0.9]);
    let eig = eigenvalues(&vertex).map_err(|e| e.to_string())?;
    let hit = eig.iter().any(|z| (z.re - 1.27).abs() < 1e-3 && z.im.abs() < 1e-9);
    ensure(hit, format!("vertex eigenvalues {eig:?}"))?;
    Ok(format!("poles {re:.4?}, unstable vertex eigenvalue found"))
}

fn criterion_3() -> Outcome {
    let (a, b) = benchmarks::three_state();
    let (v, k) = benchmarks::three_state_published();
    let r = verify_controller(&[(a, b)], &v, &k, TimeKind::Continuous, ETA);
    ensure(r.passed, format!("published continuous certificate rejected: {r:?}"))?;
    let (al, b) = benchmarks::lpv_plant();
    let (v, gains) = benchmarks::lpv_published();
    let mut worst = f64::NEG_INFINITY;
    for (w, k) in benchmarks::lpv_vertices().iter().zip(&gains) {
        let r = verify_controller(
            &[(PlantModel::lpva_a_at(&al, w), b.clone())],
            &v,
            k,
            TimeKind::Continuous,
            ETA,
        );
        ensure(r.passed, format!("vertex {w:?} rejected: {r:?}"))?;
        worst = worst.max(r.worst_margin);
    }
    Ok(format!("published certificates hold; worst vertex margin {worst:.4}"))
}

fn criterion_4() -> Outcome {
    timed(Duration::from_secs(10), || {
        let r = benchmarks::ct_stabilization(5, 0).map_err(|e| e.to_string())?;
        ensure(
            r.result.status == SynthesisStatus::Feasible,
            format!("status {:?}", r.result.status),
        )?;
        let cl = r.closed_loop.as_ref().ok_or("no closed-loop report")?;
        ensure(
            cl.is_metzler && cl.is_hurwitz && cl.principal_minors_positive,
            format!("closed loop {cl:?}"),
        )?;
        ensure(
            r.ground_truth.as_ref().is_some_and(|g| g.passed),
            "ground truth rejects the certificate",
        )?;
        let e = r.ensemble.as_ref().ok_or("no ensemble")?;
        ensure(e.members == 100 && e.all_verified, format!("ensemble {e:?}"))?;
        ensure(
            e.max_lyapunov_increase <= LYAPUNOV_SLACK,
            format!("V increased by {}", e.max_lyapunov_increase),
        )?;
        Ok(format!(
            "feasible from 5 samples; 100 sampled loops verified, max V increase {:.1e}",
            e.max_lyapunov_increase
        ))
    })
}

/// Random bounded polytope: a box plus random faces containing the origin.
fn random_polytope(rng: &mut ChaCha8Rng, dim: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut g = Vec::new();
    let mut h = Vec::new();
    for j in 0..dim {
        for s in [1.0, -1.0] {
            let mut e = vec![0.0; dim];
            e[j] = s;
            g.push(e);
            h.push(rng.random_range(0.5..1.5));
        }
    }
    for _ in 0..rng.random_range(1..=4) {
        g.push((0..dim).map(|_| rng.random_range(-1.0..1.0)).collect());
        h.push(rng.random_range(0.2..1.0));
    }
    (g, h)
}

fn polytope(g: &[Vec<f64>], h: &[f64]) -> Polytope<f64> {
    Polytope::new(Matrix::from_rows(g).unwrap(), Vector::from_slice(h).unwrap()).unwrap()
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut contained, mut total) = (0, 0);
    for case in 0..200 {
        let dim = 2 + case % 3;
        let (g1, h1) = random_polytope(&mut rng, dim);
        let verts = common::vertices(&g1, &h1);
        let want_inside = case % 2 == 0;
        let mut g2 = Vec::new();
        let mut h2 = Vec::new();
        for f in 0..rng.random_range(dim + 1..dim + 5) {
            let d: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let support = verts
                .iter()
                .map(|x| common::dot(&d, x))
                .fold(f64::NEG_INFINITY, f64::max);
            // Offsets stay clear of zero so the oracle is unambiguous.
            let shrink = !want_inside && f == 0;
            let off = if shrink {
                -rng.random_range(0.05..0.3)
            } else {
                rng.random_range(0.01..0.5)
            };
            g2.push(d);
            h2.push(support + off);
        }
        let oracle = verts
            .iter()
            .all(|x| g2.iter().zip(&h2).all(|(r, &hi)| common::dot(r, x) <= hi + 1e-9));
        let cert = check_containment_farkas(&polytope(&g1, &h1), &polytope(&g2, &h2)).map_err(|e| e.to_string())?;
        ensure(
            cert.contained == oracle,
            format!("case {case}: farkas {} vs oracle {oracle}", cert.contained),
        )?;
        if cert.contained {
            let z = cert.z.as_ref().ok_or(format!("case {case}: no multiplier"))?;
            ensure(
                z.as_slice().iter().all(|&v| v >= -1e-12),
                format!("case {case}: negative multiplier"),
            )?;
            let zg = z.matmul(&Matrix::from_rows(&g1).unwrap()).unwrap();
            let gap = zg.sub(&Matrix::from_rows(&g2).unwrap()).unwrap().max_abs();
            ensure(gap < 1e-8, format!("case {case}: |Z G1 - G2| = {gap}"))?;
            let zh = z.mul_vec(&h1).unwrap();
            ensure(
                zh.iter().zip(&h2).all(|(a, b)| *a <= b + 1e-8),
                format!("case {case}: Z h1 > h2"),
            )?;
        }
        contained += usize::from(oracle);
        total += 1;
    }
    Ok(format!("{total} pairs agree ({contained} contained)"))
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut feasible, mut total) = (0, 0);
    let mut instance = 0u64;
    while total < 50 {
        instance += 1;
        let (n, m) = if instance % 4 == 0 {
            (2, 0)
        } else {
            (1, rng.random_range(1..=3))
        };
        let kind = if instance % 3 == 0 {
            TimeKind::Discrete
        } else {
            TimeKind::Continuous
        };
        let a = Matrix::from_fn(n, n, |i, j| {
            if i == j {
                rng.random_range(-1.2..0.9)
            } else {
                rng.random_range(0.0..0.6)
            }
        });
        let b = Matrix::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0));
        let epsilon = [0.02, 0.1, 0.3][rng.random_range(0..3)];
        let samples = n + m + rng.random_range(1..5);
        let prior = if rng.random_bool(0.5) {
            Prior::NONE
        } else {
            Prior::metzler()
        };
        let data = generate_dataset(
            &PlantModel::Single { a, b },
            kind,
            samples,
            epsilon,
            instance,
            &GenerationPolicy::iid(),
        )
        .map_err(|e| e.to_string())?;
        let cs = build_consistency(&data, prior).map_err(|e| e.to_string())?;
        let g = common::rows_of(cs.polytope.g());
        let verts = common::vertices(&g, cs.polytope.h());
        if verts.len() <= cs.dim() {
            // Degenerate draw (unbounded or lower-dimensional set): not an instance.
            continue;
        }
        let plants: Vec<_> = verts.iter().map(|x| common::plant_at(x, n, m)).collect();
        let oracle = common::stabilizable_on(&plants, n, m, kind, ETA);
        let opts = SynthesisOptions {
            eta: ETA,
            verification_samples: 10,
            seed: instance,
            ..Default::default()
        };
        let r = synthesize_stabilizing(&cs, &opts).map_err(|e| e.to_string())?;
        ensure(
            r.status != SynthesisStatus::NumericalFailure,
            format!("instance {instance}: numerical failure"),
        )?;
        ensure(
            r.is_feasible() == oracle,
            format!(
                "instance {instance} (n={n}, m={m}, {kind:?}): synthesis {:?}, enumeration {oracle}",
                r.status
            ),
        )?;
        feasible += usize::from(oracle);
        total += 1;
    }
    Ok(format!("{total} instances agree ({feasible} stabilizable)"))
}

/// Beale's example, which cycles under the textbook most-negative rule.
fn beale() -> LpProblem<f64> {
    let mut p = LpProblem::<f64>::new(4);
    p.set_objective(&[-0.75, 20.0, -0.5, 6.0]);
    p.add_le(&[0.25, -8.0, -1.0, 9.0], 0.0)
        .add_le(&[0.5, -12.0, -0.5, 3.0], 0.0)
        .add_le(&[0.0, 0.0, 1.0, 0.0], 1.0);
    p
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut optimal = 0;
    for case in 0..50 {
        let n = rng.random_range(2..=4);
        let c: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut p = LpProblem::<f64>::new(n);
        p.set_objective(&c);
        let mut g = Vec::new();
        let mut h = Vec::new();
        for j in 0..n {
            p.set_free(j);
            for s in [1.0, -1.0] {
                let mut e = vec![0.0; n];
                e[j] = s;
                p.add_le(&e, 2.0);
                g.push(e);
                h.push(2.0);
            }
        }
        for _ in 0..rng.random_range(1..=5) {
            let row: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let rhs = rng.random_range(-0.5..1.0);
            p.add_le(&row, rhs);
            g.push(row);
            h.push(rhs);
        }
        let sol = lp::solve(&p).map_err(|e| e.to_string())?;
        match common::lp_by_vertices(&c, &g, &h) {
            Some(best) => {
                ensure(
                    sol.status == LpStatus::Optimal,
                    format!("case {case}: status {:?}", sol.status),
                )?;
                let got = sol.objective_value.unwrap();
                ensure((got - best).abs() <= 1e-6, format!("case {case}: {got} vs {best}"))?;
                optimal += 1;
            }
            None => ensure(
                sol.status == LpStatus::Infeasible,
                format!("case {case}: expected infeasible"),
            )?,
        }
    }
    let bland = SolverOptions {
        bland: true,
        ..Default::default()
    };
    let s = lp::solve_with(&beale(), &bland).map_err(|e| e.to_string())?;
    ensure(
        s.status == LpStatus::Optimal && (s.objective_value.unwrap() + 1.25).abs() < 1e-9,
        format!("cycling instance: {:?} {:?}", s.status, s.objective_value),
    )?;
    Ok(format!(
        "50 programs match enumeration ({optimal} feasible); cycling instance solved in {} pivots",
        s.iterations
    ))
}

fn criterion_8() -> Outcome {
    let r = benchmarks::p2p_sweep(0, &P2P_HORIZONS).map_err(|e| e.to_string())?;
    let floor = P2P_OPTIMAL_GAIN - 0.01;
    let mut prev = (f64::INFINITY, f64::INFINITY);
    for row in &r.rows {
        let (m, f) = (
            row.metzler.ok_or("metzler run infeasible")?,
            row.no_prior.ok_or("no-prior run infeasible")?,
        );
        ensure(
            m <= prev.0 + 1e-6 && f <= prev.1 + 1e-6,
            format!("T={}: gain increased", row.samples),
        )?;
        ensure(m <= f + 1e-6, format!("T={}: metzler {m} > no prior {f}", row.samples))?;
        ensure(
            m >= floor && f >= floor,
            format!("T={}: gain below the nominal optimum", row.samples),
        )?;
        prev = (m, f);
    }
    let exact = r.exact_data_gain.ok_or("exact-data run infeasible")?;
    ensure(
        (exact - P2P_OPTIMAL_GAIN).abs() <= 0.02,
        format!("exact-data gain {exact}"),
    )?;
    let table: Vec<String> = r
        .rows
        .iter()
        .map(|row| {
            format!(
                "T={}: {:.3}/{:.3}",
                row.samples,
                row.metzler.unwrap(),
                row.no_prior.unwrap()
            )
        })
        .collect();
    Ok(format!("{}; exact data {exact:.4}", table.join(", ")))
}

fn criterion_9() -> Outcome {
    let r = benchmarks::dt_stabilization(0).map_err(|e| e.to_string())?;
    let res = &r.patterned.result;
    ensure(res.is_feasible(), format!("patterned status {:?}", res.status))?;
    let k = res.k().ok_or("no gain")?;
    let (rows, cols) = r.pattern.shape();
    for i in 0..rows {
        for j in 0..cols {
            let x = k.get(i, j);
            let ok = match r.pattern.get(i, j) {
                Sign::Zero => x == 0.0,
                Sign::Nonneg => x >= -1e-9,
                Sign::Nonpos => x <= 1e-9,
                Sign::Unrestricted => true,
            };
            ensure(ok, format!("entry ({i},{j}) = {x} violates {:?}", r.pattern.get(i, j)))?;
        }
    }
    ensure(
        r.patterned.ground_truth.as_ref().is_some_and(|g| g.passed),
        "ground truth rejects certificate",
    )?;
    Ok("patterned gain respects zeros exactly and all signs".into())
}

fn criterion_10() -> Outcome {
    let (a, b, _) = benchmarks::p2p_plant();
    let d = generate_dataset(
        &PlantModel::Single { a, b },
        TimeKind::Continuous,
        50,
        0.1,
        10,
        &GenerationPolicy::iid(),
    )
    .map_err(|e| e.to_string())?;
    let cs = build_consistency(&d, Prior::metzler()).map_err(|e| e.to_string())?;
    let faces = cs.polytope.n_faces();
    ensure(faces == 2 * 3 * 50 + 6, format!("{faces} faces"))?;
    let reduced = cs.reduced().map_err(|e| e.to_string())?.polytope.n_faces();
    Ok(format!("{faces} faces ({reduced} after redundancy removal)"))
}

fn criterion_11() -> Outcome {
    let modes = benchmarks::switched_modes();
    let plant = PlantModel::Switched { modes };
    let opts = SynthesisOptions {
        eta: ETA,
        verification_samples: 20,
        ..Default::default()
    };
    let (mut pairs, mut common_ok) = (0, 0);
    for seed in 0..4 {
        let full = generate_dataset(
            &plant,
            TimeKind::Continuous,
            55,
            0.1,
            seed,
            &benchmarks::switched_policy(),
        )
        .map_err(|e| e.to_string())?;
        for t in [20, 30, 40, 55] {
            let cs = build_switched_consistency(&full.truncate(t).unwrap(), Prior::POSITIVE, 2)
                .map_err(|e| e.to_string())?;
            let c = synthesize_switched_common(&cs, &opts).map_err(|e| e.to_string())?;
            let p = synthesize_switched_per_mode(&cs, &opts).map_err(|e| e.to_string())?;
            if c.is_feasible() {
                common_ok += 1;
                ensure(
                    p.is_feasible(),
                    format!("seed {seed}, T={t}: common feasible but per-mode {:?}", p.status),
                )?;
            }
            pairs += 1;
        }
    }
    let r = benchmarks::lpv(1, 30).map_err(|e| e.to_string())?;
    ensure(
        r.result.is_feasible(),
        format!("scheduled synthesis {:?}", r.result.status),
    )?;
    let worst = r.final_norms.iter().copied().fold(0.0, f64::max);
    ensure(
        r.final_norms.len() == 30 && worst < 0.01,
        format!("|x(20)| up to {worst}"),
    )?;
    Ok(format!(
        "restriction holds on {pairs} datasets ({common_ok} common-feasible); 30 scheduled runs reach |x(20)| <= {worst:.1e}"
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("nominal peak-to-peak gains", criterion_1),
        ("pole check", criterion_2),
        ("published certificates", criterion_3),
        ("end-to-end continuous stabilization", criterion_4),
        ("Farkas containment vs vertex oracle", criterion_5),
        ("synthesis vs vertex-enumeration synthesis", criterion_6),
        ("LP solver vs brute force, cycling", criterion_7),
        ("peak-to-peak monotonicity", criterion_8),
        ("sign-pattern exactness", criterion_9),
        ("face count", criterion_10),
        ("switched restriction and scheduled decay", criterion_11),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
