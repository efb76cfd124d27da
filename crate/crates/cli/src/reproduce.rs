//! Fixed-seed experiments on the reference plants, printed as tables.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use posdd::benchmarks::{self, verdict, EnsembleSummary, StabilizationReport, ETA, P2P_HORIZONS};
use posdd::io::{write_trajectory_csv, ResultRecord};
use posdd::linalg::{Matrix, TimeKind};
use posdd::simulate::{simulate_dt, simulate_lpv, ThetaProcess};
use posdd::synthesis::{ControllerResult, SynthesisOptions, SynthesisStatus, VerificationReport};

use crate::jobs::{emit, status_code, EXIT_INFEASIBLE, EXIT_OK};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Experiment {
    CtStab,
    DtStab,
    P2p,
    Switched,
    Lpv,
}

impl Experiment {
    pub fn default_seed(self) -> u64 {
        match self {
            Self::Switched => 2,
            Self::Lpv => 1,
            _ => 0,
        }
    }
}

pub struct Run {
    pub seed: u64,
    pub samples: Option<usize>,
    pub out: Option<PathBuf>,
}

fn pass(r: &VerificationReport) -> &'static str {
    if r.passed {
        "pass"
    } else {
        "FAIL"
    }
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.4}")).collect();
    format!("({})", parts.join(", "))
}

fn fmt_matrix(m: &Matrix<f64>) -> String {
    let rows: Vec<String> = m.to_f64_rows().iter().map(|r| fmt_vec(r)).collect();
    format!("[{}]", rows.join("; "))
}

fn certificate(out: &mut String, r: &ControllerResult<f64>) {
    if let Some(v) = r.v_normalized() {
        let _ = writeln!(out, "  v = {}", fmt_vec(v.as_slice()));
    }
    for (i, k) in r.gains.iter().enumerate() {
        let label = if r.gains.len() == 1 {
            "K".to_string()
        } else {
            format!("K{}", i + 1)
        };
        let _ = writeln!(out, "  {label} = {}", fmt_matrix(k));
    }
}

fn ensemble_line(out: &mut String, e: &EnsembleSummary) {
    let _ = writeln!(
        out,
        "  ensemble of {}: all certified {}, max dV {:.2e}, min x {:.2e}, max |x(end)| {:.2e}",
        e.members, e.all_verified, e.max_lyapunov_increase, e.min_state, e.max_final_norm
    );
}

fn stabilization(out: &mut String, title: &str, r: &StabilizationReport, kind: TimeKind) {
    let _ = writeln!(
        out,
        "{title}: {} samples, {} faces, {}",
        r.samples,
        r.faces,
        verdict(r.result.status)
    );
    certificate(out, &r.result);
    if let Some(g) = &r.ground_truth {
        let _ = writeln!(out, "  ground truth: {} (worst margin {:.4})", pass(g), g.worst_margin);
    }
    if let Some(c) = &r.closed_loop {
        let line = match kind {
            TimeKind::Continuous => format!(
                "Metzler {}, Hurwitz {}, spectral abscissa {:.4}",
                c.is_metzler, c.is_hurwitz, c.spectral_abscissa
            ),
            TimeKind::Discrete => format!(
                "nonnegative {}, Schur {}, spectral radius {:.4}",
                c.is_nonnegative, c.is_schur, c.spectral_radius
            ),
        };
        let _ = writeln!(out, "  closed loop: {line}");
    }
    if let Some(e) = &r.ensemble {
        ensemble_line(out, e);
    }
}

fn save_result(dir: &Path, name: &str, r: &ControllerResult<f64>, normalize_v: bool) -> anyhow::Result<()> {
    let opts = SynthesisOptions {
        eta: ETA,
        normalize_v,
        ..Default::default()
    };
    emit(
        Some(&dir.join(name)),
        ResultRecord::from_result(r, &opts).to_json()?.as_bytes(),
    )
}

fn save_trajectory(dir: &Path, name: &str, tr: &posdd::Trajectory) -> anyhow::Result<()> {
    let mut buf = Vec::new();
    write_trajectory_csv(tr, &mut buf)?;
    emit(Some(&dir.join(name)), &buf)
}

fn exit_for(r: &ControllerResult<f64>, ground_truth: Option<&VerificationReport>) -> u8 {
    match r.status {
        SynthesisStatus::Feasible if ground_truth.is_some_and(|g| !g.passed) => EXIT_INFEASIBLE,
        s => status_code(s),
    }
}

pub fn run(exp: Experiment, run: &Run) -> anyhow::Result<u8> {
    let mut out = String::new();
    let code = match exp {
        Experiment::CtStab => ct_stab(&mut out, run)?,
        Experiment::DtStab => dt_stab(&mut out, run)?,
        Experiment::P2p => p2p(&mut out, run)?,
        Experiment::Switched => switched(&mut out, run)?,
        Experiment::Lpv => lpv(&mut out, run)?,
    };
    emit(None, out.as_bytes())?;
    Ok(code)
}

fn ct_stab(out: &mut String, run: &Run) -> anyhow::Result<u8> {
    let r = benchmarks::ct_stabilization(run.samples.unwrap_or(5), run.seed)?;
    if let Some(p) = &r.published {
        let _ = writeln!(
            out,
            "published certificate on the true plant: {} (worst margin {:.4})",
            pass(p),
            p.worst_margin
        );
    }
    stabilization(
        out,
        &format!("continuous-time stabilization, seed {}", run.seed),
        &r,
        TimeKind::Continuous,
    );
    if let (Some(dir), Some(k)) = (&run.out, r.result.k()) {
        save_result(dir, "ct_result.json", &r.result, true)?;
        let v = r.result.v_normalized().expect("feasible").into_vec();
        let tr = benchmarks::ct_trajectory(k, &[1.0, 1.0, 1.0], 20.0)?.with_lyapunov(&v)?;
        save_trajectory(dir, "ct_trajectory.csv", &tr)?;
    }
    Ok(exit_for(&r.result, r.ground_truth.as_ref()))
}

fn dt_stab(out: &mut String, run: &Run) -> anyhow::Result<u8> {
    let r = benchmarks::dt_stabilization(run.seed)?;
    stabilization(
        out,
        &format!("discrete-time stabilization, seed {}", run.seed),
        &r.unconstrained,
        TimeKind::Discrete,
    );
    let rows: Vec<String> = (0..r.pattern.shape().0)
        .map(|i| {
            (0..r.pattern.shape().1)
                .map(|j| match r.pattern.get(i, j) {
                    posdd::synthesis::Sign::Unrestricted => '*',
                    posdd::synthesis::Sign::Nonneg => '+',
                    posdd::synthesis::Sign::Nonpos => '-',
                    posdd::synthesis::Sign::Zero => '0',
                })
                .collect()
        })
        .collect();
    stabilization(
        out,
        &format!("with sign pattern {}", rows.join(" ")),
        &r.patterned,
        TimeKind::Discrete,
    );
    if let Some(k) = r.patterned.result.k() {
        let ok = r.pattern.admits(k, 1e-9);
        let _ = writeln!(out, "  pattern respected: {ok}");
    }
    if let Some(dir) = &run.out {
        let (a, b) = benchmarks::five_state_dt();
        for (name, rep) in [("dt", &r.unconstrained), ("dt_pattern", &r.patterned)] {
            if let Some(k) = rep.result.k() {
                save_result(dir, &format!("{name}_result.json"), &rep.result, true)?;
                let v = rep.result.v_normalized().expect("feasible").into_vec();
                let tr = simulate_dt(&a, &b, k, &[1.0; 5], 50)?.with_lyapunov(&v)?;
                save_trajectory(dir, &format!("{name}_trajectory.csv"), &tr)?;
            }
        }
    }
    let a = exit_for(&r.unconstrained.result, r.unconstrained.ground_truth.as_ref());
    let b = exit_for(&r.patterned.result, r.patterned.ground_truth.as_ref());
    Ok(a.max(b))
}

fn gain(g: Option<f64>) -> String {
    g.map_or_else(|| "infeasible".into(), |g| format!("{g:.4}"))
}

fn p2p(out: &mut String, run: &Run) -> anyhow::Result<u8> {
    let horizons: Vec<usize> = match run.samples {
        Some(t) => vec![t],
        None => P2P_HORIZONS.to_vec(),
    };
    let r = benchmarks::p2p_sweep(run.seed, &horizons)?;
    let _ = writeln!(
        out,
        "known plant: open-loop gain {:.4}, optimal gain {:.4}",
        r.open_loop_gain, r.optimal_gain
    );
    let _ = writeln!(out, "noise-free data (T = 20): {}", gain(r.exact_data_gain));
    let _ = writeln!(out, "worst-case gain bound from noisy data, seed {}:", run.seed);
    let _ = writeln!(out, "{:>6} {:>12} {:>12}", "T", "Metzler A", "no prior");
    let mut csv = String::from("T,metzler,no_prior\n");
    let mut ordered = true;
    let mut prev = (f64::INFINITY, f64::INFINITY);
    for row in &r.rows {
        let _ = writeln!(
            out,
            "{:>6} {:>12} {:>12}",
            row.samples,
            gain(row.metzler),
            gain(row.no_prior)
        );
        let cell = |g: Option<f64>| g.map_or_else(String::new, |g| g.to_string());
        let _ = writeln!(csv, "{},{},{}", row.samples, cell(row.metzler), cell(row.no_prior));
        let (m, f) = (
            row.metzler.unwrap_or(f64::INFINITY),
            row.no_prior.unwrap_or(f64::INFINITY),
        );
        ordered &= m <= prev.0 + 1e-6 && f <= prev.1 + 1e-6 && m <= f + 1e-6;
        prev = (m, f);
    }
    let _ = writeln!(out, "non-increasing in T and Metzler prior no worse: {ordered}");
    if let Some(dir) = &run.out {
        emit(Some(&dir.join("p2p_table.csv")), csv.as_bytes())?;
    }
    let all = r.rows.iter().all(|row| row.metzler.is_some() && row.no_prior.is_some());
    Ok(if all { EXIT_OK } else { EXIT_INFEASIBLE })
}

fn switched(out: &mut String, run: &Run) -> anyhow::Result<u8> {
    let horizons: Vec<usize> = match run.samples {
        Some(t) => vec![t],
        None => vec![20, 55],
    };
    let r = benchmarks::switched(run.seed, &horizons)?;
    let _ = writeln!(
        out,
        "published common certificate on the true modes: {} (worst margin {:.4})",
        pass(&r.published_common),
        r.published_common.worst_margin
    );
    for run_ in &r.runs {
        let _ = writeln!(
            out,
            "T = {}: {} faces; common gain {}, mode-dependent gains {}",
            run_.samples,
            run_.faces,
            verdict(run_.common.status),
            verdict(run_.per_mode.status)
        );
        let shown = if run_.common.is_feasible() {
            &run_.common
        } else {
            &run_.per_mode
        };
        certificate(out, shown);
    }
    if let Some(g) = &r.ground_truth {
        let _ = writeln!(
            out,
            "ground truth under the certificate of the largest run: {}",
            pass(g)
        );
    }
    if let Some(e) = &r.ensemble {
        ensemble_line(out, e);
    }
    let best = r
        .runs
        .iter()
        .rev()
        .find_map(|x| [&x.common, &x.per_mode].into_iter().find(|c| c.is_feasible()));
    if let (Some(dir), Some(b)) = (&run.out, best) {
        save_result(dir, "switched_result.json", b, true)?;
        let v = b.v_normalized().expect("feasible").into_vec();
        let tr = benchmarks::switched_trajectory(&b.gains, &[0.5, 1.5, 1.0], 10.0, run.seed)?.with_lyapunov(&v)?;
        save_trajectory(dir, "switched_trajectory.csv", &tr)?;
    }
    Ok(match best {
        Some(b) => exit_for(b, r.ground_truth.as_ref()),
        None => EXIT_INFEASIBLE,
    })
}

fn lpv(out: &mut String, run: &Run) -> anyhow::Result<u8> {
    let r = benchmarks::lpv(run.seed, 30)?;
    let worst = r
        .unstable_vertex_eigs
        .iter()
        .map(|e| e.0)
        .fold(f64::NEG_INFINITY, f64::max);
    let _ = writeln!(
        out,
        "largest open-loop eigenvalue at the vertex (1, -1, 0.9): {worst:.4}"
    );
    let ok = r.published.iter().filter(|p| p.passed).count();
    let _ = writeln!(
        out,
        "published vertex gains certified on their vertex plants: {ok}/{}",
        r.published.len()
    );
    let _ = writeln!(
        out,
        "gain scheduling from {} samples, seed {}: {} faces, {}",
        benchmarks::LPV_SAMPLES,
        run.seed,
        r.faces,
        verdict(r.result.status)
    );
    certificate(out, &r.result);
    if let Some(g) = &r.ground_truth {
        let _ = writeln!(out, "  ground truth at every vertex: {}", pass(g));
    }
    if !r.final_norms.is_empty() {
        let m = r.final_norms.iter().copied().fold(0.0, f64::max);
        let _ = writeln!(
            out,
            "  {} parameter sequences: max |x(20)| {m:.2e}",
            r.final_norms.len()
        );
    }
    if let Some(e) = &r.ensemble {
        ensemble_line(out, e);
    }
    if let (Some(dir), true) = (&run.out, r.result.is_feasible()) {
        save_result(dir, "lpv_result.json", &r.result, true)?;
        let (a, b) = benchmarks::lpv_plant();
        let (lo, hi) = benchmarks::lpv_box();
        let v = r.result.v_normalized().expect("feasible").into_vec();
        let p = ThetaProcess::uniform(lo, hi, run.seed);
        let tr = simulate_lpv(
            &a,
            &b,
            &benchmarks::lpv_vertices(),
            &r.result.gains,
            &[0.5, 1.5],
            20.0,
            &p,
            0.01,
        )?
        .with_lyapunov(&v)?;
        save_trajectory(dir, "lpv_trajectory.csv", &tr)?;
    }
    Ok(exit_for(&r.result, r.ground_truth.as_ref()))
}
