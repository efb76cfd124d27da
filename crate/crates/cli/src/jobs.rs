use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, ensure, Context};
use posdd::consistency::{
    build_consistency, build_lpva_consistency, build_switched_consistency, ConsistencySet, Dataset,
};
use posdd::io::{
    read_dataset_csv, to_json_string, write_dataset_csv, write_trajectory_csv, ResultRecord, VerificationSummary,
};
use posdd::linalg::Matrix;
use posdd::simulate::{ensemble, simulate_plant, EnsembleOptions, SwitchingProcess, ThetaProcess};
use posdd::synthesis::{
    nominal_p2p, nominal_stabilize, synthesize_lpva, synthesize_p2p, synthesize_stabilizing,
    synthesize_switched_common, synthesize_switched_per_mode, verify_controller, ControllerResult, SynthesisOptions,
    SynthesisStatus, VerificationReport,
};
use posdd::{generate_dataset, PlantModel};

use crate::config::{JobConfig, Mode};

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_INFEASIBLE: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

pub fn status_code(s: SynthesisStatus) -> u8 {
    match s {
        SynthesisStatus::Feasible => EXIT_OK,
        SynthesisStatus::Infeasible => EXIT_INFEASIBLE,
        SynthesisStatus::NumericalFailure => EXIT_NUMERICAL,
    }
}

/// Write to `path`, or to stdout when no path is configured.
pub fn emit(path: Option<&Path>, body: &[u8]) -> anyhow::Result<()> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
            }
            std::fs::write(p, body).with_context(|| format!("cannot write {}", p.display()))
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(body)?;
            Ok(out.flush()?)
        }
    }
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("cannot write {}", path.display()))?,
    ))
}

fn synthesis_options(cfg: &JobConfig) -> anyhow::Result<SynthesisOptions> {
    Ok(SynthesisOptions {
        eta: cfg.eta,
        normalize_v: cfg.normalize_v,
        sign_pattern: cfg.pattern()?,
        verification_samples: cfg.verification_samples,
        seed: cfg.seed,
        ..Default::default()
    })
}

fn load_data(cfg: &JobConfig) -> anyhow::Result<Dataset<f64>> {
    let path = cfg.resolve(cfg.require(&cfg.data, "data")?);
    let file = File::open(&path).with_context(|| format!("cannot open data file {}", path.display()))?;
    let d =
        read_dataset_csv(file, cfg.time_kind, cfg.epsilon).with_context(|| format!("data file {}", path.display()))?;
    match cfg.samples {
        Some(t) => d
            .truncate(t)
            .with_context(|| format!("cannot keep {t} samples of {}", path.display())),
        None => Ok(d),
    }
}

fn x0(cfg: &JobConfig, n: usize) -> anyhow::Result<Vec<f64>> {
    let x0 = cfg.simulation.x0.clone().unwrap_or_else(|| vec![1.0; n]);
    ensure!(
        x0.len() == n,
        "config: field `simulation.x0` has {} entries, the plant has {n} states",
        x0.len()
    );
    Ok(x0)
}

fn ensemble_options(cfg: &JobConfig, n_modes: Option<usize>, affine: bool) -> anyhow::Result<EnsembleOptions> {
    let s = &cfg.simulation;
    let mut o = EnsembleOptions {
        t_end: s.t_end,
        dt: s.dt,
        steps: s.steps,
        ..Default::default()
    };
    if let Some(n_modes) = n_modes {
        o.switching = Some(SwitchingProcess {
            mean_dwell: s.dwell.unwrap_or(0.3),
            n_modes,
            seed: cfg.seed,
        });
    }
    if affine {
        let b = cfg.require(&cfg.theta_box, "theta_box")?;
        let mut p = ThetaProcess::uniform(b.lo.clone(), b.hi.clone(), cfg.seed);
        if let Some(d) = s.dwell {
            p.mean_dwell = d;
        }
        o.theta = Some(p);
    }
    Ok(o)
}

fn write_result(cfg: &JobConfig, r: &ControllerResult<f64>, opts: &SynthesisOptions) -> anyhow::Result<()> {
    let json = ResultRecord::from_result(r, opts).to_json()?;
    emit(cfg.output.as_deref(), json.as_bytes())?;
    let mut line = format!("status: {:?}", r.status);
    if let Some(g) = r.gamma {
        line.push_str(&format!(", gamma {g:.6}"));
    }
    if let Some(v) = &r.verification {
        line.push_str(&format!(
            ", verification {}",
            if v.passed { "passed" } else { "failed" }
        ));
    }
    if let Some(m) = &r.diagnostics.message {
        line.push_str(&format!(" ({m})"));
    }
    eprintln!("{line}");
    Ok(())
}

fn write_ensemble_for(
    cfg: &JobConfig,
    cs: &ConsistencySet<f64>,
    r: &ControllerResult<f64>,
    omega: Option<&[Vec<f64>]>,
    n_modes: Option<usize>,
) -> anyhow::Result<()> {
    match r.v_normalized() {
        Some(v) if r.is_feasible() => write_ensemble(cfg, cs, &r.gains, &v.into_vec(), omega, n_modes),
        _ => Ok(()),
    }
}

/// Trajectories of plants sampled from the consistency set, one CSV per member.
fn write_ensemble(
    cfg: &JobConfig,
    cs: &ConsistencySet<f64>,
    gains: &[Matrix<f64>],
    v: &[f64],
    omega: Option<&[Vec<f64>]>,
    n_modes: Option<usize>,
) -> anyhow::Result<()> {
    let count = cfg.simulation.count;
    let (Some(dir), true) = (&cfg.trajectories, count > 0) else {
        return Ok(());
    };
    let dir = cfg.resolve(dir);
    let eo = ensemble_options(cfg, n_modes, omega.is_some())?;
    let ens = ensemble(cs, gains, v, omega, &x0(cfg, cs.n)?, count, cfg.seed, &eo)?;
    for (i, tr) in ens.trajectories.iter().enumerate() {
        write_trajectory_csv(tr, create(&dir.join(format!("member_{i:03}.csv")))?)?;
    }
    eprintln!(
        "{count} trajectories written to {}; max one-step increase of V {:.3e}",
        dir.display(),
        ens.max_lyapunov_increase
    );
    Ok(())
}

pub fn run(cfg: &JobConfig, mode: Mode) -> anyhow::Result<u8> {
    match mode {
        Mode::GenData => gen_data(cfg),
        Mode::Stabilize | Mode::P2p => {
            let d = load_data(cfg)?;
            ensure!(
                d.switching.is_none() && d.theta.is_none(),
                "data file has mode or parameter columns; use `switched` or `lpv`"
            );
            let cs = build_consistency(&d, cfg.prior)?;
            let opts = synthesis_options(cfg)?;
            let r = if mode == Mode::P2p {
                synthesize_p2p(&cs, &cfg.extended_plant()?, &opts)?
            } else {
                synthesize_stabilizing(&cs, &opts)?
            };
            write_result(cfg, &r, &opts)?;
            write_ensemble_for(cfg, &cs, &r, None, None)?;
            Ok(status_code(r.status))
        }
        Mode::SwitchedCommon | Mode::SwitchedPerMode => {
            let d = load_data(cfg)?;
            let labels = d.switching.as_ref().context("switched data need an `s` column")?;
            let n_modes = cfg.n_modes.unwrap_or_else(|| labels.iter().copied().max().unwrap_or(1));
            let cs = build_switched_consistency(&d, cfg.prior, n_modes)?;
            let opts = synthesis_options(cfg)?;
            let r = if mode == Mode::SwitchedCommon {
                synthesize_switched_common(&cs, &opts)?
            } else {
                synthesize_switched_per_mode(&cs, &opts)?
            };
            write_result(cfg, &r, &opts)?;
            write_ensemble_for(cfg, &cs, &r, None, Some(n_modes))?;
            Ok(status_code(r.status))
        }
        Mode::Lpv => {
            let d = load_data(cfg)?;
            let l = d
                .theta
                .as_ref()
                .map(Matrix::rows)
                .context("parameter-varying data need th columns")?;
            let omega = cfg.require(&cfg.omega, "omega")?;
            let cs = build_lpva_consistency(&d, cfg.prior, l)?;
            let opts = synthesis_options(cfg)?;
            let r = synthesize_lpva(&cs, omega, &opts)?;
            write_result(cfg, &r, &opts)?;
            write_ensemble_for(cfg, &cs, &r, Some(omega), None)?;
            Ok(status_code(r.status))
        }
        Mode::Nominal => {
            let PlantModel::Single { a, b } = cfg.plant_model()? else {
                bail!("config: field `plant` must be a single {{a, b}} plant for `nominal`");
            };
            let opts = synthesis_options(cfg)?;
            let r = match &cfg.extended {
                Some(_) => nominal_p2p(&a, &b, &cfg.extended_plant()?, cfg.time_kind, &opts, None)?,
                None => nominal_stabilize(&a, &b, cfg.time_kind, &opts)?,
            };
            write_result(cfg, &r, &opts)?;
            Ok(status_code(r.status))
        }
        Mode::Verify => verify(cfg),
        Mode::Simulate => simulate(cfg),
    }
}

fn gen_data(cfg: &JobConfig) -> anyhow::Result<u8> {
    let plant = cfg.plant_model()?;
    let samples = cfg.samples.unwrap_or(20);
    let d = generate_dataset(
        &plant,
        cfg.time_kind,
        samples,
        cfg.epsilon,
        cfg.seed,
        &cfg.generation_policy(),
    )?;
    // The dataset goes where later jobs on the same config will look for it.
    let target = cfg
        .cli_output
        .clone()
        .or_else(|| cfg.data.as_ref().map(|p| cfg.resolve(p)));
    let mut buf = Vec::new();
    write_dataset_csv(&d, &mut buf)?;
    emit(target.as_deref(), &buf)?;
    eprintln!("{samples} samples generated");
    Ok(EXIT_OK)
}

fn load_result(cfg: &JobConfig) -> anyhow::Result<(ResultRecord, Vec<Matrix<f64>>, Vec<f64>)> {
    let path = cfg.resolve(cfg.require(&cfg.result, "result")?);
    let text = std::fs::read_to_string(&path).with_context(|| format!("cannot read result file {}", path.display()))?;
    let rec = ResultRecord::from_json(&text).with_context(|| format!("result file {}", path.display()))?;
    let gains = rec.gain_matrices()?;
    let v = rec.v.clone().unwrap_or_default();
    ensure!(
        !gains.is_empty() && !v.is_empty(),
        "result file {} holds no certificate",
        path.display()
    );
    Ok((rec, gains, v))
}

fn pick<'a>(gains: &'a [Matrix<f64>], i: usize) -> anyhow::Result<&'a Matrix<f64>> {
    if gains.len() == 1 {
        Ok(&gains[0])
    } else {
        gains
            .get(i)
            .with_context(|| format!("result holds {} gains, needed one for index {}", gains.len(), i + 1))
    }
}

fn verify(cfg: &JobConfig) -> anyhow::Result<u8> {
    let (_, gains, v) = load_result(cfg)?;
    let mut report = VerificationReport::empty();
    match cfg.plant_model()? {
        PlantModel::Single { a, b } => report.merge(&verify_controller(
            &[(a, b)],
            &v,
            pick(&gains, 0)?,
            cfg.time_kind,
            cfg.eta,
        )),
        PlantModel::Switched { modes } => {
            for (s, ab) in modes.iter().enumerate() {
                report.merge(&verify_controller(
                    std::slice::from_ref(ab),
                    &v,
                    pick(&gains, s)?,
                    cfg.time_kind,
                    cfg.eta,
                ));
            }
        }
        PlantModel::Lpva { a, b } => {
            for (c, w) in cfg.require(&cfg.omega, "omega")?.iter().enumerate() {
                let ac = PlantModel::lpva_a_at(&a, w);
                report.merge(&verify_controller(
                    &[(ac, b.clone())],
                    &v,
                    pick(&gains, c)?,
                    cfg.time_kind,
                    cfg.eta,
                ));
            }
        }
    }
    let summary = VerificationSummary::from(&report);
    // The config's `output` names the synthesis result, which must not be overwritten here.
    emit(cfg.cli_output.as_deref(), to_json_string(&summary)?.as_bytes())?;
    eprintln!(
        "verification {} (max violation {:.3e})",
        if report.passed { "passed" } else { "failed" },
        report.max_violation
    );
    Ok(if report.passed { EXIT_OK } else { EXIT_INFEASIBLE })
}

fn simulate(cfg: &JobConfig) -> anyhow::Result<u8> {
    let (_, gains, v) = load_result(cfg)?;
    let plant = cfg.plant_model()?;
    let n_modes = match &plant {
        PlantModel::Switched { modes } => Some(modes.len()),
        _ => None,
    };
    let affine = matches!(plant, PlantModel::Lpva { .. });
    let eo = ensemble_options(cfg, n_modes, affine)?;
    let omega = if affine {
        Some(cfg.require(&cfg.omega, "omega")?.as_slice())
    } else {
        None
    };
    let tr = simulate_plant(&plant, cfg.time_kind, &gains, omega, &x0(cfg, plant.n())?, &eo)?.with_lyapunov(&v)?;
    let mut buf = Vec::new();
    write_trajectory_csv(&tr, &mut buf)?;
    let target = cfg
        .cli_output
        .clone()
        .or_else(|| cfg.trajectories.as_ref().map(|d| cfg.resolve(d).join("trajectory.csv")));
    emit(target.as_deref(), &buf)?;
    let norm = tr.final_state().iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    eprintln!(
        "{} samples; final |x| {norm:.3e}; max one-step increase of V {:.3e}",
        tr.len(),
        tr.max_lyapunov_increase()
    );
    if cfg.simulation.count > 0 && cfg.data.is_some() {
        let d = load_data(cfg)?;
        let cs = match &plant {
            PlantModel::Single { .. } => build_consistency(&d, cfg.prior)?,
            PlantModel::Switched { modes } => build_switched_consistency(&d, cfg.prior, modes.len())?,
            PlantModel::Lpva { a, .. } => build_lpva_consistency(&d, cfg.prior, a.len())?,
        };
        write_ensemble(cfg, &cs, &gains, &v, omega, n_modes)?;
    }
    Ok(EXIT_OK)
}
