//! `posdd`: data-driven controller synthesis for positive linear systems.
//!
//! Exit codes: 0 feasible or success, 1 usage or I/O error, 2 infeasible
//! (or a certificate that fails verification), 3 numerical failure.

mod config;
mod jobs;
mod reproduce;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{env_seed, JobConfig, Mode, Overrides};
use jobs::EXIT_USAGE;
use reproduce::Experiment;

#[derive(Debug, Parser)]
#[command(
    name = "posdd",
    version,
    about = "Data-driven stabilization of positive linear systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct JobArgs {
    /// JSON job configuration; relative paths inside it are resolved against its directory.
    #[arg(long, short)]
    config: PathBuf,
    /// Noise bound on each derivative or successor sample.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Margin realizing the strict inequalities.
    #[arg(long)]
    eta: Option<f64>,
    /// Random seed (overrides the config and POSDD_SEED).
    #[arg(long)]
    seed: Option<u64>,
    /// Number of samples to use or generate.
    #[arg(long = "T", value_name = "T")]
    samples: Option<usize>,
    /// Output file (result JSON or CSV); stdout when neither this nor the config names one.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate noisy samples of the configured plant into a dataset CSV.
    GenData(JobArgs),
    /// Robust stabilizing gain for every plant consistent with the data.
    Stabilize(JobArgs),
    /// Robust gain minimizing the worst-case peak-to-peak gain bound.
    P2p(JobArgs),
    /// Switched plant: one common gain, or one gain per mode with --per-mode.
    Switched {
        #[command(flatten)]
        job: JobArgs,
        #[arg(long)]
        per_mode: bool,
    },
    /// Gain-scheduled control of a plant affine in a measured parameter.
    Lpv(JobArgs),
    /// Synthesis for the known plant in the config (peak-to-peak if `extended` is given).
    Nominal(JobArgs),
    /// Check a result certificate against the plant in the config.
    Verify(JobArgs),
    /// Closed-loop trajectory of the configured plant under a result certificate.
    Simulate(JobArgs),
    /// Run one of the built-in experiments with fixed seeds and print a summary.
    Reproduce {
        experiment: Experiment,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long = "T", value_name = "T")]
        samples: Option<usize>,
        /// Directory for result JSON and trajectory CSVs.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// A config names the synthesis it describes; data generation, verification
/// and simulation run on any config.
fn compatible(config: Option<Mode>, requested: Mode) -> bool {
    let switched = |m| matches!(m, Mode::SwitchedCommon | Mode::SwitchedPerMode);
    let auxiliary = matches!(requested, Mode::GenData | Mode::Verify | Mode::Simulate);
    match config {
        None => true,
        Some(m) => auxiliary || m == requested || (switched(m) && switched(requested)),
    }
}

fn job(args: &JobArgs, mode: Mode, per_mode_flag: bool) -> anyhow::Result<u8> {
    let ov = Overrides {
        epsilon: args.epsilon,
        eta: args.eta,
        seed: args.seed,
        samples: args.samples,
        output: args.output.clone(),
    };
    let mut cfg = JobConfig::load(&args.config, &ov)?;
    anyhow::ensure!(
        compatible(cfg.mode, mode),
        "config {}: field `mode` is `{}`, which does not match the command",
        args.config.display(),
        cfg.mode
            .and_then(|m| clap::ValueEnum::to_possible_value(&m))
            .map_or_else(String::new, |v| v.get_name().to_string())
    );
    let mode = match (mode, cfg.mode) {
        (Mode::SwitchedCommon, _) if per_mode_flag => Mode::SwitchedPerMode,
        (Mode::SwitchedCommon, Some(Mode::SwitchedPerMode)) => Mode::SwitchedPerMode,
        (m, _) => m,
    };
    if let Some(o) = &cfg.output {
        cfg.output = Some(cfg.resolve(o));
    }
    jobs::run(&cfg, mode)
}

fn dispatch(cmd: Command) -> anyhow::Result<u8> {
    match cmd {
        Command::GenData(a) => job(&a, Mode::GenData, false),
        Command::Stabilize(a) => job(&a, Mode::Stabilize, false),
        Command::P2p(a) => job(&a, Mode::P2p, false),
        Command::Switched { job: a, per_mode } => job(&a, Mode::SwitchedCommon, per_mode),
        Command::Lpv(a) => job(&a, Mode::Lpv, false),
        Command::Nominal(a) => job(&a, Mode::Nominal, false),
        Command::Verify(a) => job(&a, Mode::Verify, false),
        Command::Simulate(a) => job(&a, Mode::Simulate, false),
        Command::Reproduce {
            experiment,
            seed,
            samples,
            out,
        } => {
            let seed = match seed {
                Some(s) => s,
                None => env_seed()?.unwrap_or_else(|| experiment.default_seed()),
            };
            reproduce::run(experiment, &reproduce::Run { seed, samples, out })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            // Library errors embed their source in the message; print each cause once.
            let mut msg = String::new();
            for cause in e.chain().map(|c| c.to_string()) {
                if !msg.contains(&cause) {
                    msg = if msg.is_empty() {
                        cause
                    } else {
                        format!("{msg}: {cause}")
                    };
                }
            }
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
