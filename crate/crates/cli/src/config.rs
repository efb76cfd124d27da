use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context};
use posdd::consistency::GenerationPolicy;
use posdd::linalg::{Matrix, TimeKind};
use posdd::synthesis::{ExtendedPlant, SignPattern};
use posdd::{PlantModel, Prior};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    GenData,
    Stabilize,
    P2p,
    SwitchedCommon,
    SwitchedPerMode,
    Lpv,
    Nominal,
    Verify,
    Simulate,
}

type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbPair {
    pub a: Rows,
    pub b: Rows,
}

/// Ground-truth plant: `{a, b}`, `{modes: [{a, b}, ..]}` or `{a_list, b}`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum PlantSpec {
    Single(AbPair),
    Switched { modes: Vec<AbPair> },
    Affine { a_list: Vec<Rows>, b: Rows },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtendedSpec {
    pub c: Rows,
    pub d: Rows,
    pub e: Rows,
    pub f: Rows,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSpec {
    pub x0: Option<Vec<f64>>,
    pub t_end: f64,
    pub dt: f64,
    /// Discrete-time horizon.
    pub steps: usize,
    /// Plants sampled from the consistency set; 0 simulates the plant block only.
    pub count: usize,
    /// Mean dwell time of the switching or parameter process.
    pub dwell: Option<f64>,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        Self {
            x0: None,
            t_end: 20.0,
            dt: 0.01,
            steps: 50,
            count: 0,
            dwell: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    #[serde(default)]
    pub mode: Option<Mode>,
    #[serde(default = "continuous")]
    pub time_kind: TimeKind,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default)]
    pub seed: u64,
    /// Use only the first `samples` data columns (or generate this many).
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default)]
    pub prior: Prior,
    #[serde(default = "yes")]
    pub normalize_v: bool,
    /// Number of modes when the data are switched.
    #[serde(default)]
    pub n_modes: Option<usize>,
    #[serde(default)]
    pub data: Option<PathBuf>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Result JSON holding the certificate to verify or simulate.
    #[serde(default)]
    pub result: Option<PathBuf>,
    /// Directory for trajectory CSVs.
    #[serde(default)]
    pub trajectories: Option<PathBuf>,
    #[serde(default)]
    pub plant: Option<PlantSpec>,
    #[serde(default)]
    pub extended: Option<ExtendedSpec>,
    #[serde(default)]
    pub sign_pattern: Option<Vec<String>>,
    /// Scheduling vertices of the parameter polytope.
    #[serde(default)]
    pub omega: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub theta_box: Option<ThetaBox>,
    #[serde(default)]
    pub generation: Option<GenerationPolicy>,
    #[serde(default)]
    pub simulation: SimulationSpec,
    #[serde(default = "default_verification_samples")]
    pub verification_samples: usize,
    #[serde(skip)]
    pub base_dir: PathBuf,
    /// `--output` as given on the command line.
    #[serde(skip)]
    pub cli_output: Option<PathBuf>,
}

fn continuous() -> TimeKind {
    TimeKind::Continuous
}
fn default_epsilon() -> f64 {
    0.1
}
fn default_eta() -> f64 {
    1e-3
}
fn yes() -> bool {
    true
}
fn default_verification_samples() -> usize {
    100
}

/// Values given on the command line; each shadows the config field of the same name.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub epsilon: Option<f64>,
    pub eta: Option<f64>,
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub output: Option<PathBuf>,
}

/// Seed from `POSDD_SEED`, if set.
pub fn env_seed() -> anyhow::Result<Option<u64>> {
    match std::env::var("POSDD_SEED") {
        Ok(s) => {
            Ok(Some(s.trim().parse().with_context(|| {
                format!("POSDD_SEED={s:?} is not an unsigned integer")
            })?))
        }
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => bail!("POSDD_SEED: {e}"),
    }
}

impl JobConfig {
    pub fn load(path: &Path, ov: &Overrides) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        let mut cfg: JobConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            anyhow::anyhow!("config {}: field `{field}`: {}", path.display(), e.inner())
        })?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        if let Some(s) = env_seed()? {
            cfg.seed = s;
        }
        cfg.epsilon = ov.epsilon.unwrap_or(cfg.epsilon);
        cfg.eta = ov.eta.unwrap_or(cfg.eta);
        cfg.seed = ov.seed.unwrap_or(cfg.seed);
        cfg.samples = ov.samples.or(cfg.samples);
        if let Some(o) = &ov.output {
            // Command-line paths are relative to the working directory.
            let o = std::path::absolute(o)?;
            cfg.output = Some(o.clone());
            cfg.cli_output = Some(o);
        }
        ensure!(
            cfg.epsilon >= 0.0 && cfg.epsilon.is_finite(),
            "config: field `epsilon` must be >= 0, got {}",
            cfg.epsilon
        );
        ensure!(
            cfg.eta > 0.0 && cfg.eta.is_finite(),
            "config: field `eta` must be > 0, got {}",
            cfg.eta
        );
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn require<'a, T>(&self, field: &'a Option<T>, name: &str) -> anyhow::Result<&'a T> {
        field
            .as_ref()
            .with_context(|| format!("config: field `{name}` is required for this command"))
    }

    pub fn plant_model(&self) -> anyhow::Result<PlantModel<f64>> {
        let mat = |rows: &Rows, what: &str| {
            Matrix::from_f64_rows(rows).with_context(|| format!("config: field `plant.{what}`"))
        };
        Ok(match self.require(&self.plant, "plant")? {
            PlantSpec::Single(p) => PlantModel::Single {
                a: mat(&p.a, "a")?,
                b: mat(&p.b, "b")?,
            },
            PlantSpec::Switched { modes } => PlantModel::Switched {
                modes: modes
                    .iter()
                    .enumerate()
                    .map(|(i, p)| {
                        Ok((
                            mat(&p.a, &format!("modes[{i}].a"))?,
                            mat(&p.b, &format!("modes[{i}].b"))?,
                        ))
                    })
                    .collect::<anyhow::Result<_>>()?,
            },
            PlantSpec::Affine { a_list, b } => PlantModel::Lpva {
                a: a_list
                    .iter()
                    .enumerate()
                    .map(|(i, a)| mat(a, &format!("a_list[{i}]")))
                    .collect::<anyhow::Result<_>>()?,
                b: mat(b, "b")?,
            },
        })
    }

    pub fn extended_plant(&self) -> anyhow::Result<ExtendedPlant<f64>> {
        let e = self.require(&self.extended, "extended")?;
        let mat = |rows: &Rows, what: &str| {
            Matrix::from_f64_rows(rows).with_context(|| format!("config: field `extended.{what}`"))
        };
        Ok(ExtendedPlant {
            c: mat(&e.c, "c")?,
            d: mat(&e.d, "d")?,
            e: mat(&e.e, "e")?,
            f: mat(&e.f, "f")?,
        })
    }

    pub fn pattern(&self) -> anyhow::Result<Option<SignPattern>> {
        self.sign_pattern
            .as_ref()
            .map(|rows| SignPattern::parse(rows).context("config: field `sign_pattern`"))
            .transpose()
    }

    pub fn generation_policy(&self) -> GenerationPolicy {
        let mut p = self.generation.clone().unwrap_or_default();
        if let (None, Some(b)) = (&p.theta_box, &self.theta_box) {
            p.theta_box = Some((b.lo.clone(), b.hi.clone()));
        }
        p
    }
}
