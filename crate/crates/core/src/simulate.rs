//! Closed-loop simulation: fixed-step RK4 in continuous time, exact iteration
//! in discrete time, plus switched and parameter-varying variants.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;

use crate::consistency::{ConsistencyError, ConsistencySet, PlantModel};
use crate::linalg::{LinalgError, Matrix, TimeKind};
use crate::polytope::{sample_interior, PolytopeError};
use crate::scalar::Scalar;
use crate::synthesis::{gain_schedule, SynthesisError};

pub const DEFAULT_DT: f64 = 0.01;
/// States with a norm above this abort the simulation.
pub const DIVERGENCE_LIMIT: f64 = 1e12;
/// Allowed increase of `V(x)` between consecutive samples.
pub const LYAPUNOV_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimulationError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("state norm exceeded {DIVERGENCE_LIMIT:e} at t = {time}")]
    Diverged { time: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
    #[error(transparent)]
    Polytope(#[from] PolytopeError),
    #[error(transparent)]
    Consistency(#[from] ConsistencyError),
}

/// Per-sample annotation of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub enum Labels<T: Scalar> {
    /// Active mode (1-based), one per sample.
    Modes(Vec<usize>),
    /// Scheduling parameter, `L × samples`.
    Theta(Matrix<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T: Scalar> {
    pub times: Vec<f64>,
    /// `n × samples`.
    pub states: Matrix<T>,
    pub labels: Option<Labels<T>>,
    pub lyapunov: Option<Vec<T>>,
}

impl<T: Scalar> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, k: usize) -> Vec<T> {
        self.states.col(k)
    }

    pub fn final_state(&self) -> Vec<T> {
        self.state(self.len() - 1)
    }

    /// Compute and store `V(x(t))`.
    pub fn with_lyapunov(mut self, v: &[T]) -> Result<Self, SimulationError> {
        self.lyapunov = Some(lyapunov_trace(&self, v)?);
        Ok(self)
    }

    /// Largest `V(t_{k+1}) - V(t_k)`, or `-inf` without a trace.
    pub fn max_lyapunov_increase(&self) -> f64 {
        self.lyapunov.as_ref().map_or(f64::NEG_INFINITY, |v| {
            v.windows(2)
                .map(|w| (w[1] - w[0]).to_f64_lossy())
                .fold(f64::NEG_INFINITY, f64::max)
        })
    }

    /// Most negative state entry over the whole trajectory.
    pub fn min_state(&self) -> f64 {
        self.states
            .as_slice()
            .iter()
            .fold(f64::INFINITY, |a, &x| a.min(x.to_f64_lossy()))
    }
}

/// `A + BK` with shape checks.
pub fn closed_loop<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>, k: &Matrix<T>) -> Result<Matrix<T>, SimulationError> {
    if !a.is_square() || b.rows() != a.rows() || k.rows() != b.cols() || k.cols() != a.rows() {
        return Err(SimulationError::Invalid(format!(
            "incompatible shapes A {:?}, B {:?}, K {:?}",
            a.shape(),
            b.shape(),
            k.shape()
        )));
    }
    Ok(a.add(&b.matmul(k)?)?)
}

fn rk4_step<T: Scalar>(m: &Matrix<T>, x: &[T], h: T) -> Vec<T> {
    let f = |z: &[T]| m.mul_vec(z).expect("square closed loop").into_vec();
    let axpy = |z: &[T], k: &[T], s: T| -> Vec<T> { z.iter().zip(k).map(|(&a, &b)| a + s * b).collect() };
    let half = h / T::lit(2.0);
    let k1 = f(x);
    let k2 = f(&axpy(x, &k1, half));
    let k3 = f(&axpy(x, &k2, half));
    let k4 = f(&axpy(x, &k3, h));
    let six = T::lit(6.0);
    let two = T::lit(2.0);
    (0..x.len())
        .map(|i| x[i] + h / six * (k1[i] + two * k2[i] + two * k3[i] + k4[i]))
        .collect()
}

fn check_growth<T: Scalar>(x: &[T], time: f64) -> Result<(), SimulationError> {
    let norm = x.iter().fold(0.0_f64, |a, &b| a.max(b.to_f64_lossy().abs()));
    if !norm.is_finite() || norm > DIVERGENCE_LIMIT {
        return Err(SimulationError::Diverged { time });
    }
    Ok(())
}

fn grid(t_end: f64, dt: f64) -> Result<usize, SimulationError> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(SimulationError::Invalid(format!("dt must be positive, got {dt}")));
    }
    if !(t_end >= dt) || !t_end.is_finite() {
        return Err(SimulationError::Invalid(format!(
            "t_end must be at least dt, got {t_end}"
        )));
    }
    Ok((t_end / dt).round() as usize)
}

fn check_x0<T: Scalar>(x0: &[T], n: usize) -> Result<(), SimulationError> {
    if x0.len() != n {
        return Err(SimulationError::Invalid(format!(
            "x0 has length {}, expected {n}",
            x0.len()
        )));
    }
    Ok(())
}

/// Continuous-time integration with a per-step closed loop. `m_at(k, t)`
/// returns the matrix used on `[t_k, t_{k+1})`.
fn integrate<T: Scalar, F>(x0: &[T], steps: usize, dt: f64, mut m_at: F) -> Result<Trajectory<T>, SimulationError>
where
    F: FnMut(usize, f64) -> Result<Matrix<T>, SimulationError>,
{
    let n = x0.len();
    let mut states = Matrix::zeros(n, steps + 1);
    let mut times = Vec::with_capacity(steps + 1);
    let mut x = x0.to_vec();
    let h = T::lit(dt);
    for k in 0..=steps {
        let t = k as f64 * dt;
        times.push(t);
        for (i, &xi) in x.iter().enumerate() {
            states.set(i, k, xi);
        }
        if k < steps {
            let m = m_at(k, t)?;
            x = rk4_step(&m, &x, h);
            check_growth(&x, t + dt)?;
        }
    }
    Ok(Trajectory {
        times,
        states,
        labels: None,
        lyapunov: None,
    })
}

/// RK4 on `ẋ = (A + BK)x` over `[0, t_end]` with step `dt`.
pub fn simulate_ct<T: Scalar>(
    a: &Matrix<T>,
    b: &Matrix<T>,
    k: &Matrix<T>,
    x0: &[T],
    t_end: f64,
    dt: f64,
) -> Result<Trajectory<T>, SimulationError> {
    let m = closed_loop(a, b, k)?;
    check_x0(x0, m.rows())?;
    let steps = grid(t_end, dt)?;
    integrate(x0, steps, dt, |_, _| Ok(m.clone()))
}

/// Iterate `x⁺ = (A + BK)x` for `steps` steps; times are step indices.
pub fn simulate_dt<T: Scalar>(
    a: &Matrix<T>,
    b: &Matrix<T>,
    k: &Matrix<T>,
    x0: &[T],
    steps: usize,
) -> Result<Trajectory<T>, SimulationError> {
    let m = closed_loop(a, b, k)?;
    check_x0(x0, m.rows())?;
    if steps == 0 {
        return Err(SimulationError::Invalid("steps must be at least 1".into()));
    }
    let n = x0.len();
    let mut states = Matrix::zeros(n, steps + 1);
    let mut x = x0.to_vec();
    for s in 0..=steps {
        for (i, &xi) in x.iter().enumerate() {
            states.set(i, s, xi);
        }
        if s < steps {
            x = m.mul_vec(&x)?.into_vec();
            check_growth(&x, (s + 1) as f64)?;
        }
    }
    Ok(Trajectory {
        times: (0..=steps).map(|s| s as f64).collect(),
        states,
        labels: None,
        lyapunov: None,
    })
}

/// `V(x) = max_i x_i / v_i` at every sample.
pub fn lyapunov_trace<T: Scalar>(traj: &Trajectory<T>, v: &[T]) -> Result<Vec<T>, SimulationError> {
    if v.len() != traj.states.rows() {
        return Err(SimulationError::Invalid(format!(
            "v has length {}, expected {}",
            v.len(),
            traj.states.rows()
        )));
    }
    if v.iter().any(|&x| !(x > T::zero())) {
        return Err(SimulationError::Invalid("v must be strictly positive".into()));
    }
    Ok((0..traj.len())
        .map(|k| {
            (0..v.len())
                .map(|i| traj.states.get(i, k) / v[i])
                .fold(T::neg_infinity(), T::max)
        })
        .collect())
}

/// Mode switching at exponentially distributed arrival times.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchingProcess {
    pub mean_dwell: f64,
    pub n_modes: usize,
    pub seed: u64,
}

impl SwitchingProcess {
    /// Mode label (0-based) on each of `steps` grid intervals. The first mode
    /// is drawn uniformly; each switch moves to one of the other modes.
    pub fn sequence(&self, steps: usize, dt: f64) -> Result<Vec<usize>, SimulationError> {
        if !(self.mean_dwell > 0.0) {
            return Err(SimulationError::Invalid("mean dwell time must be positive".into()));
        }
        if self.n_modes == 0 {
            return Err(SimulationError::Invalid("at least one mode is required".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let exp = Exp::new(1.0 / self.mean_dwell).map_err(|e| SimulationError::Invalid(e.to_string()))?;
        let mut mode = rng.random_range(0..self.n_modes);
        let mut next = exp.sample(&mut rng);
        let mut out = Vec::with_capacity(steps);
        for k in 0..steps {
            let t = k as f64 * dt;
            // Switches are applied at the first grid point after they occur.
            while t >= next {
                if self.n_modes > 1 {
                    let r = rng.random_range(0..self.n_modes - 1);
                    mode = if r >= mode { r + 1 } else { r };
                }
                next += exp.sample(&mut rng);
            }
            out.push(mode);
        }
        Ok(out)
    }
}

/// Piecewise-constant parameter drawn uniformly from a box, changing at
/// exponentially distributed times.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaProcess {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub mean_dwell: f64,
    pub seed: u64,
}

impl ThetaProcess {
    pub const DEFAULT_DWELL: f64 = 0.05;

    pub fn uniform(lo: Vec<f64>, hi: Vec<f64>, seed: u64) -> Self {
        Self {
            lo,
            hi,
            mean_dwell: Self::DEFAULT_DWELL,
            seed,
        }
    }

    /// Parameter value on each of `steps` grid intervals.
    pub fn sequence(&self, steps: usize, dt: f64) -> Result<Vec<Vec<f64>>, SimulationError> {
        if self.lo.len() != self.hi.len() || self.lo.iter().zip(&self.hi).any(|(a, b)| !(a <= b)) {
            return Err(SimulationError::Invalid("parameter box bounds are inconsistent".into()));
        }
        if !(self.mean_dwell > 0.0) {
            return Err(SimulationError::Invalid("mean dwell time must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let exp = Exp::new(1.0 / self.mean_dwell).map_err(|e| SimulationError::Invalid(e.to_string()))?;
        let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            self.lo
                .iter()
                .zip(&self.hi)
                .map(|(&a, &b)| if a == b { a } else { rng.random_range(a..=b) })
                .collect()
        };
        let mut theta = draw(&mut rng);
        let mut next = exp.sample(&mut rng);
        let mut out = Vec::with_capacity(steps);
        for k in 0..steps {
            let t = k as f64 * dt;
            if t >= next {
                theta = draw(&mut rng);
                while next <= t {
                    next += exp.sample(&mut rng);
                }
            }
            out.push(theta.clone());
        }
        Ok(out)
    }
}

/// Switched closed loop. `gains` holds one gain per mode, or a single
/// common gain.
pub fn simulate_switched<T: Scalar>(
    modes: &[(Matrix<T>, Matrix<T>)],
    gains: &[Matrix<T>],
    x0: &[T],
    t_end: f64,
    process: &SwitchingProcess,
    dt: f64,
) -> Result<Trajectory<T>, SimulationError> {
    if modes.is_empty() {
        return Err(SimulationError::Invalid("no modes given".into()));
    }
    if gains.len() != 1 && gains.len() != modes.len() {
        return Err(SimulationError::Invalid(format!(
            "expected 1 or {} gains, got {}",
            modes.len(),
            gains.len()
        )));
    }
    if process.n_modes != modes.len() {
        return Err(SimulationError::Invalid(format!(
            "switching process has {} modes, plant has {}",
            process.n_modes,
            modes.len()
        )));
    }
    let loops = modes
        .iter()
        .enumerate()
        .map(|(s, (a, b))| closed_loop(a, b, &gains[if gains.len() == 1 { 0 } else { s }]))
        .collect::<Result<Vec<_>, _>>()?;
    check_x0(x0, loops[0].rows())?;
    let steps = grid(t_end, dt)?;
    let seq = process.sequence(steps, dt)?;
    let mut traj = integrate(x0, steps, dt, |k, _| Ok(loops[seq[k]].clone()))?;
    let mut labels: Vec<usize> = seq.iter().map(|&s| s + 1).collect();
    labels.push(*labels.last().expect("at least one step"));
    traj.labels = Some(Labels::Modes(labels));
    Ok(traj)
}

/// Gain-scheduled closed loop `ẋ = (Σ θ_ℓ A_ℓ + B K(θ))x` where `K(θ)`
/// interpolates the vertex gains over `omega`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_lpv<T: Scalar>(
    a_list: &[Matrix<T>],
    b: &Matrix<T>,
    omega: &[Vec<T>],
    gains: &[Matrix<T>],
    x0: &[T],
    t_end: f64,
    process: &ThetaProcess,
    dt: f64,
) -> Result<Trajectory<T>, SimulationError> {
    if a_list.is_empty() || process.lo.len() != a_list.len() {
        return Err(SimulationError::Invalid(format!(
            "parameter dimension {} does not match {} affine terms",
            process.lo.len(),
            a_list.len()
        )));
    }
    check_x0(x0, a_list[0].rows())?;
    let steps = grid(t_end, dt)?;
    let seq = process.sequence(steps, dt)?;
    let mut cached: Option<(&Vec<f64>, Matrix<T>)> = None;
    let mut traj = integrate(x0, steps, dt, |k, _| {
        let th = &seq[k];
        if cached.as_ref().is_none_or(|(prev, _)| *prev != th) {
            let tt: Vec<T> = th.iter().map(|&x| T::lit(x)).collect();
            let kk = gain_schedule(&tt, omega, gains)?;
            let m = closed_loop(&PlantModel::lpva_a_at(a_list, &tt), b, &kk)?;
            cached = Some((th, m));
        }
        Ok(cached.as_ref().expect("just set").1.clone())
    })?;
    let l = a_list.len();
    let theta = Matrix::from_fn(l, steps + 1, |i, k| T::lit(seq[k.min(steps - 1)][i]));
    traj.labels = Some(Labels::Theta(theta));
    Ok(traj)
}

/// How each ensemble member is simulated.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleOptions {
    pub t_end: f64,
    pub dt: f64,
    /// Discrete-time horizon.
    pub steps: usize,
    /// Required for switched sets. Every member sees the same sequence.
    pub switching: Option<SwitchingProcess>,
    /// Required for affine sets. Every member sees the same sequence.
    pub theta: Option<ThetaProcess>,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        Self {
            t_end: 20.0,
            dt: DEFAULT_DT,
            steps: 50,
            switching: None,
            theta: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Ensemble<T: Scalar> {
    pub plants: Vec<PlantModel<T>>,
    pub trajectories: Vec<Trajectory<T>>,
    /// Largest one-step increase of `V` over all members.
    pub max_lyapunov_increase: f64,
}

/// Simulate one plant of any structure under the given gains.
pub fn simulate_plant<T: Scalar>(
    plant: &PlantModel<T>,
    kind: TimeKind,
    gains: &[Matrix<T>],
    omega: Option<&[Vec<T>]>,
    x0: &[T],
    opts: &EnsembleOptions,
) -> Result<Trajectory<T>, SimulationError> {
    let first = gains
        .first()
        .ok_or_else(|| SimulationError::Invalid("no gain given".into()))?;
    match (plant, kind) {
        (PlantModel::Single { a, b }, TimeKind::Continuous) => simulate_ct(a, b, first, x0, opts.t_end, opts.dt),
        (PlantModel::Single { a, b }, TimeKind::Discrete) => simulate_dt(a, b, first, x0, opts.steps),
        (PlantModel::Switched { modes }, TimeKind::Continuous) => {
            let p = opts
                .switching
                .as_ref()
                .ok_or_else(|| SimulationError::Invalid("switched simulation needs a switching process".into()))?;
            simulate_switched(modes, gains, x0, opts.t_end, p, opts.dt)
        }
        (PlantModel::Lpva { a, b }, TimeKind::Continuous) => {
            let p = opts.theta.as_ref().ok_or_else(|| {
                SimulationError::Invalid("parameter-varying simulation needs a parameter process".into())
            })?;
            let omega = omega.ok_or_else(|| SimulationError::Invalid("scheduling vertices required".into()))?;
            simulate_lpv(a, b, omega, gains, x0, opts.t_end, p, opts.dt)
        }
        _ => Err(SimulationError::Invalid(
            "switched and parameter-varying simulation is continuous-time only".into(),
        )),
    }
}

/// Sample `count` plants from the consistency set, simulate each under the
/// certificate `(v, gains)` and attach Lyapunov traces. Members run in
/// parallel; results do not depend on scheduling.
#[allow(clippy::too_many_arguments)]
pub fn ensemble<T: Scalar>(
    cs: &ConsistencySet<T>,
    gains: &[Matrix<T>],
    v: &[T],
    omega: Option<&[Vec<T>]>,
    x0: &[T],
    count: usize,
    seed: u64,
    opts: &EnsembleOptions,
) -> Result<Ensemble<T>, SimulationError> {
    if count == 0 {
        return Ok(Ensemble {
            plants: Vec::new(),
            trajectories: Vec::new(),
            max_lyapunov_increase: f64::NEG_INFINITY,
        });
    }
    let points = sample_interior(&cs.polytope, count, seed)?;
    let plants = points.iter().map(|p| cs.unpack(p)).collect::<Result<Vec<_>, _>>()?;
    let trajectories = plants
        .par_iter()
        .map(|p| simulate_plant(p, cs.time_kind, gains, omega, x0, opts)?.with_lyapunov(v))
        .collect::<Result<Vec<_>, _>>()?;
    let max_lyapunov_increase = trajectories
        .iter()
        .map(Trajectory::max_lyapunov_increase)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(Ensemble {
        plants,
        trajectories,
        max_lyapunov_increase,
    })
}
