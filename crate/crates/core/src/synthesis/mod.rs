//! Controller synthesis by linear programming.
//!
//! A gain `K = Y X⁻¹`, `X = diag(v)`, is positively stabilizing for a plant
//! when `(AX + BY)1 < 0` with `AX + BY` Metzler (continuous time), or
//! `(AX + BY)1 < v` with `AX + BY >= 0` (discrete time). These conditions are
//! linear in `(v, Y)` for a fixed plant and define the stabilizing polytope
//! in plant-coordinate space. Robustness over a consistency polytope `P₁` is
//! the containment `P₁ ⊆ P₂(v, Y)`, certified by a nonnegative `Z` with
//! `Z G₁ = G₂(v, Y)` and `Z h₁ <= h₂(v, Y)`, which stays linear because `G₁`
//! is constant.

mod rows;
mod verify;

use serde::{Deserialize, Serialize};

pub use rows::{evaluate_rows, stab_polytope_rows, AffineRow, Terms};
pub use verify::{verify_controller, verify_on_set, VerificationReport};

use rows::{at_point, stabilization_rows, GainVars};

use crate::consistency::{ConsistencyError, ConsistencySet, Variant};
use crate::linalg::{LinalgError, Matrix, TimeKind, Vector};
use crate::lp::{self, LpError, LpProblem, LpStatus, SolverOptions};
use crate::polytope::{Polytope, PolytopeError};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthesisError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("consistency set is empty; the data contradict the noise bound")]
    EmptyConsistencySet,
    #[error("parameter lies outside the convex hull of the scheduling vertices")]
    OutsideHull,
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Polytope(PolytopeError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Consistency(#[from] ConsistencyError),
}

impl From<PolytopeError> for SynthesisError {
    fn from(e: PolytopeError) -> Self {
        match e {
            PolytopeError::Empty => SynthesisError::EmptyConsistencySet,
            e => SynthesisError::Polytope(e),
        }
    }
}

/// Per-entry restriction on a gain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "*", alias = "free")]
    Unrestricted,
    #[serde(rename = "+", alias = "nonneg")]
    Nonneg,
    #[serde(rename = "-", alias = "nonpos")]
    Nonpos,
    #[serde(rename = "0", alias = "zero")]
    Zero,
}

impl Sign {
    pub fn from_char(c: char) -> Option<Self> {
        match c {
            '*' => Some(Self::Unrestricted),
            '+' => Some(Self::Nonneg),
            '-' => Some(Self::Nonpos),
            '0' => Some(Self::Zero),
            _ => None,
        }
    }

    pub fn admits<T: Scalar>(self, x: T, tol: T) -> bool {
        match self {
            Self::Unrestricted => true,
            Self::Nonneg => x >= -tol,
            Self::Nonpos => x <= tol,
            Self::Zero => x == T::zero(),
        }
    }
}

/// `m × n` grid of [`Sign`]s constraining `K` (and hence `Y`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SignPattern {
    rows: Vec<Vec<Sign>>,
}

impl SignPattern {
    pub fn new(rows: Vec<Vec<Sign>>) -> Result<Self, SynthesisError> {
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(SynthesisError::Dimension("sign pattern rows differ in length".into()));
        }
        Ok(Self { rows })
    }

    /// Parse rows such as `["00*0-", "0+00+"]`.
    pub fn parse<S: AsRef<str>>(rows: &[S]) -> Result<Self, SynthesisError> {
        let parsed = rows
            .iter()
            .map(|r| {
                r.as_ref()
                    .chars()
                    .filter(|c| !c.is_whitespace())
                    .map(|c| {
                        Sign::from_char(c)
                            .ok_or_else(|| SynthesisError::Precondition(format!("unknown sign symbol {c:?}")))
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(parsed)
    }

    pub fn unrestricted(m: usize, n: usize) -> Self {
        Self {
            rows: vec![vec![Sign::Unrestricted; n]; m],
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows.len(), self.rows.first().map_or(0, Vec::len))
    }

    pub fn get(&self, j: usize, k: usize) -> Sign {
        self.rows[j][k]
    }

    /// Zero entries exactly zero, signed entries within `tol`.
    pub fn admits<T: Scalar>(&self, k: &Matrix<T>, tol: T) -> bool {
        k.shape() == self.shape()
            && (0..k.rows()).all(|j| (0..k.cols()).all(|c| self.rows[j][c].admits(k.get(j, c), tol)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthesisOptions {
    /// Margin realizing the strict inequalities.
    pub eta: f64,
    /// Add `1ᵀv = 1`.
    pub normalize_v: bool,
    pub sign_pattern: Option<SignPattern>,
    /// Drop redundant consistency faces when there are more than `4·dim`.
    pub reduce_faces: bool,
    /// Hit-and-run samples used to verify a certificate; 0 disables.
    pub verification_samples: usize,
    pub seed: u64,
    #[serde(skip)]
    pub solver: SolverOptions,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self {
            eta: 1e-3,
            normalize_v: false,
            sign_pattern: None,
            reduce_faces: true,
            verification_samples: 100,
            seed: 0,
            solver: SolverOptions::default(),
        }
    }
}

impl SynthesisOptions {
    fn validate(&self) -> Result<(), SynthesisError> {
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(SynthesisError::Precondition(format!(
                "eta must be positive, got {}",
                self.eta
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SynthesisStatus {
    Feasible,
    Infeasible,
    NumericalFailure,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Diagnostics {
    pub lp_iterations: usize,
    pub n_variables: usize,
    pub n_equalities: usize,
    pub n_inequalities: usize,
    /// Consistency faces per Farkas block after any reduction.
    pub faces: Vec<usize>,
    /// `max |Z G₁ - G₂|` and `max (Z h₁ - h₂)⁺` at the returned point.
    pub farkas_residual: f64,
    pub phase1_residual: f64,
    pub message: Option<String>,
}

/// Outcome of a synthesis. Structures with several gains (per-mode or
/// per-vertex) report one entry per mode or vertex in `gains`, `y` and `z`.
#[derive(Debug, Clone)]
pub struct ControllerResult<T: Scalar> {
    pub status: SynthesisStatus,
    pub v: Option<Vector<T>>,
    pub gains: Vec<Matrix<T>>,
    pub y: Vec<Matrix<T>>,
    pub z: Vec<Matrix<T>>,
    pub gamma: Option<T>,
    pub diagnostics: Diagnostics,
    pub verification: Option<VerificationReport>,
}

impl<T: Scalar> ControllerResult<T> {
    fn failed(status: SynthesisStatus, diagnostics: Diagnostics) -> Self {
        Self {
            status,
            v: None,
            gains: Vec::new(),
            y: Vec::new(),
            z: Vec::new(),
            gamma: None,
            diagnostics,
            verification: None,
        }
    }

    pub fn is_feasible(&self) -> bool {
        self.status == SynthesisStatus::Feasible
    }

    /// The gain, or the first of several.
    pub fn k(&self) -> Option<&Matrix<T>> {
        self.gains.first()
    }

    /// `v / 1ᵀv`, the display normalization.
    pub fn v_normalized(&self) -> Option<Vector<T>> {
        self.v.as_ref().map(|v| {
            let s: T = v.iter().copied().sum();
            Vector::from_vec_unchecked(v.iter().map(|&x| x / s).collect())
        })
    }
}

/// Exogenous channels `δx = Ax + Bu + Eξ`, `z = Cx + Du + Fξ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedPlant<T: Scalar> {
    pub c: Matrix<T>,
    pub d: Matrix<T>,
    pub e: Matrix<T>,
    pub f: Matrix<T>,
}

impl<T: Scalar> ExtendedPlant<T> {
    pub fn validate(&self, n: usize, m: usize) -> Result<(), SynthesisError> {
        let p = self.c.rows();
        let w = self.e.cols();
        let ok = self.c.cols() == n && self.d.shape() == (p, m) && self.e.rows() == n && self.f.shape() == (p, w);
        if ok {
            Ok(())
        } else {
            Err(SynthesisError::Dimension(format!(
                "extended plant shapes C {:?}, D {:?}, E {:?}, F {:?} do not fit n = {n}, m = {m}",
                self.c.shape(),
                self.d.shape(),
                self.e.shape(),
                self.f.shape()
            )))
        }
    }
}

#[derive(Default)]
struct Builder<T> {
    lo: Vec<T>,
    hi: Vec<T>,
    eq: Vec<(Terms<T>, T)>,
    le: Vec<(Terms<T>, T)>,
    obj: Terms<T>,
}

struct FarkasBlock {
    start: usize,
    q: usize,
    f: usize,
}

impl<T: Scalar> Builder<T> {
    fn var(&mut self, lo: T, hi: T) -> usize {
        self.lo.push(lo);
        self.hi.push(hi);
        self.lo.len() - 1
    }

    fn problem(&self) -> LpProblem<T> {
        let mut p = LpProblem::new(self.lo.len());
        for (j, (&lo, &hi)) in self.lo.iter().zip(&self.hi).enumerate() {
            p.set_bounds(j, lo, hi);
        }
        for (t, r) in &self.eq {
            p.add_eq_sparse(t, *r);
        }
        for (t, r) in &self.le {
            p.add_le_sparse(t, *r);
        }
        let mut c = vec![T::zero(); self.lo.len()];
        for &(j, a) in &self.obj {
            c[j] += a;
        }
        p.set_objective(&c);
        p
    }

    fn new_v(&mut self, n: usize, opts: &SynthesisOptions) -> Vec<usize> {
        let v: Vec<usize> = (0..n).map(|_| self.var(T::lit(opts.eta), T::infinity())).collect();
        if opts.normalize_v {
            self.eq.push((v.iter().map(|&j| (j, T::one())).collect(), T::one()));
        }
        v
    }

    fn new_gain(
        &mut self,
        v: &[usize],
        m: usize,
        pattern: Option<&SignPattern>,
    ) -> Result<GainVars<T>, SynthesisError> {
        let n = v.len();
        if let Some(p) = pattern {
            if p.shape() != (m, n) {
                return Err(SynthesisError::Dimension(format!(
                    "sign pattern is {:?}, gain is {m}x{n}",
                    p.shape()
                )));
            }
        }
        let mut y = vec![vec![None; n]; m];
        for k in 0..n {
            for (j, row) in y.iter_mut().enumerate() {
                let sign = pattern.map_or(Sign::Unrestricted, |p| p.get(j, k));
                let (lo, hi) = match sign {
                    Sign::Zero => continue,
                    Sign::Unrestricted => (T::neg_infinity(), T::infinity()),
                    Sign::Nonneg => (T::zero(), T::infinity()),
                    Sign::Nonpos => (T::neg_infinity(), T::zero()),
                };
                row[k] = Some((self.var(lo, hi), T::one()));
            }
        }
        Ok(GainVars { v: v.to_vec(), y })
    }

    /// `Z ≥ 0` with `Z G₁ = G₂(ξ)` and `Z h₁ <= h₂(ξ)`.
    fn farkas(&mut self, p1: &Polytope<T>, rows: &[AffineRow<T>]) -> FarkasBlock {
        let (f, d) = (p1.n_faces(), p1.dim());
        let g1 = p1.g();
        let columns: Vec<Vec<(usize, T)>> = (0..d)
            .map(|c| {
                (0..f)
                    .filter(|&i| g1.get(i, c) != T::zero())
                    .map(|i| (i, g1.get(i, c)))
                    .collect()
            })
            .collect();
        let start = self.lo.len();
        for _ in 0..rows.len() * f {
            self.var(T::zero(), T::infinity());
        }
        for (r, row) in rows.iter().enumerate() {
            let z = |i: usize| start + r * f + i;
            let mut by_coord: Vec<Terms<T>> = vec![Vec::new(); d];
            for (c, t) in &row.coeffs {
                by_coord[*c].extend(t.iter().map(|&(v, a)| (v, -a)));
            }
            for (c, extra) in by_coord.into_iter().enumerate() {
                let mut terms: Terms<T> = columns[c].iter().map(|&(i, g)| (z(i), g)).collect();
                terms.extend(extra);
                if !terms.is_empty() {
                    self.eq.push((terms, T::zero()));
                }
            }
            let mut terms: Terms<T> = (0..f)
                .filter(|&i| p1.h()[i] != T::zero())
                .map(|i| (z(i), p1.h()[i]))
                .collect();
            terms.extend(row.rhs_terms.iter().map(|&(v, a)| (v, -a)));
            self.le.push((terms, row.rhs_const));
        }
        FarkasBlock {
            start,
            q: rows.len(),
            f,
        }
    }

    /// The rows evaluated at a known plant.
    fn point_rows(&mut self, rows: &[AffineRow<T>], theta: &[T]) {
        for row in rows {
            let (terms, rhs) = at_point(row, theta);
            self.le.push((terms, rhs));
        }
    }

    /// `(Cv + D Y 1 + F1)_r - γ <= -η` and `CX + DY >= 0`.
    fn output_rows(&mut self, ext: &ExtendedPlant<T>, gain: &GainVars<T>, gamma: usize, eta: T) {
        let (p, n) = ext.c.shape();
        let m = ext.d.cols();
        let f1 = ext.f.row_sums();
        for r in 0..p {
            let mut t: Terms<T> = (0..n).map(|j| (gain.v[j], ext.c.get(r, j))).collect();
            for j in 0..m {
                for k in 0..n {
                    if let Some((var, c)) = gain.y[j][k] {
                        t.push((var, ext.d.get(r, j) * c));
                    }
                }
            }
            t.push((gamma, -T::one()));
            self.le.push((t, -eta - f1[r]));
        }
        for k in 0..n {
            for r in 0..p {
                let mut t: Terms<T> = vec![(gain.v[k], -ext.c.get(r, k))];
                for j in 0..m {
                    if let Some((var, c)) = gain.y[j][k] {
                        t.push((var, -ext.d.get(r, j) * c));
                    }
                }
                t.retain(|&(_, a)| a != T::zero());
                if !t.is_empty() {
                    self.le.push((t, T::zero()));
                }
            }
        }
    }
}

fn vec_of<T: Scalar>(mats: &[&Matrix<T>]) -> Vec<T> {
    let mut out = Vec::new();
    for m in mats {
        for j in 0..m.cols() {
            for i in 0..m.rows() {
                out.push(m.get(i, j));
            }
        }
    }
    out
}

enum Solved<T: Scalar> {
    Point(Vec<T>),
    Failed(ControllerResult<T>),
}

fn run<T: Scalar>(
    b: &Builder<T>,
    opts: &SynthesisOptions,
    optimize: bool,
    diag: &mut Diagnostics,
) -> Result<Solved<T>, SynthesisError> {
    let p = b.problem();
    diag.n_variables = p.n_vars;
    diag.n_equalities = p.n_eq();
    diag.n_inequalities = p.n_ineq();
    // Problems without an objective stop after phase one.
    let outcome = if optimize {
        lp::solve_with(&p, &opts.solver)
    } else {
        feasibility(&p, &opts.solver)
    };
    let sol = match outcome {
        Ok(s) => s,
        Err(e @ (LpError::Numerical(_) | LpError::IterationLimit { .. })) => {
            diag.message = Some(e.to_string());
            return Ok(Solved::Failed(ControllerResult::failed(
                SynthesisStatus::NumericalFailure,
                diag.clone(),
            )));
        }
        Err(e) => return Err(e.into()),
    };
    diag.lp_iterations = sol.iterations;
    diag.phase1_residual = sol.phase1_residual.to_f64_lossy();
    match sol.status {
        LpStatus::Optimal => Ok(Solved::Point(sol.x.expect("optimal point").into_vec())),
        LpStatus::Infeasible => Ok(Solved::Failed(ControllerResult::failed(
            SynthesisStatus::Infeasible,
            diag.clone(),
        ))),
        LpStatus::Unbounded => {
            diag.message = Some("objective unbounded".into());
            Ok(Solved::Failed(ControllerResult::failed(
                SynthesisStatus::NumericalFailure,
                diag.clone(),
            )))
        }
    }
}

fn feasibility<T: Scalar>(p: &LpProblem<T>, opts: &SolverOptions) -> Result<lp::LpSolution<T>, LpError> {
    if *opts == SolverOptions::default() {
        lp::solve_feasibility(p)
    } else {
        lp::solve_with(p, opts)
    }
}

fn gain_from<T: Scalar>(gain: &GainVars<T>, xi: &[T]) -> (Matrix<T>, Matrix<T>) {
    let y = gain.y_matrix(xi);
    let k = Matrix::from_fn(y.rows(), y.cols(), |j, c| {
        if gain.y[j][c].is_none() {
            T::zero()
        } else {
            y.get(j, c) / xi[gain.v[c]]
        }
    });
    (k, y)
}

fn z_from<T: Scalar>(blk: &FarkasBlock, xi: &[T]) -> Matrix<T> {
    Matrix::from_fn(blk.q, blk.f, |r, i| xi[blk.start + r * blk.f + i])
}

fn farkas_residual<T: Scalar>(p1: &Polytope<T>, rows: &[AffineRow<T>], z: &Matrix<T>, xi: &[T]) -> f64 {
    let (g2, h2) = evaluate_rows(rows, xi, p1.dim());
    let zg = z.matmul(p1.g()).expect("shapes agree");
    let zh = z.mul_vec(p1.h()).expect("shapes agree");
    let eq = zg.sub(&g2).expect("shapes agree").max_abs();
    let ineq = zh.iter().zip(h2.iter()).fold(T::zero(), |a, (&l, &r)| a.max(l - r));
    eq.max(ineq).to_f64_lossy()
}

fn prepared<T: Scalar>(cs: &ConsistencySet<T>, opts: &SynthesisOptions) -> Result<ConsistencySet<T>, SynthesisError> {
    if opts.reduce_faces && cs.polytope.n_faces() > 4 * cs.dim() {
        Ok(cs.reduced().map_err(|e| match e {
            ConsistencyError::Polytope(p) => SynthesisError::from(p),
            e => e.into(),
        })?)
    } else {
        Ok(cs.clone())
    }
}

struct Block<'a, T: Scalar> {
    p1: &'a Polytope<T>,
    rows: Vec<AffineRow<T>>,
    farkas: FarkasBlock,
}

/// Shared tail of every data-driven synthesis: solve, read back, verify.
fn finish<T: Scalar>(
    b: Builder<T>,
    blocks: Vec<Block<'_, T>>,
    gains: Vec<GainVars<T>>,
    v: &[usize],
    gamma: Option<usize>,
    cs: &ConsistencySet<T>,
    omega: Option<&[Vec<T>]>,
    opts: &SynthesisOptions,
) -> Result<ControllerResult<T>, SynthesisError> {
    let mut diag = Diagnostics {
        faces: blocks.iter().map(|b| b.farkas.f).collect(),
        ..Default::default()
    };
    let xi = match run(&b, opts, gamma.is_some(), &mut diag)? {
        Solved::Point(x) => x,
        Solved::Failed(r) => return Ok(r),
    };
    let mut z = Vec::with_capacity(blocks.len());
    let mut residual = 0.0_f64;
    for blk in &blocks {
        let zm = z_from(&blk.farkas, &xi);
        residual = residual.max(farkas_residual(blk.p1, &blk.rows, &zm, &xi));
        z.push(zm);
    }
    diag.farkas_residual = residual;
    let (ks, ys): (Vec<_>, Vec<_>) = gains.iter().map(|g| gain_from(g, &xi)).unzip();
    let vv = Vector::from_vec_unchecked(v.iter().map(|&j| xi[j]).collect());
    let mut result = ControllerResult {
        status: SynthesisStatus::Feasible,
        v: Some(vv),
        gains: ks,
        y: ys,
        z,
        gamma: gamma.map(|g| xi[g]),
        diagnostics: diag,
        verification: None,
    };
    if opts.verification_samples > 0 || cs.dim() <= crate::polytope::MAX_ENUMERATION_DIM {
        let report = verify_on_set(cs, &result, omega, opts)?;
        if !report.passed {
            result.status = SynthesisStatus::NumericalFailure;
            result.diagnostics.message = Some(format!(
                "certificate failed verification (max violation {:.3e})",
                report.max_violation
            ));
        }
        result.verification = Some(report);
    }
    Ok(result)
}

/// Robust stabilization of every plant in a single-plant consistency set.
pub fn synthesize_stabilizing<T: Scalar>(
    cs: &ConsistencySet<T>,
    opts: &SynthesisOptions,
) -> Result<ControllerResult<T>, SynthesisError> {
    robust_single(cs, None, opts)
}

/// Minimize the peak-to-peak gain bound `γ` over every plant in the set.
pub fn synthesize_p2p<T: Scalar>(
    cs: &ConsistencySet<T>,
    ext: &ExtendedPlant<T>,
    opts: &SynthesisOptions,
) -> Result<ControllerResult<T>, SynthesisError> {
    robust_single(cs, Some(ext), opts)
}

fn robust_single<T: Scalar>(
    cs: &ConsistencySet<T>,
    ext: Option<&ExtendedPlant<T>>,
    opts: &SynthesisOptions,
) -> Result<ControllerResult<T>, SynthesisError> {
    opts.validate()?;
    if cs.variant != Variant::Single {
        return Err(SynthesisError::Precondition(
            "expected a single-plant consistency set".into(),
        ));
    }
    if let Some(e) = ext {
        e.validate(cs.n, cs.m)?;
    }
    let cs = prepared(cs, opts)?;
    let eta = T::lit(opts.eta);
    let mut b = Builder::default();
    let v = b.new_v(cs.n, opts);
    let gain = b.new_gain(&v, cs.m, opts.sign_pattern.as_ref())?;
    let e1 = ext.map(|e| e.e.row_sums());
    let rows = stabilization_rows(cs.n, cs.time_kind, eta, &[T::one()], &gain, e1.as_deref());
    let farkas = b.farkas(&cs.polytope, &rows);
    let gamma = ext.map(|e| {
        let g = b.var(T::zero(), T::infinity());
        b.output_rows(e, &gain, g, eta);
        b.obj.push((g, T::one()));
        g
    });
    let blocks = vec![Block {
        p1: &cs.polytope,
        rows,
        farkas,
    }];
    finish(b, blocks, vec![gain], &v, gamma, &cs, None, opts)
}

/// Stabilizing gain for a known plant.
pub fn nominal_stabilize<T: Scalar>(
    a: &Matrix<T>,
    b: &Matrix<T>,
    kind: TimeKind,
    opts: &SynthesisOptions,
) -> Result<ControllerResult<T>, SynthesisError> {
    nominal(a, b, None, kind, opts, None)
}

/// Minimal peak-to-peak gain bound for a known plant, over free gains or
/// for a fixed gain `k_fixed` (`Y = K X`).
pub fn nominal_p2p<T: Scalar>(
    a: &Matrix<T>,
    b: &Matrix<T>,
    ext: &ExtendedPlant<T>,
    kind: TimeKind,
    opts: &SynthesisOptions,
    k_fixed: Option<&Matrix<T>>,
) -> Result<ControllerResult<T>, SynthesisError> {
    nominal(a, b, Some(ext), kind, opts, k_fixed)
}

fn nominal<T: Scalar>(
    a: &Matrix<T>,
    bm: &Matrix<T>,
    ext: Option<&ExtendedPlant<T>>,
    kind: TimeKind,
    opts: &SynthesisOptions,
    k_fixed: Option<&Matrix<T>>,
) -> Result<ControllerResult<T>, SynthesisError> {
    opts.validate()?;
    let n = a.rows();
    if !a.is_square() || bm.rows() != n {
        return Err(SynthesisError::Dimension(format!(
            "A is {:?} and B is {:?}",
            a.shape(),
            bm.shape()
        )));
    }
    let m = bm.cols();
    if let Some(e) = ext {
        e.validate(n, m)?;
    }
    let eta = T::lit(opts.eta);
    let mut b = Builder::default();
    let v = b.new_v(n, opts);
    let gain = match k_fixed {
        Some(k) => {
            if k.shape() != (m, n) {
                return Err(SynthesisError::Dimension(format!(
                    "K is {:?}, expected {m}x{n}",
                    k.shape()
                )));
            }
            GainVars {
                v: v.clone(),
                y: (0..m)
                    .map(|j| (0..n).map(|c| Some((v[c], k.get(j, c)))).collect())
                    .collect(),
            }
        }
        None => b.new_gain(&v, m, opts.sign_pattern.as_ref())?,
    };
    let e1 = ext.map(|e| e.e.row_sums());
    let rows = stabilization_rows(n, kind, eta, &[T::one()], &gain, e1.as_deref());
    b.point_rows(&rows, &vec_of(&[a, bm]));
    let gamma = ext.map(|e| {
        let g = b.var(T::zero(), T::infinity());
        b.output_rows(e, &gain, g, eta);
        b.obj.push((g, T::one()));
        g
    });
    let mut diag = Diagnostics::default();
    let xi = match run(&b, opts, gamma.is_some(), &mut diag)? {
        Solved::Point(x) => x,
        Solved::Failed(r) => return Ok(r),
    };
    let (k, y) = gain_from(&gain, &xi);
    let vv = Vector::from_vec_unchecked(v.iter().map(|&j| xi[j]).collect());
    let k = k_fixed.cloned().unwrap_or(k);
    let verification = verify_controller(&[(a.clone(), bm.clone())], &vv, &k, kind, opts.eta);
    Ok(ControllerResult {
        status: SynthesisStatus::Feasible,
        v: Some(vv),
        gains: vec![k],
        y: vec![y],
        z: Vec::new(),
        gamma: gamma.map(|g| xi[g]),
        diagnostics: diag,
        verification: Some(verification),
    })
}

fn switched_parts<T: Scalar>(cs: &ConsistencySet<T>) -> Result<Vec<usize>, SynthesisError> {
    match &cs.variant {
        Variant::Switched { input_counts, .. } => Ok(input_counts.clone()),
        _ => Err(SynthesisError::Precondition(
            "expected a switched consistency set".into(),
        )),
    }
}

/// One gain `u = Kx` stabilizing every mode of a switched plant, with a
/// common copositive Lyapunov function.
pub fn synthesize_switched_common<T: Scalar>(
    cs: &ConsistencySet<T>,
    opts: &SynthesisOptions,
) -> Result<ControllerResult<T>, SynthesisError> {
    opts.validate()?;
    let inputs = switched_parts(cs)?;
    if inputs.iter().any(|&ms| ms != inputs[0]) {
        return Err(SynthesisError::Precondition(format!(
            "a common gain requires equal input counts across modes, got {inputs:?}"
        )));
    }
    let cs = prepared(cs, opts)?;
    let eta = T::lit(opts.eta);
    let mut b = Builder::default();
    let v = b.new_v(cs.n, opts);
    let gain = b.new_gain(&v, inputs[0], opts.sign_pattern.as_ref())?;
    let mut blocks = Vec::new();
    for part in &cs.parts {
        let rows = stabilization_rows(cs.n, cs.time_kind, eta, &[T::one()], &gain, None);
        let farkas = b.farkas(part, &rows);
        blocks.push(Block { p1: part, rows, farkas });
    }
    finish(b, blocks, vec![gain], &v, None, &cs, None, opts)
}

/// Mode-dependent gains `u = K_s x` sharing one copositive Lyapunov function.
pub fn synthesize_switched_per_mode<T: Scalar>(
    cs: &ConsistencySet<T>,
    opts: &SynthesisOptions,
) -> Result<ControllerResult<T>, SynthesisError> {
    opts.validate()?;
    let inputs = switched_parts(cs)?;
    let cs = prepared(cs, opts)?;
    let eta = T::lit(opts.eta);
    let mut b = Builder::default();
    let v = b.new_v(cs.n, opts);
    let mut gains = Vec::new();
    let mut blocks = Vec::new();
    for (part, &ms) in cs.parts.iter().zip(&inputs) {
        let pattern = opts.sign_pattern.as_ref().filter(|p| p.shape() == (ms, cs.n));
        let gain = b.new_gain(&v, ms, pattern)?;
        let rows = stabilization_rows(cs.n, cs.time_kind, eta, &[T::one()], &gain, None);
        let farkas = b.farkas(part, &rows);
        blocks.push(Block { p1: part, rows, farkas });
        gains.push(gain);
    }
    finish(b, blocks, gains, &v, None, &cs, None, opts)
}

/// Gain-scheduled control of `δx = (Σ θ_ℓ A_ℓ)x + Bu`: one gain per vertex
/// `ω_c` of the parameter polytope, sharing `v`.
pub fn synthesize_lpva<T: Scalar>(
    cs: &ConsistencySet<T>,
    omega: &[Vec<T>],
    opts: &SynthesisOptions,
) -> Result<ControllerResult<T>, SynthesisError> {
    opts.validate()?;
    let Variant::Lpva { l } = cs.variant else {
        return Err(SynthesisError::Precondition(
            "expected a parameter-affine consistency set".into(),
        ));
    };
    if omega.is_empty() {
        return Err(SynthesisError::Precondition(
            "at least one scheduling vertex is required".into(),
        ));
    }
    if let Some(w) = omega.iter().find(|w| w.len() != l) {
        return Err(SynthesisError::Dimension(format!(
            "vertex has {} entries, expected {l}",
            w.len()
        )));
    }
    let cs = prepared(cs, opts)?;
    let eta = T::lit(opts.eta);
    let mut b = Builder::default();
    let v = b.new_v(cs.n, opts);
    let mut gains = Vec::new();
    let mut blocks = Vec::new();
    for w in omega {
        let gain = b.new_gain(&v, cs.m, opts.sign_pattern.as_ref())?;
        let rows = stabilization_rows(cs.n, cs.time_kind, eta, w, &gain, None);
        let farkas = b.farkas(&cs.polytope, &rows);
        blocks.push(Block {
            p1: &cs.polytope,
            rows,
            farkas,
        });
        gains.push(gain);
    }
    finish(b, blocks, gains, &v, None, &cs, Some(omega), opts)
}

/// `K(θ) = Σ β_c K_c` for convex weights `β` with `Σ β_c ω_c = θ`.
pub fn gain_schedule<T: Scalar>(
    theta: &[T],
    omega: &[Vec<T>],
    gains: &[Matrix<T>],
) -> Result<Matrix<T>, SynthesisError> {
    if omega.is_empty() || omega.len() != gains.len() {
        return Err(SynthesisError::Dimension(format!(
            "{} vertices for {} gains",
            omega.len(),
            gains.len()
        )));
    }
    let l = theta.len();
    if omega.iter().any(|w| w.len() != l) {
        return Err(SynthesisError::Dimension("vertex and parameter lengths differ".into()));
    }
    let nc = omega.len();
    let mut p = LpProblem::new(nc);
    p.add_eq(&vec![T::one(); nc], T::one());
    for ell in 0..l {
        let row: Vec<T> = omega.iter().map(|w| w[ell]).collect();
        p.add_eq(&row, theta[ell]);
    }
    let sol = lp::solve_feasibility(&p)?;
    if sol.status != LpStatus::Optimal {
        return Err(SynthesisError::OutsideHull);
    }
    let beta = sol.x.expect("feasible point");
    let (m, n) = gains[0].shape();
    let mut k = Matrix::zeros(m, n);
    for (c, g) in gains.iter().enumerate() {
        if beta[c] != T::zero() {
            k = k.add(&g.scale(beta[c].max(T::zero())))?;
        }
    }
    Ok(k)
}

#[cfg(test)]
mod tests;
