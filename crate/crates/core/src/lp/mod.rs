//! Dense linear programs and a two-phase revised simplex solver.
//!
//! Problems are stated as
//!
//! ```text
//! minimize    cᵀx
//! subject to  A_eq x  = b_eq
//!             A_in x <= b_in
//!             l <= x <= u        (l may be -inf, u may be +inf)
//! ```
//!
//! and solved by [`solve`] (two phases) or [`solve_feasibility`] (phase one only).

mod simplex;
mod sparse_lu;

use crate::linalg::{Matrix, Vector};
use crate::scalar::Scalar;

pub use simplex::{solve, solve_feasibility, solve_with};

/// Pivot magnitude below which a column entry is not eligible in the ratio test.
pub const PIVOT_TOL: f64 = 1e-9;
/// Absolute primal feasibility tolerance.
pub const FEAS_TOL: f64 = 1e-7;
/// Reduced-cost optimality tolerance.
pub const OPT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("variable {var} has lower bound above upper bound")]
    InvalidBounds { var: usize },
    #[error("non-finite coefficient in {0}")]
    NonFinite(&'static str),
    #[error("iteration limit of {limit} reached")]
    IterationLimit { limit: usize },
    #[error("numerical failure: {0}")]
    Numerical(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpProblem<T: Scalar> {
    pub n_vars: usize,
    /// Minimized; all zero for feasibility problems.
    pub objective: Vec<T>,
    pub eq_lhs: Matrix<T>,
    pub eq_rhs: Vec<T>,
    /// Rows encode `aᵀx <= β`.
    pub ineq_lhs: Matrix<T>,
    pub ineq_rhs: Vec<T>,
    pub lower_bounds: Vec<T>,
    pub upper_bounds: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct LpSolution<T: Scalar> {
    pub status: LpStatus,
    /// Present unless infeasible. For unbounded problems this is the last basic feasible point.
    pub x: Option<Vector<T>>,
    /// Present when optimal.
    pub objective_value: Option<T>,
    pub iterations: usize,
    /// Sum of artificial variables at the end of phase one.
    pub phase1_residual: T,
    /// Multipliers `μ` of the equality rows (present when optimal).
    pub eq_duals: Option<Vec<T>>,
    /// Multipliers `λ >= 0` of the inequality rows (present when optimal).
    pub ineq_duals: Option<Vec<T>>,
}

impl<T: Scalar> LpSolution<T> {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub pivot_tol: f64,
    pub feas_tol: f64,
    pub opt_tol: f64,
    /// Use Bland's rule from the first iteration.
    pub bland: bool,
    /// Overrides the default cap `max(20000, 50·(rows+cols))`.
    pub max_iterations: Option<usize>,
    /// Refactor the basis after this many rank-one updates.
    pub refactor_every: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            pivot_tol: PIVOT_TOL,
            feas_tol: FEAS_TOL,
            opt_tol: OPT_TOL,
            bland: false,
            max_iterations: None,
            refactor_every: 64,
        }
    }
}

impl<T: Scalar> LpProblem<T> {
    /// Empty problem over `n_vars` variables with bounds `[0, +inf)` and zero objective.
    pub fn new(n_vars: usize) -> Self {
        Self {
            n_vars,
            objective: vec![T::zero(); n_vars],
            eq_lhs: Matrix::zeros(0, n_vars),
            eq_rhs: Vec::new(),
            ineq_lhs: Matrix::zeros(0, n_vars),
            ineq_rhs: Vec::new(),
            lower_bounds: vec![T::zero(); n_vars],
            upper_bounds: vec![T::infinity(); n_vars],
        }
    }

    pub fn set_objective(&mut self, c: &[T]) -> &mut Self {
        assert_eq!(c.len(), self.n_vars, "objective length");
        self.objective = c.to_vec();
        self
    }

    pub fn set_bounds(&mut self, var: usize, lo: T, hi: T) -> &mut Self {
        self.lower_bounds[var] = lo;
        self.upper_bounds[var] = hi;
        self
    }

    pub fn set_free(&mut self, var: usize) -> &mut Self {
        self.set_bounds(var, T::neg_infinity(), T::infinity())
    }

    pub fn add_eq(&mut self, row: &[T], rhs: T) -> &mut Self {
        assert_eq!(row.len(), self.n_vars, "row length");
        self.eq_lhs.push_row(row);
        self.eq_rhs.push(rhs);
        self
    }

    pub fn add_le(&mut self, row: &[T], rhs: T) -> &mut Self {
        assert_eq!(row.len(), self.n_vars, "row length");
        self.ineq_lhs.push_row(row);
        self.ineq_rhs.push(rhs);
        self
    }

    pub fn add_ge(&mut self, row: &[T], rhs: T) -> &mut Self {
        let neg: Vec<T> = row.iter().map(|&a| -a).collect();
        self.add_le(&neg, -rhs)
    }

    /// Sparse variants: `terms` are `(variable, coefficient)` pairs; repeated
    /// variables accumulate.
    pub fn add_eq_sparse(&mut self, terms: &[(usize, T)], rhs: T) -> &mut Self {
        let row = self.densify(terms);
        self.add_eq(&row, rhs)
    }

    pub fn add_le_sparse(&mut self, terms: &[(usize, T)], rhs: T) -> &mut Self {
        let row = self.densify(terms);
        self.add_le(&row, rhs)
    }

    pub fn add_ge_sparse(&mut self, terms: &[(usize, T)], rhs: T) -> &mut Self {
        let row = self.densify(terms);
        self.add_ge(&row, rhs)
    }

    fn densify(&self, terms: &[(usize, T)]) -> Vec<T> {
        let mut row = vec![T::zero(); self.n_vars];
        for &(j, a) in terms {
            row[j] += a;
        }
        row
    }

    pub fn n_eq(&self) -> usize {
        self.eq_rhs.len()
    }

    pub fn n_ineq(&self) -> usize {
        self.ineq_rhs.len()
    }

    /// Check the shape and bound invariants.
    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.n_vars;
        if self.objective.len() != n {
            return Err(LpError::Dimension(format!(
                "objective has {} entries, expected {n}",
                self.objective.len()
            )));
        }
        if self.eq_lhs.cols() != n && self.eq_lhs.rows() > 0 {
            return Err(LpError::Dimension(format!(
                "eq_lhs has {} columns, expected {n}",
                self.eq_lhs.cols()
            )));
        }
        if self.ineq_lhs.cols() != n && self.ineq_lhs.rows() > 0 {
            return Err(LpError::Dimension(format!(
                "ineq_lhs has {} columns, expected {n}",
                self.ineq_lhs.cols()
            )));
        }
        if self.eq_lhs.rows() != self.eq_rhs.len() {
            return Err(LpError::Dimension("eq_rhs length differs from eq_lhs rows".into()));
        }
        if self.ineq_lhs.rows() != self.ineq_rhs.len() {
            return Err(LpError::Dimension("ineq_rhs length differs from ineq_lhs rows".into()));
        }
        if self.lower_bounds.len() != n || self.upper_bounds.len() != n {
            return Err(LpError::Dimension("bound vectors must have n_vars entries".into()));
        }
        if self.objective.iter().any(|x| !x.is_finite()) {
            return Err(LpError::NonFinite("objective"));
        }
        if self.eq_rhs.iter().chain(&self.ineq_rhs).any(|x| !x.is_finite()) {
            return Err(LpError::NonFinite("right-hand side"));
        }
        for (var, (&lo, &hi)) in self.lower_bounds.iter().zip(&self.upper_bounds).enumerate() {
            if lo.is_nan() || hi.is_nan() || lo > hi || lo == T::infinity() || hi == T::neg_infinity() {
                return Err(LpError::InvalidBounds { var });
            }
        }
        Ok(())
    }

    /// Largest violation of any constraint or bound at `x`.
    pub fn max_violation(&self, x: &[T]) -> T {
        let mut worst = T::zero();
        for i in 0..self.n_eq() {
            let r = crate::linalg::dot(self.eq_lhs.row(i), x) - self.eq_rhs[i];
            worst = worst.max(r.abs());
        }
        for i in 0..self.n_ineq() {
            let r = crate::linalg::dot(self.ineq_lhs.row(i), x) - self.ineq_rhs[i];
            worst = worst.max(r);
        }
        for (j, &xj) in x.iter().enumerate() {
            worst = worst.max(self.lower_bounds[j] - xj).max(xj - self.upper_bounds[j]);
        }
        worst
    }

    pub fn objective_at(&self, x: &[T]) -> T {
        crate::linalg::dot(&self.objective, x)
    }
}
