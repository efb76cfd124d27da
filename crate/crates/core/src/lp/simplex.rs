//! Two-phase revised simplex over a bounded standard form.
//!
//! Every original variable is mapped onto nonnegative standard columns
//! (shifted, reflected, split into a difference, or eliminated when fixed);
//! finite upper bounds on shifted variables become extra rows. The basis is
//! held as a sparse LU factorization plus a product-form eta file that is
//! folded back into a fresh factorization every `refactor_every` pivots.

use super::sparse_lu::SparseLu;
use super::{LpError, LpProblem, LpSolution, LpStatus, SolverOptions};
use crate::linalg::Vector;
use crate::scalar::Scalar;

const NONBASIC: usize = usize::MAX;

#[derive(Debug, Clone, Copy)]
enum VarMap<T> {
    /// `x = lo + s`
    Shift {
        col: usize,
        lo: T,
    },
    /// `x = hi - s`
    Reflect {
        col: usize,
        hi: T,
    },
    /// `x = s⁺ - s⁻`
    Split {
        pos: usize,
        neg: usize,
    },
    Fixed(T),
}

struct StdForm<T> {
    m: usize,
    n_cols: usize,
    art_start: usize,
    col_start: Vec<usize>,
    row_idx: Vec<usize>,
    vals: Vec<T>,
    cost: Vec<T>,
    b: Vec<T>,
    sigma: Vec<T>,
    initial_basis: Vec<usize>,
    maps: Vec<VarMap<T>>,
}

impl<T: Scalar> StdForm<T> {
    fn build(p: &LpProblem<T>) -> Self {
        let mut cols: Vec<Vec<(usize, T)>> = Vec::new();
        let mut cost: Vec<T> = Vec::new();
        let mut maps = Vec::with_capacity(p.n_vars);
        let mut upper_rows: Vec<(usize, T)> = Vec::new();

        let mut new_col = |c: T, cols: &mut Vec<Vec<(usize, T)>>| {
            cols.push(Vec::new());
            cost.push(c);
            cols.len() - 1
        };

        for j in 0..p.n_vars {
            let (lo, hi, c) = (p.lower_bounds[j], p.upper_bounds[j], p.objective[j]);
            let map = if lo == hi {
                VarMap::Fixed(lo)
            } else if lo.is_finite() {
                let col = new_col(c, &mut cols);
                if hi.is_finite() {
                    upper_rows.push((col, hi - lo));
                }
                VarMap::Shift { col, lo }
            } else if hi.is_finite() {
                VarMap::Reflect {
                    col: new_col(-c, &mut cols),
                    hi,
                }
            } else {
                let pos = new_col(c, &mut cols);
                let neg = new_col(-c, &mut cols);
                VarMap::Split { pos, neg }
            };
            maps.push(map);
        }

        let n_eq = p.n_eq();
        let n_in = p.n_ineq();
        let m = n_eq + n_in + upper_rows.len();
        let mut b = Vec::with_capacity(m);
        let mut slack_of_row = vec![None; m];

        let place_row = |r: usize, coeffs: &[T], rhs: T, cols: &mut Vec<Vec<(usize, T)>>| {
            let mut rhs = rhs;
            for (j, &a) in coeffs.iter().enumerate() {
                if a == T::zero() {
                    continue;
                }
                match maps[j] {
                    VarMap::Shift { col, lo } => {
                        rhs -= a * lo;
                        cols[col].push((r, a));
                    }
                    VarMap::Reflect { col, hi } => {
                        rhs -= a * hi;
                        cols[col].push((r, -a));
                    }
                    VarMap::Split { pos, neg } => {
                        cols[pos].push((r, a));
                        cols[neg].push((r, -a));
                    }
                    VarMap::Fixed(v) => rhs -= a * v,
                }
            }
            rhs
        };

        for k in 0..n_eq {
            b.push(place_row(k, p.eq_lhs.row(k), p.eq_rhs[k], &mut cols));
        }
        for k in 0..n_in {
            let r = n_eq + k;
            b.push(place_row(r, p.ineq_lhs.row(k), p.ineq_rhs[k], &mut cols));
            cols.push(vec![(r, T::one())]);
            cost.push(T::zero());
            slack_of_row[r] = Some(cols.len() - 1);
        }
        for (k, &(col, width)) in upper_rows.iter().enumerate() {
            let r = n_eq + n_in + k;
            cols[col].push((r, T::one()));
            b.push(width);
            cols.push(vec![(r, T::one())]);
            cost.push(T::zero());
            slack_of_row[r] = Some(cols.len() - 1);
        }

        let mut sigma = vec![T::one(); m];
        for (r, s) in sigma.iter_mut().enumerate() {
            if b[r] < T::zero() {
                *s = -T::one();
                b[r] = -b[r];
            }
        }
        for col in cols.iter_mut() {
            for (r, a) in col.iter_mut() {
                *a *= sigma[*r];
            }
        }

        let art_start = cols.len();
        let mut initial_basis = Vec::with_capacity(m);
        for r in 0..m {
            match slack_of_row[r] {
                Some(s) if sigma[r] > T::zero() => initial_basis.push(s),
                _ => {
                    cols.push(vec![(r, T::one())]);
                    cost.push(T::zero());
                    initial_basis.push(cols.len() - 1);
                }
            }
        }

        let n_cols = cols.len();
        let mut col_start = Vec::with_capacity(n_cols + 1);
        let mut row_idx = Vec::new();
        let mut vals = Vec::new();
        col_start.push(0);
        for col in &cols {
            for &(r, a) in col {
                row_idx.push(r);
                vals.push(a);
            }
            col_start.push(row_idx.len());
        }

        Self {
            m,
            n_cols,
            art_start,
            col_start,
            row_idx,
            vals,
            cost,
            b,
            sigma,
            initial_basis,
            maps,
        }
    }

    #[inline]
    fn col(&self, j: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let (s, e) = (self.col_start[j], self.col_start[j + 1]);
        self.row_idx[s..e].iter().copied().zip(self.vals[s..e].iter().copied())
    }

    #[inline]
    fn col_dot(&self, j: usize, y: &[T]) -> T {
        self.col(j).fold(T::zero(), |acc, (r, a)| acc + a * y[r])
    }

    fn recover(&self, xs: &[T]) -> Vec<T> {
        self.maps
            .iter()
            .map(|m| match *m {
                VarMap::Shift { col, lo } => lo + xs[col],
                VarMap::Reflect { col, hi } => hi - xs[col],
                VarMap::Split { pos, neg } => xs[pos] - xs[neg],
                VarMap::Fixed(v) => v,
            })
            .collect()
    }
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

struct Engine<'a, T> {
    sf: &'a StdForm<T>,
    pivot_tol: T,
    opt_tol: T,
    bland_default: bool,
    refactor_every: usize,
    limit: usize,
    basis: Vec<usize>,
    pos_of: Vec<usize>,
    lu: Option<SparseLu<T>>,
    /// Pivot row, pivot entry, and the other nonzeros of each update.
    etas: Vec<(usize, T, Vec<(usize, T)>)>,
    xb: Vec<T>,
    iterations: usize,
}

impl<'a, T: Scalar> Engine<'a, T> {
    fn new(sf: &'a StdForm<T>, opts: &SolverOptions) -> Result<Self, LpError> {
        let mut pos_of = vec![NONBASIC; sf.n_cols];
        for (i, &j) in sf.initial_basis.iter().enumerate() {
            pos_of[j] = i;
        }
        let limit = opts
            .max_iterations
            .unwrap_or_else(|| 20_000usize.max(50 * (sf.m + sf.n_cols)));
        let mut e = Self {
            sf,
            pivot_tol: T::tol(opts.pivot_tol),
            opt_tol: T::tol(opts.opt_tol),
            bland_default: opts.bland,
            refactor_every: opts.refactor_every.max(1),
            limit,
            basis: sf.initial_basis.clone(),
            pos_of,
            lu: None,
            etas: Vec::new(),
            xb: Vec::new(),
            iterations: 0,
        };
        e.refactor()?;
        Ok(e)
    }

    fn refactor(&mut self) -> Result<(), LpError> {
        let m = self.sf.m;
        let cols: Vec<Vec<(usize, T)>> = self.basis.iter().map(|&j| self.sf.col(j).collect()).collect();
        let lu = SparseLu::factor(m, &cols).map_err(|_| LpError::Numerical("basis matrix became singular".into()))?;
        self.etas.clear();
        let mut xb = self.sf.b.clone();
        lu.solve(&mut xb);
        self.lu = Some(lu);
        self.xb = xb;
        Ok(())
    }

    fn lu(&self) -> &SparseLu<T> {
        self.lu.as_ref().expect("factorized in Engine::new")
    }

    fn ftran(&self, j: usize) -> Vec<T> {
        let mut d = vec![T::zero(); self.sf.m];
        for (r, a) in self.sf.col(j) {
            d[r] = a;
        }
        self.lu().solve(&mut d);
        for (r, piv, rest) in &self.etas {
            let xr = d[*r] / *piv;
            if xr != T::zero() {
                for &(i, e) in rest {
                    d[i] -= e * xr;
                }
            }
            d[*r] = xr;
        }
        d
    }

    fn btran(&self, mut c: Vec<T>) -> Vec<T> {
        for (r, piv, rest) in self.etas.iter().rev() {
            let mut s = c[*r];
            for &(i, e) in rest {
                s -= c[i] * e;
            }
            c[*r] = s / *piv;
        }
        self.lu().solve_transpose(&mut c);
        c
    }

    fn duals(&self, cost: &[T]) -> Vec<T> {
        self.btran(self.basis.iter().map(|&j| cost[j]).collect())
    }

    fn pivot(&mut self, q: usize, r: usize, d: Vec<T>, theta: T) -> Result<(), LpError> {
        for (x, &di) in self.xb.iter_mut().zip(&d) {
            *x -= theta * di;
        }
        self.xb[r] = theta;
        let leaving = self.basis[r];
        self.pos_of[leaving] = NONBASIC;
        self.pos_of[q] = r;
        self.basis[r] = q;
        let rest: Vec<(usize, T)> = d
            .iter()
            .enumerate()
            .filter(|&(i, &di)| i != r && di != T::zero())
            .map(|(i, &di)| (i, di))
            .collect();
        self.etas.push((r, d[r], rest));
        self.iterations += 1;
        if self.etas.len() >= self.refactor_every {
            self.refactor()?;
        }
        Ok(())
    }

    /// Minimize `cost` over the current basic feasible solution. Artificial
    /// columns never enter when `phase_two` is set, and basic artificials are
    /// pinned at zero by forcing them out as soon as they would move.
    fn run(&mut self, cost: &[T], phase_two: bool) -> Result<PhaseEnd, LpError> {
        let sf = self.sf;
        let entering_limit = if phase_two { sf.art_start } else { sf.n_cols };
        let mut bland = self.bland_default;
        let mut stall = 0usize;
        let stall_limit = 3 * sf.m.max(1);
        loop {
            if self.iterations >= self.limit {
                return Err(LpError::IterationLimit { limit: self.limit });
            }
            let y = self.duals(cost);
            let mut enter = None;
            let mut best = -self.opt_tol;
            for j in 0..entering_limit {
                if self.pos_of[j] != NONBASIC {
                    continue;
                }
                let dj = cost[j] - sf.col_dot(j, &y);
                if bland {
                    if dj < -self.opt_tol {
                        enter = Some((j, dj));
                        break;
                    }
                } else if dj < best {
                    best = dj;
                    enter = Some((j, dj));
                }
            }
            let Some((q, dq)) = enter else {
                return Ok(PhaseEnd::Optimal);
            };
            let d = self.ftran(q);

            let mut theta = T::infinity();
            for (i, &di) in d.iter().enumerate() {
                let pinned = phase_two && self.basis[i] >= sf.art_start;
                if pinned && di.abs() > self.pivot_tol {
                    theta = T::zero();
                } else if di > self.pivot_tol {
                    theta = theta.min(self.xb[i].max(T::zero()) / di);
                }
            }
            if !theta.is_finite() {
                return Ok(PhaseEnd::Unbounded);
            }
            let slack = T::lit(1e-12) * (T::one() + theta);
            let mut leave: Option<usize> = None;
            for (i, &di) in d.iter().enumerate() {
                let pinned = phase_two && self.basis[i] >= sf.art_start;
                let ratio = if pinned && di.abs() > self.pivot_tol {
                    T::zero()
                } else if di > self.pivot_tol {
                    self.xb[i].max(T::zero()) / di
                } else {
                    continue;
                };
                if ratio > theta + slack {
                    continue;
                }
                leave = match leave {
                    None => Some(i),
                    Some(l) => {
                        let better = if bland {
                            self.basis[i] < self.basis[l]
                        } else {
                            // Largest pivot among ties, then smallest index.
                            let (a, b) = (di.abs(), d[l].abs());
                            a > b || (a == b && self.basis[i] < self.basis[l])
                        };
                        if better {
                            Some(i)
                        } else {
                            Some(l)
                        }
                    }
                };
            }
            let r = leave.expect("ratio test found a minimizing row");
            let theta = if phase_two && self.basis[r] >= sf.art_start {
                T::zero()
            } else {
                self.xb[r].max(T::zero()) / d[r]
            };

            if theta * dq.abs() <= T::epsilon() {
                stall += 1;
                if stall > stall_limit {
                    bland = true;
                }
            } else {
                stall = 0;
            }
            self.pivot(q, r, d, theta)?;
        }
    }

    /// Pivot zero-valued artificials out of the basis where a structural
    /// column can replace them; rows where none can are redundant.
    fn drive_out_artificials(&mut self) -> Result<(), LpError> {
        let sf = self.sf;
        for r in 0..sf.m {
            if self.basis[r] < sf.art_start {
                continue;
            }
            let mut e = vec![T::zero(); sf.m];
            e[r] = T::one();
            let rho = self.btran(e);
            let mut best: Option<(usize, T)> = None;
            for j in 0..sf.art_start {
                if self.pos_of[j] != NONBASIC {
                    continue;
                }
                let alpha = sf.col_dot(j, &rho).abs();
                if alpha > self.pivot_tol && best.is_none_or(|(_, a)| alpha > a) {
                    best = Some((j, alpha));
                }
            }
            if let Some((q, _)) = best {
                let d = self.ftran(q);
                let theta = self.xb[r] / d[r];
                self.pivot(q, r, d, theta)?;
            }
        }
        Ok(())
    }

    fn artificial_sum(&self) -> T {
        self.basis
            .iter()
            .zip(&self.xb)
            .filter(|(&j, _)| j >= self.sf.art_start)
            .fold(T::zero(), |acc, (_, &x)| acc + x.abs())
    }

    fn std_point(&self) -> Vec<T> {
        let mut xs = vec![T::zero(); self.sf.n_cols];
        for (&j, &x) in self.basis.iter().zip(&self.xb) {
            xs[j] = x.max(T::zero());
        }
        xs
    }
}

/// Solve with default options.
pub fn solve<T: Scalar>(p: &LpProblem<T>) -> Result<LpSolution<T>, LpError> {
    solve_with(p, &SolverOptions::default())
}

/// Find any feasible point; the objective is ignored.
pub fn solve_feasibility<T: Scalar>(p: &LpProblem<T>) -> Result<LpSolution<T>, LpError> {
    with_retry(p, &SolverOptions::default(), false)
}

/// Solve with explicit options. When phase one ends with a residual just above
/// the feasibility tolerance the problem is re-solved under Bland's rule
/// before being declared infeasible.
pub fn solve_with<T: Scalar>(p: &LpProblem<T>, opts: &SolverOptions) -> Result<LpSolution<T>, LpError> {
    with_retry(p, opts, true)
}

fn with_retry<T: Scalar>(p: &LpProblem<T>, opts: &SolverOptions, optimize: bool) -> Result<LpSolution<T>, LpError> {
    let sol = run_two_phase(p, opts, optimize)?;
    let tol = T::tol(opts.feas_tol);
    if sol.status == LpStatus::Infeasible && !opts.bland && sol.phase1_residual < tol * T::lit(100.0) {
        let retry = SolverOptions { bland: true, ..*opts };
        let mut again = run_two_phase(p, &retry, optimize)?;
        again.iterations += sol.iterations;
        return Ok(again);
    }
    Ok(sol)
}

fn run_two_phase<T: Scalar>(p: &LpProblem<T>, opts: &SolverOptions, optimize: bool) -> Result<LpSolution<T>, LpError> {
    p.validate()?;
    if p.eq_lhs
        .as_slice()
        .iter()
        .chain(p.ineq_lhs.as_slice())
        .any(|a| !a.is_finite())
    {
        return Err(LpError::NonFinite("constraint matrix"));
    }
    let sf = StdForm::build(p);
    let mut eng = Engine::new(&sf, opts)?;
    let feas_tol = T::tol(opts.feas_tol);

    let phase1_cost: Vec<T> = (0..sf.n_cols)
        .map(|j| if j >= sf.art_start { T::one() } else { T::zero() })
        .collect();
    if sf.art_start < sf.n_cols {
        eng.run(&phase1_cost, false)?;
        eng.refactor()?;
    }
    let residual = eng.artificial_sum();
    if residual > feas_tol {
        return Ok(LpSolution {
            status: LpStatus::Infeasible,
            x: None,
            objective_value: None,
            iterations: eng.iterations,
            phase1_residual: residual,
            eq_duals: None,
            ineq_duals: None,
        });
    }
    eng.drive_out_artificials()?;

    let mut status = LpStatus::Optimal;
    if optimize {
        if let PhaseEnd::Unbounded = eng.run(&sf.cost, true)? {
            status = LpStatus::Unbounded;
        }
    }
    eng.refactor()?;

    let x = sf.recover(&eng.std_point());
    let scale = p
        .eq_rhs
        .iter()
        .chain(&p.ineq_rhs)
        .fold(T::one(), |acc, &b| acc.max(b.abs()));
    let violation = p.max_violation(&x);
    if violation > feas_tol * scale * T::lit(10.0) {
        return Err(LpError::Numerical(format!(
            "recovered point violates constraints by {}",
            violation.to_f64_lossy()
        )));
    }

    let (objective_value, eq_duals, ineq_duals) = if status == LpStatus::Optimal && optimize {
        let y = eng.duals(&sf.cost);
        let n_eq = p.n_eq();
        let mu = (0..n_eq).map(|k| sf.sigma[k] * y[k]).collect();
        let lambda = (0..p.n_ineq())
            .map(|k| (-sf.sigma[n_eq + k] * y[n_eq + k]).max(T::zero()))
            .collect();
        (Some(p.objective_at(&x)), Some(mu), Some(lambda))
    } else if status == LpStatus::Optimal {
        (Some(p.objective_at(&x)), None, None)
    } else {
        (None, None, None)
    };

    Ok(LpSolution {
        status,
        x: Some(Vector::from_vec_unchecked(x)),
        objective_value,
        iterations: eng.iterations,
        phase1_residual: residual,
        eq_duals,
        ineq_duals,
    })
}
