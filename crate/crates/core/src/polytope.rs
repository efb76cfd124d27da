//! Polytopes in H-representation `{x : G x <= h}`.
//!
//! Support-function queries `max dᵀx` are solved through the LP dual
//! `min hᵀy  s.t.  Gᵀy = d, y >= 0`, which has `dim` rows instead of one row
//! per face; the primal maximizer is read back from the equality multipliers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{dot, LinalgError, Lu, Matrix, Vector};
use crate::lp::{self, LpError, LpProblem, LpStatus};
use crate::scalar::Scalar;

/// Tolerance on the support value when deciding whether a face is redundant.
pub const REDUNDANCY_TOL: f64 = 1e-8;
/// Distance (∞-norm) under which two vertices are merged.
pub const VERTEX_DEDUP_TOL: f64 = 1e-7;
pub const MAX_ENUMERATION_DIM: usize = 8;
pub const MAX_ENUMERATION_SUBSETS: u64 = 1_000_000;

const VERTEX_FEAS_TOL: f64 = 1e-8;
const SAMPLE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PolytopeError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("polytope is empty")]
    Empty,
    #[error("polytope is unbounded")]
    Unbounded,
    #[error("polytope has no interior (Chebyshev radius {radius:e})")]
    Degenerate { radius: f64 },
    #[error("vertex enumeration limited to dimension {MAX_ENUMERATION_DIM}, got {dim}")]
    DimensionGuard { dim: usize },
    #[error("vertex enumeration would visit {subsets} face subsets (limit {MAX_ENUMERATION_SUBSETS})")]
    TooManySubsets { subsets: u64 },
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Polytope<T: Scalar> {
    g: Matrix<T>,
    h: Vector<T>,
}

#[derive(Debug, Clone)]
pub struct ChebyshevBall<T: Scalar> {
    pub center: Vector<T>,
    pub radius: T,
}

#[derive(Debug, Clone)]
pub struct ContainmentCertificate<T: Scalar> {
    pub contained: bool,
    /// Nonnegative `faces₂ × faces₁` multiplier with `Z G₁ = G₂`, `Z h₁ <= h₂`.
    /// Absent only when `P₁` is empty and its face normals do not span the space.
    pub z: Option<Matrix<T>>,
    /// A point of `P₁` outside `P₂`.
    pub witness: Option<Vector<T>>,
}

/// Outcome of maximizing a linear function over a polytope.
#[derive(Debug, Clone)]
pub enum Support<T: Scalar> {
    /// Optimal value, a maximizer, and the face multipliers of the dual.
    Bounded {
        value: T,
        point: Vector<T>,
        multipliers: Vec<T>,
    },
    /// Unbounded above, or the polytope is empty (not distinguished here).
    NoDualSolution,
    /// The dual is unbounded, so the polytope is empty.
    Empty,
}

impl<T: Scalar> Polytope<T> {
    pub fn new(g: Matrix<T>, h: Vector<T>) -> Result<Self, PolytopeError> {
        if g.rows() != h.len() {
            return Err(PolytopeError::Dimension {
                expected: g.rows(),
                got: h.len(),
            });
        }
        Ok(Self { g, h })
    }

    /// Axis-aligned box `lo <= x <= hi`.
    pub fn from_box(lo: &[T], hi: &[T]) -> Result<Self, PolytopeError> {
        if lo.len() != hi.len() {
            return Err(PolytopeError::Dimension {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        let d = lo.len();
        let mut g = Matrix::zeros(2 * d, d);
        let mut h = Vec::with_capacity(2 * d);
        for j in 0..d {
            g.set(2 * j, j, T::one());
            h.push(hi[j]);
            g.set(2 * j + 1, j, -T::one());
            h.push(-lo[j]);
        }
        Self::new(g, Vector::new(h)?)
    }

    pub fn g(&self) -> &Matrix<T> {
        &self.g
    }

    pub fn h(&self) -> &Vector<T> {
        &self.h
    }

    pub fn dim(&self) -> usize {
        self.g.cols()
    }

    pub fn n_faces(&self) -> usize {
        self.g.rows()
    }

    /// Faces of both polytopes (set intersection).
    pub fn intersect(&self, other: &Self) -> Result<Self, PolytopeError> {
        if self.dim() != other.dim() {
            return Err(PolytopeError::Dimension {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        let g = self.g.vstack(&other.g)?;
        let mut h = self.h.to_vec();
        h.extend_from_slice(&other.h);
        Ok(Self {
            g,
            h: Vector::from_vec_unchecked(h),
        })
    }

    /// Cartesian product: block-diagonal faces on disjoint coordinates.
    pub fn product(parts: &[Self]) -> Self {
        let dim: usize = parts.iter().map(Self::dim).sum();
        let faces: usize = parts.iter().map(Self::n_faces).sum();
        let mut g = Matrix::zeros(faces, dim);
        let mut h = Vec::with_capacity(faces);
        let (mut r0, mut c0) = (0, 0);
        for p in parts {
            for i in 0..p.n_faces() {
                for j in 0..p.dim() {
                    g.set(r0 + i, c0 + j, p.g.get(i, j));
                }
                h.push(p.h[i]);
            }
            r0 += p.n_faces();
            c0 += p.dim();
        }
        Self {
            g,
            h: Vector::from_vec_unchecked(h),
        }
    }

    pub fn select_faces(&self, idx: &[usize]) -> Self {
        Self {
            g: self.g.select_rows(idx),
            h: Vector::from_vec_unchecked(idx.iter().map(|&i| self.h[i]).collect()),
        }
    }

    /// Largest value of `G x - h` (positive means outside).
    pub fn max_violation(&self, x: &[T]) -> T {
        (0..self.n_faces())
            .map(|i| dot(self.g.row(i), x) - self.h[i])
            .fold(T::neg_infinity(), T::max)
    }

    /// Maximize `dᵀx` over the faces listed in `faces` (all faces when `None`).
    pub fn support(&self, d: &[T], faces: Option<&[usize]>) -> Result<Support<T>, PolytopeError> {
        if d.len() != self.dim() {
            return Err(PolytopeError::Dimension {
                expected: self.dim(),
                got: d.len(),
            });
        }
        let all: Vec<usize>;
        let faces = match faces {
            Some(f) => f,
            None => {
                all = (0..self.n_faces()).collect();
                &all
            }
        };
        let dim = self.dim();
        let mut p = LpProblem::<T>::new(faces.len());
        p.set_objective(&faces.iter().map(|&i| self.h[i]).collect::<Vec<_>>());
        for j in 0..dim {
            let row: Vec<T> = faces.iter().map(|&i| self.g.get(i, j)).collect();
            p.add_eq(&row, d[j]);
        }
        let sol = lp::solve(&p)?;
        Ok(match sol.status {
            LpStatus::Optimal => Support::Bounded {
                value: sol.objective_value.expect("optimal value"),
                point: Vector::from_vec_unchecked(sol.eq_duals.expect("duals of optimal solve")),
                multipliers: sol.x.expect("optimal point").into_vec(),
            },
            LpStatus::Infeasible => Support::NoDualSolution,
            LpStatus::Unbounded => Support::Empty,
        })
    }
}

pub fn contains_point<T: Scalar>(p: &Polytope<T>, x: &[T], tol: T) -> Result<bool, PolytopeError> {
    if x.len() != p.dim() {
        return Err(PolytopeError::Dimension {
            expected: p.dim(),
            got: x.len(),
        });
    }
    Ok(p.n_faces() == 0 || p.max_violation(x) <= tol)
}

/// Center and radius of the largest inscribed Euclidean ball.
pub fn chebyshev_center<T: Scalar>(p: &Polytope<T>) -> Result<ChebyshevBall<T>, PolytopeError> {
    let dim = p.dim();
    let mut lp = LpProblem::<T>::new(dim + 1);
    for j in 0..dim {
        lp.set_free(j);
    }
    let mut c = vec![T::zero(); dim + 1];
    c[dim] = -T::one();
    lp.set_objective(&c);
    for i in 0..p.n_faces() {
        let gi = p.g.row(i);
        let norm = dot(gi, gi).sqrt();
        let mut row = gi.to_vec();
        row.push(norm);
        lp.add_le(&row, p.h[i]);
    }
    let sol = lp::solve(&lp)?;
    match sol.status {
        LpStatus::Infeasible => Err(PolytopeError::Empty),
        LpStatus::Unbounded => Err(PolytopeError::Unbounded),
        LpStatus::Optimal => {
            let x = sol.x.expect("optimal point");
            Ok(ChebyshevBall {
                center: Vector::from_vec_unchecked(x[..dim].to_vec()),
                radius: x[dim].max(T::zero()),
            })
        }
    }
}

/// Drop faces implied by the others. Faces are tested in order against the
/// faces kept so far plus those not yet tested, so exact duplicates keep
/// their last copy.
pub fn remove_redundant_faces<T: Scalar>(p: &Polytope<T>) -> Result<(Polytope<T>, Vec<usize>), PolytopeError> {
    match chebyshev_center(p) {
        Ok(_) | Err(PolytopeError::Unbounded) => {}
        Err(e) => return Err(e),
    }

    let tol = T::lit(REDUNDANCY_TOL);
    let mut active: Vec<bool> = vec![true; p.n_faces()];
    for i in 0..p.n_faces() {
        let others: Vec<usize> = (0..p.n_faces()).filter(|&k| k != i && active[k]).collect();
        let redundant = match p.support(p.g.row(i), Some(&others))? {
            Support::Bounded { value, .. } => value <= p.h[i] + tol,
            Support::NoDualSolution => false,
            Support::Empty => return Err(PolytopeError::Empty),
        };
        if redundant {
            active[i] = false;
        }
    }
    let kept: Vec<usize> = (0..p.n_faces()).filter(|&i| active[i]).collect();
    Ok((p.select_faces(&kept), kept))
}

fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// Every vertex of a bounded polytope of dimension at most 8, by solving each
/// `dim`-subset of faces as an equality system.
pub fn enumerate_vertices<T: Scalar>(p: &Polytope<T>) -> Result<Vec<Vector<T>>, PolytopeError> {
    let dim = p.dim();
    if dim > MAX_ENUMERATION_DIM {
        return Err(PolytopeError::DimensionGuard { dim });
    }
    let faces = p.n_faces();
    let subsets = binomial(faces, dim);
    if subsets > MAX_ENUMERATION_SUBSETS {
        return Err(PolytopeError::TooManySubsets { subsets });
    }
    if dim == 0 {
        return Ok(if p.h.iter().all(|&x| x >= -T::lit(VERTEX_FEAS_TOL)) {
            vec![Vector::zeros(0)]
        } else {
            Vec::new()
        });
    }
    let feas = T::lit(VERTEX_FEAS_TOL);
    let dedup = T::lit(VERTEX_DEDUP_TOL);
    let mut vertices: Vec<Vector<T>> = Vec::new();
    if faces >= dim {
        let mut idx: Vec<usize> = (0..dim).collect();
        loop {
            let mut a = Vec::with_capacity(dim * dim);
            for &i in &idx {
                a.extend_from_slice(p.g.row(i));
            }
            if let Ok(lu) = Lu::factor_raw(dim, a, T::lit(1e-10)) {
                let mut x: Vec<T> = idx.iter().map(|&i| p.h[i]).collect();
                lu.solve_vec(&mut x);
                if p.max_violation(&x) <= feas
                    && !vertices
                        .iter()
                        .any(|v| v.iter().zip(&x).map(|(a, b)| (*a - *b).abs()).fold(T::zero(), T::max) <= dedup)
                {
                    vertices.push(Vector::from_vec_unchecked(x));
                }
            }
            let mut k = dim;
            loop {
                if k == 0 {
                    break;
                }
                k -= 1;
                if idx[k] < faces - dim + k {
                    idx[k] += 1;
                    for t in k + 1..dim {
                        idx[t] = idx[t - 1] + 1;
                    }
                    k = usize::MAX;
                    break;
                }
            }
            if k != usize::MAX {
                break;
            }
        }
    }
    if vertices.is_empty() {
        // Either empty, or a nonempty set without vertices (hence unbounded).
        return match chebyshev_center(p) {
            Err(PolytopeError::Empty) => Ok(vertices),
            Err(PolytopeError::Unbounded) | Ok(_) => Err(PolytopeError::Unbounded),
            Err(e) => Err(e),
        };
    }
    for j in 0..dim {
        for s in [T::one(), -T::one()] {
            let mut d = vec![T::zero(); dim];
            d[j] = s;
            if let Support::NoDualSolution = p.support(&d, None)? {
                return Err(PolytopeError::Unbounded);
            }
        }
    }
    Ok(vertices)
}

/// Decide `P₁ ⊆ P₂` by the Extended Farkas Lemma. Each row of `Z` is the
/// cheapest nonnegative combination of `P₁`'s faces reproducing one face of
/// `P₂`; its cost is the support value of `P₁` in that direction.
pub fn check_containment_farkas<T: Scalar>(
    p1: &Polytope<T>,
    p2: &Polytope<T>,
) -> Result<ContainmentCertificate<T>, PolytopeError> {
    if p1.dim() != p2.dim() {
        return Err(PolytopeError::Dimension {
            expected: p1.dim(),
            got: p2.dim(),
        });
    }
    let f1 = p1.n_faces();
    let mut z = Matrix::zeros(p2.n_faces(), f1);
    for k in 0..p2.n_faces() {
        let row = p2.g.row(k);
        let hk = p2.h[k];
        let tol = T::tol(1e-9) * (T::one() + hk.abs());
        match p1.support(row, None)? {
            Support::Bounded {
                value,
                point,
                multipliers,
            } => {
                if value > hk + tol {
                    return Ok(ContainmentCertificate {
                        contained: false,
                        z: None,
                        witness: Some(point),
                    });
                }
                for (j, &m) in multipliers.iter().enumerate() {
                    z.set(k, j, m);
                }
            }
            Support::NoDualSolution => {
                // Unbounded in this direction, unless P₁ is empty with faces that
                // do not span the space (then no multiplier exists even though
                // containment holds trivially).
                let empty = matches!(chebyshev_center(p1), Err(PolytopeError::Empty));
                return Ok(ContainmentCertificate {
                    contained: empty,
                    z: None,
                    witness: if empty { None } else { witness_by_enumeration(p1, p2) },
                });
            }
            Support::Empty => {
                // P₁ is empty: any budget is reachable, so ask for feasibility directly.
                let mut lp = LpProblem::<T>::new(f1);
                for j in 0..p1.dim() {
                    let r: Vec<T> = (0..f1).map(|i| p1.g.get(i, j)).collect();
                    lp.add_eq(&r, row[j]);
                }
                lp.add_le(p1.h.as_slice(), hk);
                let sol = lp::solve_feasibility(&lp)?;
                let x = sol
                    .x
                    .ok_or_else(|| LpError::Numerical("empty-set certificate".into()))?;
                for (j, &m) in x.iter().enumerate() {
                    z.set(k, j, m);
                }
            }
        }
    }
    Ok(ContainmentCertificate {
        contained: true,
        z: Some(z),
        witness: None,
    })
}

fn witness_by_enumeration<T: Scalar>(p1: &Polytope<T>, p2: &Polytope<T>) -> Option<Vector<T>> {
    let tol = T::lit(1e-9);
    enumerate_vertices(p1)
        .ok()?
        .into_iter()
        .find(|v| p2.max_violation(v) > tol)
}

/// Hit-and-run samples from the interior of a bounded, full-dimensional polytope.
pub fn sample_interior<T: Scalar>(p: &Polytope<T>, count: usize, seed: u64) -> Result<Vec<Vector<T>>, PolytopeError> {
    let ball = chebyshev_center(p)?;
    let dim = p.dim();
    let scale = p.h.iter().fold(T::one(), |a, &b| a.max(b.abs()));
    if ball.radius <= T::lit(1e-9) * scale {
        return Err(PolytopeError::Degenerate {
            radius: ball.radius.to_f64_lossy(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = ball.center.into_vec();
    let tol = T::lit(SAMPLE_TOL);
    let step = |x: &mut Vec<T>, rng: &mut ChaCha8Rng| -> Result<(), PolytopeError> {
        let d: Vec<T> = (0..dim).map(|_| T::lit(rng.sample::<f64, _>(StandardNormal))).collect();
        let norm = dot(&d, &d).sqrt();
        if norm == T::zero() {
            return Ok(());
        }
        let d: Vec<T> = d.into_iter().map(|di| di / norm).collect();
        let (mut lo, mut hi) = (T::neg_infinity(), T::infinity());
        for i in 0..p.n_faces() {
            let gi = p.g.row(i);
            let a = dot(gi, &d);
            let b = (p.h[i] - dot(gi, x)).max(T::zero());
            if a > T::zero() {
                hi = hi.min(b / a);
            } else if a < T::zero() {
                lo = lo.max(b / a);
            }
        }
        if !lo.is_finite() || !hi.is_finite() {
            return Err(PolytopeError::Unbounded);
        }
        let u = T::lit(rng.random_range(0.0..1.0));
        let lam = lo + (hi - lo) * u;
        let cand: Vec<T> = x.iter().zip(&d).map(|(&xi, &di)| xi + lam * di).collect();
        if p.max_violation(&cand) <= tol {
            *x = cand;
        }
        Ok(())
    };
    for _ in 0..100 * dim {
        step(&mut x, &mut rng)?;
    }
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        for _ in 0..dim.max(1) {
            step(&mut x, &mut rng)?;
        }
        out.push(Vector::from_vec_unchecked(x.clone()));
    }
    Ok(out)
}
