//! Stabilizing polytopes written as affine functions of the decision variables.

use std::collections::BTreeMap;

use crate::linalg::{Matrix, TimeKind, Vector};
use crate::scalar::Scalar;

/// Sparse linear form `Σ coef · var`.
pub type Terms<T> = Vec<(usize, T)>;

/// One face `g(ξ)ᵀ θ <= h(ξ)` of a stabilizing polytope, affine in the
/// decision variables `ξ`. `coeffs` lists, per plant coordinate, the linear
/// form giving that coordinate's coefficient. Right-hand side is
/// `rhs_terms · ξ + rhs_const`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineRow<T> {
    pub coeffs: Vec<(usize, Terms<T>)>,
    pub rhs_terms: Terms<T>,
    pub rhs_const: T,
}

/// Where `v` and `Y` live among the decision variables. `Y[j][k]` is
/// `coef · ξ[var]`, or structurally zero.
#[derive(Debug, Clone)]
pub(crate) struct GainVars<T> {
    pub v: Vec<usize>,
    pub y: Vec<Vec<Option<(usize, T)>>>,
}

impl<T: Scalar> GainVars<T> {
    fn m(&self) -> usize {
        self.y.len()
    }

    /// Terms of `(Y 1)_j`.
    fn y_row_sum(&self, j: usize) -> Terms<T> {
        self.y[j].iter().flatten().copied().collect()
    }

    pub fn y_matrix(&self, xi: &[T]) -> Matrix<T> {
        let n = self.v.len();
        Matrix::from_fn(self.m(), n, |j, k| {
            self.y[j][k].map_or(T::zero(), |(var, c)| c * xi[var])
        })
    }
}

fn scaled<T: Scalar>(terms: &[(usize, T)], alpha: T) -> Terms<T> {
    terms.iter().map(|&(v, c)| (v, c * alpha)).collect()
}

/// Rows in plant coordinates `[vec(A₁); …; vec(A_L); vec(B)]` where the plant
/// is `A = Σ ω_ℓ A_ℓ`. Top block `(AX + BY)1 <= -η·1 - offset` (continuous) or
/// `<= v - η·1 - offset` (discrete); bottom block `-(AX + BY)_{ik} <= 0` over
/// off-diagonal (continuous) or all (discrete) positions.
pub(crate) fn stabilization_rows<T: Scalar>(
    n: usize,
    kind: TimeKind,
    eta: T,
    weights: &[T],
    gain: &GainVars<T>,
    offset: Option<&[T]>,
) -> Vec<AffineRow<T>> {
    let l = weights.len();
    let m = gain.m();
    let a_coord = |ell: usize, i: usize, j: usize| ell * n * n + j * n + i;
    let b_coord = |i: usize, j: usize| l * n * n + j * n + i;
    let mut rows = Vec::with_capacity(n * (n + 1));
    for i in 0..n {
        let mut coeffs = Vec::new();
        for (ell, &w) in weights.iter().enumerate() {
            if w != T::zero() {
                for j in 0..n {
                    coeffs.push((a_coord(ell, i, j), vec![(gain.v[j], w)]));
                }
            }
        }
        for j in 0..m {
            let t = gain.y_row_sum(j);
            if !t.is_empty() {
                coeffs.push((b_coord(i, j), t));
            }
        }
        let off = offset.map_or(T::zero(), |o| o[i]);
        let rhs_terms = match kind {
            TimeKind::Continuous => Vec::new(),
            TimeKind::Discrete => vec![(gain.v[i], T::one())],
        };
        rows.push(AffineRow {
            coeffs,
            rhs_terms,
            rhs_const: -eta - off,
        });
    }
    for k in 0..n {
        for i in 0..n {
            if i == k && kind == TimeKind::Continuous {
                continue;
            }
            let mut coeffs = Vec::new();
            for (ell, &w) in weights.iter().enumerate() {
                if w != T::zero() {
                    coeffs.push((a_coord(ell, i, k), vec![(gain.v[k], -w)]));
                }
            }
            for j in 0..m {
                if let Some((var, c)) = gain.y[j][k] {
                    coeffs.push((b_coord(i, j), vec![(var, -c)]));
                }
            }
            rows.push(AffineRow {
                coeffs,
                rhs_terms: Vec::new(),
                rhs_const: T::zero(),
            });
        }
    }
    rows
}

/// Symbolic stabilizing polytope of a single plant. Decision variables are
/// `[v; vec(Y)]` (column-major `Y`), plant coordinates `[vec(A); vec(B)]`.
/// Continuous time yields `n + n(n-1)` rows, discrete time `n + n²`.
pub fn stab_polytope_rows<T: Scalar>(n: usize, m: usize, kind: TimeKind, eta: T) -> Vec<AffineRow<T>> {
    let gain = GainVars {
        v: (0..n).collect(),
        y: (0..m)
            .map(|j| (0..n).map(|k| Some((n + k * m + j, T::one()))).collect())
            .collect(),
    };
    stabilization_rows(n, kind, eta, &[T::one()], &gain, None)
}

pub(crate) fn eval_terms<T: Scalar>(terms: &[(usize, T)], xi: &[T]) -> T {
    terms.iter().map(|&(v, c)| c * xi[v]).sum()
}

/// Numeric `(G₂, h₂)` of `rows` at decision values `xi`, over `dim` coordinates.
pub fn evaluate_rows<T: Scalar>(rows: &[AffineRow<T>], xi: &[T], dim: usize) -> (Matrix<T>, Vector<T>) {
    let mut g = Matrix::zeros(rows.len(), dim);
    let mut h = Vec::with_capacity(rows.len());
    for (r, row) in rows.iter().enumerate() {
        for (c, t) in &row.coeffs {
            g.set(r, *c, g.get(r, *c) + eval_terms(t, xi));
        }
        h.push(eval_terms(&row.rhs_terms, xi) + row.rhs_const);
    }
    (g, Vector::from_vec_unchecked(h))
}

/// Substitute known plant coordinates: `Σ_c θ_c g_c(ξ) - h(ξ) <= h_const`.
pub(crate) fn at_point<T: Scalar>(row: &AffineRow<T>, theta: &[T]) -> (Terms<T>, T) {
    let mut acc: BTreeMap<usize, T> = BTreeMap::new();
    for (c, t) in &row.coeffs {
        if theta[*c] != T::zero() {
            for (v, a) in scaled(t, theta[*c]) {
                *acc.entry(v).or_insert(T::zero()) += a;
            }
        }
    }
    for &(v, a) in &row.rhs_terms {
        *acc.entry(v).or_insert(T::zero()) -= a;
    }
    (
        acc.into_iter().filter(|(_, a)| *a != T::zero()).collect(),
        row.rhs_const,
    )
}
