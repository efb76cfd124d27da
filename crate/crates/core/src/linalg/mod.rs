//! Dense linear algebra: matrices, Kronecker-type products, vectorization,
//! eigenvalues and positive-system stability classification.

mod eigen;
mod matrix;
mod stability;

pub use eigen::{eigenvalues, spectral_abscissa, spectral_radius};
pub(crate) use matrix::{dot, Lu};
pub use matrix::{Matrix, Vector};
pub use stability::{
    check_positive_stability, find_dlclf, is_metzler, is_nonnegative, leading_principal_minors, StabilityReport,
    TimeKind, METZLER_TOL,
};

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LinalgError {
    #[error("data length mismatch: expected {expected}, got {got}")]
    DataLength { expected: usize, got: usize },
    #[error("non-finite entry at position {index}")]
    NonFinite { index: usize },
    #[error("rows have inconsistent lengths")]
    RaggedRows,
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is singular")]
    Singular,
    #[error("eigenvalue iteration did not converge within {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("auxiliary linear program failed: {0}")]
    Lp(String),
}

/// Kronecker product: block `(i, j)` of the result is `a[i, j] · b`.
pub fn kron<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Matrix<T> {
    let (p, q) = a.shape();
    let (r, c) = b.shape();
    let mut out = Matrix::zeros(p * r, q * c);
    for i in 0..p {
        for j in 0..q {
            let aij = a.get(i, j);
            if aij == T::zero() {
                continue;
            }
            for k in 0..r {
                for l in 0..c {
                    out.set(i * r + k, j * c + l, aij * b.get(k, l));
                }
            }
        }
    }
    out
}

/// Column-wise Khatri-Rao product: column `j` of the result is
/// `kron(m1[:, j], m2[:, j])`.
pub fn khatri_rao_col<T: Scalar>(m1: &Matrix<T>, m2: &Matrix<T>) -> Result<Matrix<T>, LinalgError> {
    if m1.cols() != m2.cols() {
        return Err(LinalgError::Shape {
            op: "khatri_rao_col",
            left: m1.shape(),
            right: m2.shape(),
        });
    }
    let (p, k) = m1.shape();
    let r = m2.rows();
    Ok(Matrix::from_fn(p * r, k, |row, j| {
        m1.get(row / r, j) * m2.get(row % r, j)
    }))
}

/// Column-major vectorization.
pub fn vec<T: Scalar>(m: &Matrix<T>) -> Vector<T> {
    let (rows, cols) = m.shape();
    let mut out = Vec::with_capacity(rows * cols);
    for j in 0..cols {
        for i in 0..rows {
            out.push(m.get(i, j));
        }
    }
    Vector::from_vec_unchecked(out)
}

/// Inverse of [`vec`].
pub fn unvec<T: Scalar>(x: &[T], rows: usize, cols: usize) -> Result<Matrix<T>, LinalgError> {
    if x.len() != rows * cols {
        return Err(LinalgError::DataLength {
            expected: rows * cols,
            got: x.len(),
        });
    }
    let m = Matrix::from_fn(rows, cols, |i, j| x[j * rows + i]);
    Matrix::new(rows, cols, m.as_slice().to_vec())
}

/// Positions (in column-major order) of the off-diagonal entries of an `n×n` matrix.
pub fn off_diagonal_positions(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(n * n.saturating_sub(1));
    for j in 0..n {
        for i in 0..n {
            if i != j {
                out.push((i, j));
            }
        }
    }
    out
}

/// The 0/1 matrix `M_n` of shape `n(n-1) × n²` with `M_n · vec(A)` equal to
/// the off-diagonal entries of `A` in column-major order.
pub fn metzler_index_matrix<T: Scalar>(n: usize) -> Matrix<T> {
    let pos = off_diagonal_positions(n);
    let mut m = Matrix::zeros(pos.len(), n * n);
    for (r, &(i, j)) in pos.iter().enumerate() {
        m.set(r, j * n + i, T::one());
    }
    m
}
