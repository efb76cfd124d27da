use serde::{Deserialize, Serialize};

use super::{eigen, LinalgError, Matrix, Vector};
use crate::lp::{self, LpProblem, LpStatus};
use crate::scalar::Scalar;

/// Off-diagonal entries above `-METZLER_TOL` count as nonnegative.
pub const METZLER_TOL: f64 = 1e-12;

/// Margin used when classifying an eigenvalue bound as strict.
const SPECTRAL_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeKind {
    Continuous,
    Discrete,
}

pub fn is_metzler<T: Scalar>(a: &Matrix<T>) -> bool {
    let tol = T::lit(METZLER_TOL);
    a.is_square() && (0..a.rows()).all(|i| (0..a.cols()).all(|j| i == j || a.get(i, j) >= -tol))
}

pub fn is_nonnegative<T: Scalar>(a: &Matrix<T>) -> bool {
    let tol = T::lit(METZLER_TOL);
    a.as_slice().iter().all(|&x| x >= -tol)
}

/// Determinants of the leading `k×k` submatrices, `k = 1..=n`.
pub fn leading_principal_minors<T: Scalar>(a: &Matrix<T>) -> Result<Vec<T>, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    (1..=a.rows())
        .map(|k| Matrix::from_fn(k, k, |i, j| a.get(i, j)).determinant())
        .collect()
}

/// Search for `v > 0` with `A v < 0` (continuous) or `A v < v` (discrete),
/// i.e. a linear copositive Lyapunov function `max_i x_i / v_i`.
/// Returns `v` normalized to sum one, or `None` when no such vector exists.
pub fn find_dlclf<T: Scalar>(a: &Matrix<T>, kind: TimeKind, eta: T) -> Result<Option<Vector<T>>, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    let n = a.rows();
    let mut p = LpProblem::<T>::new(n);
    for j in 0..n {
        p.set_bounds(j, T::one(), T::infinity());
    }
    for i in 0..n {
        let mut row = a.row(i).to_vec();
        if kind == TimeKind::Discrete {
            row[i] -= T::one();
        }
        p.add_le(&row, -eta);
    }
    p.set_objective(&vec![T::one(); n]);
    let sol = lp::solve(&p).map_err(|e| LinalgError::Lp(e.to_string()))?;
    if sol.status != LpStatus::Optimal {
        return Ok(None);
    }
    let v = sol.x.expect("optimal solution carries a point");
    let total: T = v.iter().copied().sum();
    Ok(Some(Vector::from_vec_unchecked(v.iter().map(|&x| x / total).collect())))
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub is_metzler: bool,
    pub is_nonnegative: bool,
    pub is_hurwitz: bool,
    pub is_schur: bool,
    pub spectral_abscissa: f64,
    pub spectral_radius: f64,
    /// Certificate vector for the requested time kind, when one exists.
    pub dlclf_vector: Option<Vec<f64>>,
    /// Leading principal minors of `-A` (continuous) or `I - A` (discrete)
    /// are all positive. For Metzler or nonnegative `A` this is equivalent
    /// to stability.
    pub principal_minors_positive: bool,
}

pub fn check_positive_stability<T: Scalar>(a: &Matrix<T>, kind: TimeKind) -> Result<StabilityReport, LinalgError> {
    let eig = eigen::eigenvalues(a)?;
    let abscissa = eig
        .iter()
        .map(|z| z.re.to_f64_lossy())
        .fold(f64::NEG_INFINITY, f64::max);
    let radius = eig.iter().map(|z| z.norm().to_f64_lossy()).fold(0.0, f64::max);
    let n = a.rows();
    let shifted = Matrix::from_fn(n, n, |i, j| {
        let x = -a.get(i, j);
        match kind {
            TimeKind::Continuous => x,
            TimeKind::Discrete if i == j => T::one() + x,
            TimeKind::Discrete => x,
        }
    });
    let minors = leading_principal_minors(&shifted)?;
    let dlclf = find_dlclf(a, kind, T::lit(1e-6))?;
    Ok(StabilityReport {
        is_metzler: is_metzler(a),
        is_nonnegative: is_nonnegative(a),
        is_hurwitz: abscissa < -SPECTRAL_MARGIN,
        is_schur: radius < 1.0 - SPECTRAL_MARGIN,
        spectral_abscissa: abscissa,
        spectral_radius: radius,
        dlclf_vector: dlclf.map(|v| v.iter().map(|x| x.to_f64_lossy()).collect()),
        principal_minors_positive: minors.iter().all(|&d| d > T::zero()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Matrix<f64> {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn sign_structure_predicates() {
        let a = m(&[&[-1.0, 0.5], &[0.0, -2.0]]);
        assert!(is_metzler(&a) && !is_nonnegative(&a));
        assert!(!is_metzler(&m(&[&[-1.0, -0.5], &[0.0, -2.0]])));
        assert!(is_nonnegative(&m(&[&[0.0, 0.5], &[1.0, 2.0]])));
        assert!(is_metzler(&m(&[&[-1.0, -1e-13], &[0.0, -2.0]])));
    }

    #[test]
    fn minors_of_triangular_matrix() {
        let d = leading_principal_minors(&m(&[&[2.0, 1.0], &[0.0, 3.0]])).unwrap();
        assert!((d[0] - 2.0).abs() < 1e-12 && (d[1] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn copositive_certificate_for_stable_metzler() {
        let a = m(&[&[-2.0, 1.0], &[1.0, -2.0]]);
        let v = find_dlclf(&a, TimeKind::Continuous, 1e-6).unwrap().unwrap();
        assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let av = a.mul_vec(&v).unwrap();
        assert!(av.iter().all(|&x| x < 0.0));
        let report = check_positive_stability(&a, TimeKind::Continuous).unwrap();
        assert!(report.is_hurwitz && report.principal_minors_positive && report.is_metzler);

        let unstable = m(&[&[-1.0, 2.0], &[2.0, -1.0]]);
        assert!(find_dlclf(&unstable, TimeKind::Continuous, 1e-6).unwrap().is_none());
        let r = check_positive_stability(&unstable, TimeKind::Continuous).unwrap();
        assert!(!r.is_hurwitz && !r.principal_minors_positive);
    }

    #[test]
    fn discrete_time_classification() {
        let a = m(&[&[0.5, 0.2], &[0.1, 0.4]]);
        let r = check_positive_stability(&a, TimeKind::Discrete).unwrap();
        assert!(r.is_schur && r.principal_minors_positive && r.dlclf_vector.is_some());
        let b = m(&[&[0.9, 0.3], &[0.3, 0.9]]);
        let r = check_positive_stability(&b, TimeKind::Discrete).unwrap();
        assert!(!r.is_schur && !r.principal_minors_positive && r.dlclf_vector.is_none());
    }

    #[test]
    fn minors_agree_with_spectrum_on_random_metzler() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let n = rng.random_range(1..=4);
            let a = Matrix::from_fn(n, n, |i, j| {
                if i == j {
                    rng.random_range(-3.0..0.5)
                } else {
                    rng.random_range(0.0..1.0)
                }
            });
            let r = check_positive_stability(&a, TimeKind::Continuous).unwrap();
            if r.spectral_abscissa.abs() > 1e-6 {
                assert_eq!(r.is_hurwitz, r.principal_minors_positive);
                assert_eq!(r.is_hurwitz, r.dlclf_vector.is_some());
            }
        }
    }
}
