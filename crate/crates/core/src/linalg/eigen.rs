//! Eigenvalues of small dense real matrices: Householder reduction to upper
//! Hessenberg form followed by the Francis double-shift QR iteration.

use num_complex::Complex;

use crate::linalg::{LinalgError, Matrix};
use crate::scalar::Scalar;

/// All eigenvalues of a square matrix, in no particular order.
///
/// Fails with [`LinalgError::NoConvergence`] after `50·n` double-shift sweeps.
pub fn eigenvalues<T: Scalar>(a: &Matrix<T>) -> Result<Vec<Complex<T>>, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    let n = a.rows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut h: Vec<Vec<T>> = a.to_rows();
    hessenberg(&mut h);
    hqr(&mut h, 50 * n)
}

/// `max Re(λ)`.
pub fn spectral_abscissa<T: Scalar>(eigs: &[Complex<T>]) -> T {
    eigs.iter().map(|z| z.re).fold(T::neg_infinity(), T::max)
}

/// `max |λ|`.
pub fn spectral_radius<T: Scalar>(eigs: &[Complex<T>]) -> T {
    eigs.iter().map(|z| z.norm()).fold(T::zero(), T::max)
}

fn hessenberg<T: Scalar>(h: &mut [Vec<T>]) {
    let n = h.len();
    if n < 3 {
        return;
    }
    for k in 0..n - 2 {
        let alpha_sq: T = (k + 1..n).map(|i| h[i][k] * h[i][k]).sum();
        if alpha_sq == T::zero() {
            continue;
        }
        let x0 = h[k + 1][k];
        let alpha = if x0 >= T::zero() {
            -alpha_sq.sqrt()
        } else {
            alpha_sq.sqrt()
        };
        let mut v: Vec<T> = (k + 1..n).map(|i| h[i][k]).collect();
        v[0] -= alpha;
        let vnorm_sq: T = v.iter().map(|&x| x * x).sum();
        if vnorm_sq == T::zero() {
            continue;
        }
        let two = T::lit(2.0);
        // H <- (I - 2vvᵀ/vᵀv) H
        for j in 0..n {
            let s: T = (0..v.len()).map(|r| v[r] * h[k + 1 + r][j]).sum();
            let f = two * s / vnorm_sq;
            for r in 0..v.len() {
                h[k + 1 + r][j] -= f * v[r];
            }
        }
        // H <- H (I - 2vvᵀ/vᵀv)
        for row in h.iter_mut() {
            let s: T = (0..v.len()).map(|r| row[k + 1 + r] * v[r]).sum();
            let f = two * s / vnorm_sq;
            for r in 0..v.len() {
                row[k + 1 + r] -= f * v[r];
            }
        }
        for row in h.iter_mut().skip(k + 2) {
            row[k] = T::zero();
        }
    }
}

#[inline]
fn sign<T: Scalar>(a: T, b: T) -> T {
    if b >= T::zero() {
        a.abs()
    } else {
        -a.abs()
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix (destroyed).
fn hqr<T: Scalar>(h: &mut [Vec<T>], max_sweeps: usize) -> Result<Vec<Complex<T>>, LinalgError> {
    let n = h.len();
    // 1-based accessors keep the index arithmetic of the classical formulation.
    macro_rules! a {
        ($i:expr, $j:expr) => {
            h[$i - 1][$j - 1]
        };
    }
    let mut wr = vec![T::zero(); n + 1];
    let mut wi = vec![T::zero(); n + 1];
    let mut anorm = T::zero();
    for i in 1..=n {
        for j in i.saturating_sub(1).max(1)..=n {
            anorm += a!(i, j).abs();
        }
    }
    let mut nn = n;
    let mut t = T::zero();
    let mut sweeps = 0usize;
    let (mut p, mut q, mut r);
    let (mut x, mut y, mut z, mut w);
    while nn >= 1 {
        let mut its = 0;
        loop {
            let mut l = nn;
            while l >= 2 {
                let mut s = a!(l - 1, l - 1).abs() + a!(l, l).abs();
                if s == T::zero() {
                    s = anorm;
                }
                if a!(l, l - 1).abs() + s == s {
                    a!(l, l - 1) = T::zero();
                    break;
                }
                l -= 1;
            }
            x = a!(nn, nn);
            if l == nn {
                wr[nn] = x + t;
                wi[nn] = T::zero();
                nn -= 1;
                break;
            }
            y = a!(nn - 1, nn - 1);
            w = a!(nn, nn - 1) * a!(nn - 1, nn);
            if l == nn - 1 {
                p = T::lit(0.5) * (y - x);
                q = p * p + w;
                z = q.abs().sqrt();
                x += t;
                if q >= T::zero() {
                    z = p + sign(z, p);
                    wr[nn - 1] = x + z;
                    wr[nn] = x + z;
                    if z != T::zero() {
                        wr[nn] = x - w / z;
                    }
                    wi[nn - 1] = T::zero();
                    wi[nn] = T::zero();
                } else {
                    wr[nn - 1] = x + p;
                    wr[nn] = x + p;
                    wi[nn - 1] = -z;
                    wi[nn] = z;
                }
                nn -= 2;
                break;
            }
            if sweeps >= max_sweeps {
                return Err(LinalgError::NoConvergence { iterations: sweeps });
            }
            if its == 10 || its == 20 {
                // exceptional shift
                t += x;
                for i in 1..=nn {
                    a!(i, i) -= x;
                }
                let s = a!(nn, nn - 1).abs() + a!(nn - 1, nn - 2).abs();
                x = T::lit(0.75) * s;
                y = x;
                w = T::lit(-0.4375) * s * s;
            }
            its += 1;
            sweeps += 1;
            let mut m = nn - 2;
            loop {
                z = a!(m, m);
                r = x - z;
                let s0 = y - z;
                p = (r * s0 - w) / a!(m + 1, m) + a!(m, m + 1);
                q = a!(m + 1, m + 1) - z - r - s0;
                r = a!(m + 2, m + 1);
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = a!(m, m - 1).abs() * (q.abs() + r.abs());
                let v = p.abs() * (a!(m - 1, m - 1).abs() + z.abs() + a!(m + 1, m + 1).abs());
                if u + v == v {
                    break;
                }
                m -= 1;
            }
            for i in m + 2..=nn {
                a!(i, i - 2) = T::zero();
                if i != m + 2 {
                    a!(i, i - 3) = T::zero();
                }
            }
            let mut k = m;
            while k < nn {
                if k != m {
                    p = a!(k, k - 1);
                    q = a!(k + 1, k - 1);
                    r = T::zero();
                    if k != nn - 1 {
                        r = a!(k + 2, k - 1);
                    }
                    x = p.abs() + q.abs() + r.abs();
                    if x != T::zero() {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = sign((p * p + q * q + r * r).sqrt(), p);
                if s != T::zero() {
                    if k == m {
                        if l != m {
                            a!(k, k - 1) = -a!(k, k - 1);
                        }
                    } else {
                        a!(k, k - 1) = -s * x;
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..=nn {
                        p = a!(k, j) + q * a!(k + 1, j);
                        if k != nn - 1 {
                            p += r * a!(k + 2, j);
                            a!(k + 2, j) -= p * z;
                        }
                        a!(k + 1, j) -= p * y;
                        a!(k, j) -= p * x;
                    }
                    let mmin = if nn < k + 3 { nn } else { k + 3 };
                    for i in l..=mmin {
                        p = x * a!(i, k) + y * a!(i, k + 1);
                        if k != nn - 1 {
                            p += z * a!(i, k + 2);
                            a!(i, k + 2) -= p * r;
                        }
                        a!(i, k + 1) -= p * q;
                        a!(i, k) -= p;
                    }
                }
                k += 1;
            }
            if l >= nn - 1 {
                break;
            }
        }
    }
    Ok((1..=n).map(|i| Complex::new(wr[i], wi[i])).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sorted_re(mut e: Vec<Complex<f64>>) -> Vec<Complex<f64>> {
        e.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap().then(a.im.partial_cmp(&b.im).unwrap()));
        e
    }

    /// `det(A - λI)` evaluated in complex arithmetic by Gaussian elimination.
    fn char_poly_residual(a: &Matrix<f64>, lambda: Complex<f64>) -> f64 {
        let n = a.rows();
        let mut m: Vec<Vec<Complex<f64>>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| Complex::new(a.get(i, j), 0.0) - if i == j { lambda } else { Complex::new(0.0, 0.0) })
                    .collect()
            })
            .collect();
        let mut det = Complex::new(1.0, 0.0);
        for k in 0..n {
            let p = (k..n)
                .max_by(|&x, &y| m[x][k].norm().partial_cmp(&m[y][k].norm()).unwrap())
                .unwrap();
            if m[p][k].norm() == 0.0 {
                return 0.0;
            }
            if p != k {
                m.swap(p, k);
                det = -det;
            }
            det *= m[k][k];
            for i in k + 1..n {
                let f = m[i][k] / m[k][k];
                for j in k..n {
                    let v = m[k][j];
                    m[i][j] -= f * v;
                }
            }
        }
        det.norm()
    }

    #[test]
    fn diagonal_and_rotation() {
        let d = Matrix::diag(&[1.0, 2.0, 3.0]);
        let e = sorted_re(eigenvalues(&d).unwrap());
        for (z, want) in e.iter().zip([1.0, 2.0, 3.0]) {
            assert!((z.re - want).abs() < 1e-12 && z.im.abs() < 1e-12);
        }
        let rot = Matrix::from_rows(&[[0.0, -1.0], [1.0, 0.0]]).unwrap();
        let e = sorted_re(eigenvalues(&rot).unwrap());
        assert!((e[0] - Complex::new(0.0, -1.0)).norm() < 1e-12);
        assert!((e[1] - Complex::new(0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn open_loop_poles_of_three_state_plant() {
        let a = Matrix::from_rows(&[[-0.55, 0.3, 0.65], [0.06, -1.35, 0.25], [0.1, 0.15, 0.4]]).unwrap();
        let e = sorted_re(eigenvalues(&a).unwrap());
        for (z, want) in e.iter().zip([-1.3851, -0.6055, 0.4907]) {
            assert!((z.re - want).abs() < 1e-3 && z.im.abs() < 1e-9, "{z} vs {want}");
        }
    }

    #[test]
    fn random_matrices_have_small_characteristic_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..9 {
            for _ in 0..10 {
                let a: Matrix<f64> = Matrix::from_fn(n, n, |_, _| rng.random_range(-2.0..2.0));
                let e = eigenvalues(&a).unwrap();
                assert_eq!(e.len(), n);
                let scale = a.norm_inf().max(1.0);
                for z in &e {
                    // |det(A - λI)| relative to ‖A‖^n
                    assert!(char_poly_residual(&a, *z) <= 1e-8 * scale.powi(n as i32), "n={n}");
                }
                let trace: f64 = (0..n).map(|i| a.get(i, i)).sum();
                let sum: f64 = e.iter().map(|z| z.re).sum();
                assert!((trace - sum).abs() < 1e-9 * scale * n as f64);
            }
        }
    }

    #[test]
    fn gram_matrix_spectrum_is_real_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..30 {
            let n = rng.random_range(1..7);
            let a: Matrix<f64> = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let g = a.transpose().matmul(&a).unwrap();
            for z in eigenvalues(&g).unwrap() {
                assert!(z.im.abs() < 1e-9);
                assert!(z.re > -1e-9);
            }
        }
    }

    #[test]
    fn rejects_rectangular_input() {
        assert!(matches!(
            eigenvalues(&Matrix::<f64>::zeros(2, 3)),
            Err(LinalgError::NotSquare { .. })
        ));
    }

    #[test]
    fn single_precision_eigenvalues() {
        let a = Matrix::<f32>::from_f64_rows(&[[2.0, 1.0], [1.0, 2.0]]).unwrap();
        let mut e: Vec<f32> = eigenvalues(&a).unwrap().iter().map(|z| z.re).collect();
        e.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((e[0] - 1.0).abs() < 1e-5 && (e[1] - 3.0).abs() < 1e-5);
    }
}
