//! Sparse LU of a simplex basis.
//!
//! Left-looking elimination: columns are taken in order of increasing
//! nonzero count (unit slack columns first), and each is reduced against the
//! previously computed `L` columns. Pivot rows are chosen by threshold
//! partial pivoting, breaking ties toward rows that were sparse in the input.

use crate::scalar::Scalar;

/// Candidates within this factor of the largest entry are acceptable pivots.
const THRESHOLD: f64 = 0.1;

pub(crate) struct SparseLu<T> {
    m: usize,
    /// Pivot row and basis position eliminated at each step.
    prow: Vec<usize>,
    pcol: Vec<usize>,
    /// Multipliers below the pivot, indexed by original row.
    l: Vec<Vec<(usize, T)>>,
    /// Entries above the diagonal, indexed by step.
    u: Vec<Vec<(usize, T)>>,
    diag: Vec<T>,
}

#[derive(Debug)]
pub(crate) struct Singular;

impl<T: Scalar> SparseLu<T> {
    /// Factor the `m × m` matrix whose column `k` is `cols[k]` (row, value).
    pub fn factor(m: usize, cols: &[Vec<(usize, T)>]) -> Result<Self, Singular> {
        debug_assert_eq!(cols.len(), m);
        let mut row_count = vec![0usize; m];
        for c in cols {
            for &(r, _) in c {
                row_count[r] += 1;
            }
        }
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by_key(|&k| (cols[k].len(), k));

        let mut step_of_row = vec![usize::MAX; m];
        let mut prow = Vec::with_capacity(m);
        let mut pcol = Vec::with_capacity(m);
        let mut l: Vec<Vec<(usize, T)>> = Vec::with_capacity(m);
        let mut u: Vec<Vec<(usize, T)>> = Vec::with_capacity(m);
        let mut diag = Vec::with_capacity(m);
        let mut x = vec![T::zero(); m];
        let mut touched: Vec<usize> = Vec::new();
        let mut mark = vec![false; m];
        let eps = T::epsilon() * T::lit(1024.0);

        for &k in &order {
            for &(r, a) in &cols[k] {
                if !mark[r] {
                    mark[r] = true;
                    touched.push(r);
                }
                x[r] += a;
            }
            let scale = cols[k].iter().fold(T::zero(), |s, &(_, a)| s.max(a.abs()));
            // Apply earlier eliminations in step order. Only steps whose pivot
            // row is nonzero matter; gather and sort them lazily as fill appears.
            let mut pending: Vec<usize> = touched
                .iter()
                .filter(|&&r| step_of_row[r] != usize::MAX)
                .map(|&r| step_of_row[r])
                .collect();
            pending.sort_unstable();
            let mut ucol = Vec::new();
            let mut idx = 0;
            while idx < pending.len() {
                let s = pending[idx];
                idx += 1;
                let xs = x[prow[s]];
                if xs == T::zero() {
                    continue;
                }
                ucol.push((s, xs));
                for &(i, li) in &l[s] {
                    if !mark[i] {
                        mark[i] = true;
                        touched.push(i);
                        if step_of_row[i] != usize::MAX {
                            // Fill in an already-pivoted row with a later step.
                            let si = step_of_row[i];
                            let pos = pending[idx..].partition_point(|&p| p < si) + idx;
                            pending.insert(pos, si);
                        }
                    }
                    x[i] -= li * xs;
                }
            }
            let mut best: Option<usize> = None;
            let mut amax = T::zero();
            for &r in &touched {
                if step_of_row[r] == usize::MAX {
                    amax = amax.max(x[r].abs());
                }
            }
            if amax <= eps * scale.max(T::one()) {
                return Err(Singular);
            }
            let floor = amax * T::lit(THRESHOLD);
            for &r in &touched {
                if step_of_row[r] == usize::MAX && x[r].abs() >= floor {
                    best = match best {
                        None => Some(r),
                        Some(b) if (row_count[r], r) < (row_count[b], b) => Some(r),
                        keep => keep,
                    };
                }
            }
            let p = best.expect("a pivot above the threshold exists");
            let piv = x[p];
            let step = prow.len();
            let mut lcol = Vec::new();
            for &r in &touched {
                if step_of_row[r] == usize::MAX && r != p && x[r] != T::zero() {
                    lcol.push((r, x[r] / piv));
                }
            }
            step_of_row[p] = step;
            prow.push(p);
            pcol.push(k);
            l.push(lcol);
            u.push(ucol);
            diag.push(piv);
            for &r in &touched {
                x[r] = T::zero();
                mark[r] = false;
            }
            touched.clear();
        }
        Ok(Self {
            m,
            prow,
            pcol,
            l,
            u,
            diag,
        })
    }

    /// Overwrite `b` (indexed by row) with `x` (indexed by basis position)
    /// such that `B x = b`.
    pub fn solve(&self, b: &mut [T]) {
        let m = self.m;
        for s in 0..m {
            let ys = b[self.prow[s]];
            if ys != T::zero() {
                for &(i, li) in &self.l[s] {
                    b[i] -= li * ys;
                }
            }
        }
        let mut z: Vec<T> = self.prow.iter().map(|&r| b[r]).collect();
        for s in (0..m).rev() {
            let w = z[s] / self.diag[s];
            z[s] = w;
            if w != T::zero() {
                for &(t, us) in &self.u[s] {
                    z[t] -= us * w;
                }
            }
        }
        for s in 0..m {
            b[self.pcol[s]] = z[s];
        }
    }

    /// Overwrite `c` (indexed by basis position) with `y` (indexed by row)
    /// such that `Bᵀ y = c`.
    pub fn solve_transpose(&self, c: &mut [T]) {
        let m = self.m;
        let mut w = vec![T::zero(); m];
        for s in 0..m {
            let mut acc = c[self.pcol[s]];
            for &(t, us) in &self.u[s] {
                acc -= us * w[t];
            }
            w[s] = acc / self.diag[s];
        }
        for s in 0..m {
            c[self.prow[s]] = w[s];
        }
        for s in (0..m).rev() {
            let mut acc = c[self.prow[s]];
            for &(i, li) in &self.l[s] {
                acc -= li * c[i];
            }
            c[self.prow[s]] = acc;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn dense_mul(cols: &[Vec<(usize, f64)>], x: &[f64], m: usize) -> Vec<f64> {
        let mut out = vec![0.0; m];
        for (k, c) in cols.iter().enumerate() {
            for &(r, a) in c {
                out[r] += a * x[k];
            }
        }
        out
    }

    #[test]
    fn solves_random_sparse_systems() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let m = rng.random_range(1..30);
            let mut cols: Vec<Vec<(usize, f64)>> = (0..m)
                .map(|k| {
                    let mut c = vec![(k, rng.random_range(0.5..2.0))];
                    for r in 0..m {
                        if r != k && rng.random_bool(0.15) {
                            c.push((r, rng.random_range(-1.0..1.0)));
                        }
                    }
                    c
                })
                .collect();
            // Shuffle positions so the diagonal is not the natural pivot order.
            for k in (1..m).rev() {
                let j = rng.random_range(0..=k);
                cols.swap(k, j);
            }
            let Ok(lu) = SparseLu::factor(m, &cols) else { continue };
            let x: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut b = dense_mul(&cols, &x, m);
            lu.solve(&mut b);
            assert!(b.iter().zip(&x).all(|(a, e)| (a - e).abs() < 1e-8));
            // Transpose: y with Bᵀ y = c, check c_k = col_k · y.
            let y: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut c: Vec<f64> = cols
                .iter()
                .map(|col| col.iter().map(|&(r, a)| a * y[r]).sum())
                .collect();
            lu.solve_transpose(&mut c);
            assert!(c.iter().zip(&y).all(|(a, e)| (a - e).abs() < 1e-8));
        }
    }

    #[test]
    fn detects_singular_basis() {
        let cols = vec![vec![(0, 1.0), (1, 1.0)], vec![(0, 2.0), (1, 2.0)]];
        assert!(SparseLu::factor(2, &cols).is_err());
    }
}
