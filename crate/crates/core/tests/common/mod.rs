//! Brute-force oracles shared by the integration tests. They deliberately
//! avoid the library's polytope and synthesis code paths.

#![allow(dead_code)]

use posdd::linalg::{Matrix, TimeKind};
use posdd::lp::{self, LpProblem, LpStatus};

/// Gaussian elimination with partial pivoting; `None` when (near) singular.
pub fn solve_dense(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(r, &bi)| r.iter().copied().chain([bi]).collect())
        .collect();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| m[i][k].abs().total_cmp(&m[j][k].abs()))?;
        if m[p][k].abs() < 1e-10 {
            return None;
        }
        m.swap(k, p);
        for i in k + 1..n {
            let f = m[i][k] / m[k][k];
            for j in k..=n {
                m[i][j] -= f * m[k][j];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| m[i][j] * x[j]).sum();
        x[i] = (m[i][n] - s) / m[i][i];
    }
    Some(x)
}

fn for_each_subset(rows: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > rows {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] < rows - k + i {
                idx[i] += 1;
                for t in i + 1..k {
                    idx[t] = idx[t - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Vertices of `{x : G x <= h}` by solving every `dim`-subset of faces.
pub fn vertices(g: &[Vec<f64>], h: &[f64]) -> Vec<Vec<f64>> {
    let dim = g.first().map_or(0, Vec::len);
    let mut out: Vec<Vec<f64>> = Vec::new();
    for_each_subset(g.len(), dim, |idx| {
        let a: Vec<Vec<f64>> = idx.iter().map(|&i| g[i].clone()).collect();
        let b: Vec<f64> = idx.iter().map(|&i| h[i]).collect();
        if let Some(x) = solve_dense(&a, &b) {
            let ok = g
                .iter()
                .zip(h)
                .all(|(r, &hi)| dot(r, &x) <= hi + 1e-9 * (1.0 + hi.abs()));
            if ok && !out.iter().any(|v| v.iter().zip(&x).all(|(a, b)| (a - b).abs() < 1e-8)) {
                out.push(x);
            }
        }
    });
    out
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn rows_of(m: &Matrix<f64>) -> Vec<Vec<f64>> {
    m.to_rows()
}

/// Minimum of `cᵀx` over `{x : G x <= h}` from its vertices (`None` if empty).
pub fn lp_by_vertices(c: &[f64], g: &[Vec<f64>], h: &[f64]) -> Option<f64> {
    vertices(g, h).iter().map(|x| dot(c, x)).reduce(f64::min)
}

/// Split a column-major plant coordinate vector into `(A, B)`.
pub fn plant_at(x: &[f64], n: usize, m: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let a = (0..n).map(|i| (0..n).map(|j| x[j * n + i]).collect()).collect();
    let b = (0..n).map(|i| (0..m).map(|j| x[n * n + j * n + i]).collect()).collect();
    (a, b)
}

/// Robust stabilization by enumeration: a common `(v, Y)` imposing the
/// stabilization conditions on every listed plant. Variables `[v; vec(Y)]`.
pub fn stabilizable_on(
    plants: &[(Vec<Vec<f64>>, Vec<Vec<f64>>)],
    n: usize,
    m: usize,
    kind: TimeKind,
    eta: f64,
) -> bool {
    let nv = n + m * n;
    let yv = |j: usize, k: usize| n + k * m + j;
    let mut p = LpProblem::<f64>::new(nv);
    for i in 0..n {
        p.set_bounds(i, eta, f64::INFINITY);
    }
    for i in n..nv {
        p.set_free(i);
    }
    for (a, b) in plants {
        // entry (i, k) of A X + B Y as a row over the variables
        let entry = |i: usize, k: usize| {
            let mut row = vec![0.0; nv];
            row[k] += a[i][k];
            for j in 0..m {
                row[yv(j, k)] += b[i][j];
            }
            row
        };
        for i in 0..n {
            let mut sum = vec![0.0; nv];
            for k in 0..n {
                for (s, e) in sum.iter_mut().zip(entry(i, k)) {
                    *s += e;
                }
            }
            if kind == TimeKind::Discrete {
                sum[i] -= 1.0;
            }
            p.add_le(&sum, -eta);
            for k in 0..n {
                if i != k || kind == TimeKind::Discrete {
                    p.add_ge(&entry(i, k), 0.0);
                }
            }
        }
    }
    lp::solve_feasibility(&p).expect("well-formed oracle LP").status == LpStatus::Optimal
}
