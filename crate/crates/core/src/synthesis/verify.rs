use serde::Serialize;

use super::{ControllerResult, SynthesisError, SynthesisOptions};
use crate::consistency::{ConsistencySet, PlantModel, Variant};
use crate::linalg::{Matrix, TimeKind, Vector};
use crate::polytope::{enumerate_vertices, sample_interior, MAX_ENUMERATION_DIM};
use crate::scalar::Scalar;

/// Allowed sign deficit of closed-loop entries that must be nonnegative.
const POSITIVITY_SLACK: f64 = 1e-9;

/// Result of checking `(A + BK)v <= -η/2` (continuous) or
/// `(A + BK)v <= v - η/2` (discrete) together with closed-loop positivity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub plants_checked: usize,
    pub vertices_checked: usize,
    pub samples_checked: usize,
    /// `max(0, worst_margin + η, positivity_deficit)`; a pass has this at most `η/2`.
    pub max_violation: f64,
    /// Largest entry of `(A + BK)v` (minus `v` in discrete time).
    pub worst_margin: f64,
    pub positivity_deficit: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl VerificationReport {
    pub fn empty() -> Self {
        Self {
            plants_checked: 0,
            vertices_checked: 0,
            samples_checked: 0,
            max_violation: 0.0,
            worst_margin: f64::NEG_INFINITY,
            positivity_deficit: 0.0,
            passed: true,
            notes: Vec::new(),
        }
    }

    pub fn merge(&mut self, other: &Self) {
        self.plants_checked += other.plants_checked;
        self.vertices_checked += other.vertices_checked;
        self.samples_checked += other.samples_checked;
        self.max_violation = self.max_violation.max(other.max_violation);
        self.worst_margin = self.worst_margin.max(other.worst_margin);
        self.positivity_deficit = self.positivity_deficit.max(other.positivity_deficit);
        self.passed &= other.passed;
        self.notes.extend(other.notes.iter().cloned());
    }
}

/// Check a copositive certificate `(v, K)` against each plant `(A, B)`.
pub fn verify_controller<T: Scalar>(
    plants: &[(Matrix<T>, Matrix<T>)],
    v: &[T],
    k: &Matrix<T>,
    kind: TimeKind,
    eta: f64,
) -> VerificationReport {
    let mut report = VerificationReport::empty();
    for (a, b) in plants {
        let acl = match b.matmul(k).and_then(|bk| a.add(&bk)) {
            Ok(m) => m,
            Err(e) => {
                report.passed = false;
                report.notes.push(format!("shape error: {e}"));
                continue;
            }
        };
        let n = acl.rows();
        let av = acl.mul_vec(v).expect("v matches the closed loop");
        let mut margin = f64::NEG_INFINITY;
        let mut deficit = 0.0_f64;
        for i in 0..n {
            let mut r = av[i].to_f64_lossy();
            if kind == TimeKind::Discrete {
                r -= v[i].to_f64_lossy();
            }
            margin = margin.max(r);
            for j in 0..n {
                if i != j || kind == TimeKind::Discrete {
                    deficit = deficit.max(-acl.get(i, j).to_f64_lossy());
                }
            }
        }
        let violation = 0.0_f64.max(margin + eta).max(deficit);
        let ok = margin <= -eta / 2.0 && deficit <= POSITIVITY_SLACK && v.iter().all(|&x| x > T::zero());
        report.plants_checked += 1;
        report.worst_margin = report.worst_margin.max(margin);
        report.positivity_deficit = report.positivity_deficit.max(deficit);
        report.max_violation = report.max_violation.max(violation);
        report.passed &= ok;
    }
    report
}

fn local_plant<T: Scalar>(x: &[T], n: usize) -> (Matrix<T>, Matrix<T>) {
    let m = x.len() / n - n;
    let a = Matrix::from_fn(n, n, |i, j| x[j * n + i]);
    let b = Matrix::from_fn(n, m, |i, j| x[n * n + j * n + i]);
    (a, b)
}

/// Check a synthesized certificate on plants drawn from the consistency set:
/// every vertex when the (per-mode) dimension is small, plus seeded
/// hit-and-run samples.
pub fn verify_on_set<T: Scalar>(
    cs: &ConsistencySet<T>,
    result: &ControllerResult<T>,
    omega: Option<&[Vec<T>]>,
    opts: &SynthesisOptions,
) -> Result<VerificationReport, SynthesisError> {
    let mut total = VerificationReport::empty();
    let Some(v) = result.v.as_ref() else {
        return Err(SynthesisError::Precondition("result carries no certificate".into()));
    };
    for (s, part) in cs.parts.iter().enumerate() {
        let mut points: Vec<(Vector<T>, bool)> = Vec::new();
        if part.dim() <= MAX_ENUMERATION_DIM {
            match enumerate_vertices(part) {
                Ok(vs) => points.extend(vs.into_iter().map(|p| (p, true))),
                Err(e) => total.notes.push(format!("vertex enumeration skipped: {e}")),
            }
        }
        if opts.verification_samples > 0 {
            match sample_interior(part, opts.verification_samples, opts.seed.wrapping_add(s as u64)) {
                Ok(xs) => points.extend(xs.into_iter().map(|p| (p, false))),
                Err(e) => total.notes.push(format!("sampling skipped: {e}")),
            }
        }
        for (x, is_vertex) in &points {
            let mut report = match &cs.variant {
                Variant::Single | Variant::Switched { .. } => {
                    let k = if result.gains.len() == 1 {
                        &result.gains[0]
                    } else {
                        &result.gains[s]
                    };
                    verify_controller(&[local_plant(x, cs.n)], v, k, cs.time_kind, opts.eta)
                }
                Variant::Lpva { .. } => {
                    let omega =
                        omega.ok_or_else(|| SynthesisError::Precondition("scheduling vertices required".into()))?;
                    let PlantModel::Lpva { a, b } = cs.unpack(x)? else {
                        unreachable!("layout is affine")
                    };
                    let mut r = VerificationReport::empty();
                    for (w, k) in omega.iter().zip(&result.gains) {
                        let ac = PlantModel::lpva_a_at(&a, w);
                        r.merge(&verify_controller(&[(ac, b.clone())], v, k, cs.time_kind, opts.eta));
                    }
                    r
                }
            };
            report.plants_checked = 1;
            if *is_vertex {
                report.vertices_checked = 1;
            } else {
                report.samples_checked = 1;
            }
            total.merge(&report);
        }
    }
    if total.plants_checked == 0 {
        total.worst_margin = f64::NAN;
    }
    Ok(total)
}
