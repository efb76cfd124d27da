//! CSV and JSON interchange: datasets, trajectories and synthesis results.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::consistency::{ConsistencyError, Dataset};
use crate::linalg::{Matrix, TimeKind};
use crate::scalar::Scalar;
use crate::simulate::{Labels, Trajectory};
use crate::synthesis::{
    ControllerResult, Diagnostics, SignPattern, SynthesisOptions, SynthesisStatus, VerificationReport,
};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("schema: {0}")]
    Schema(String),
    #[error(transparent)]
    Consistency(#[from] ConsistencyError),
}

fn parse_f64(field: &str, row: usize, col: &str) -> Result<f64, IoError> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| IoError::Schema(format!("row {row}, column {col}: cannot parse {field:?} as a number")))
}

/// Column counts `(n, m, has_mode, L)` implied by a dataset header.
fn dataset_columns(header: &csv::StringRecord) -> Result<(usize, usize, bool, usize), IoError> {
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    let count = |prefix: &str| names.iter().filter(|h| numbered(h, prefix)).count();
    let (n, m, l) = (count("x"), count("u"), count("th"));
    let has_mode = names.contains(&"s");
    let mut expect = vec!["t".to_string()];
    expect.extend((1..=n).map(|i| format!("x{i}")));
    expect.extend((1..=m).map(|j| format!("u{j}")));
    expect.extend((1..=n).map(|i| format!("dx{i}")));
    if has_mode {
        expect.push("s".into());
    }
    expect.extend((1..=l).map(|i| format!("th{i}")));
    if n == 0 || names != expect {
        return Err(IoError::Schema(format!(
            "dataset header must read {:?}, found {:?}",
            expect.join(","),
            names.join(",")
        )));
    }
    Ok((n, m, has_mode, l))
}

fn numbered(name: &str, prefix: &str) -> bool {
    name.strip_prefix(prefix)
        .is_some_and(|rest| !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()))
}

/// Write `t,x1..xn,u1..um,dx1..dxn[,s][,th1..thL]`, one row per sample.
/// Values use the shortest representation that reads back to the same bits.
pub fn write_dataset_csv<T: Scalar, W: Write>(d: &Dataset<T>, w: W) -> Result<(), IoError> {
    let (n, m, samples) = (d.n(), d.m(), d.samples());
    let l = d.theta.as_ref().map_or(0, Matrix::rows);
    let mut wr = csv::Writer::from_writer(w);
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.extend((1..=m).map(|j| format!("u{j}")));
    header.extend((1..=n).map(|i| format!("dx{i}")));
    if d.switching.is_some() {
        header.push("s".into());
    }
    header.extend((1..=l).map(|i| format!("th{i}")));
    wr.write_record(&header)?;
    for t in 0..samples {
        let mut rec = vec![t.to_string()];
        rec.extend((0..n).map(|i| d.x.get(i, t).to_string()));
        rec.extend((0..m).map(|j| d.u.get(j, t).to_string()));
        rec.extend((0..n).map(|i| d.xdelta.get(i, t).to_string()));
        if let Some(s) = &d.switching {
            rec.push(s[t].to_string());
        }
        if let Some(th) = &d.theta {
            rec.extend((0..l).map(|i| th.get(i, t).to_string()));
        }
        wr.write_record(&rec)?;
    }
    wr.flush()?;
    Ok(())
}

/// Read a dataset written by [`write_dataset_csv`]. Time kind and noise
/// bound are not part of the file.
pub fn read_dataset_csv<T: Scalar, R: Read>(r: R, time_kind: TimeKind, epsilon: f64) -> Result<Dataset<T>, IoError> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let header = rd.headers()?.clone();
    let (n, m, has_mode, l) = dataset_columns(&header)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels = Vec::new();
    for (r, rec) in rd.records().enumerate() {
        let rec = rec?;
        let mut vals = Vec::with_capacity(2 * n + m + l);
        for (c, field) in rec.iter().enumerate().skip(1) {
            let name = &header[c];
            if name == "s" {
                let s = field.parse::<usize>().map_err(|_| {
                    IoError::Schema(format!(
                        "row {}, column s: mode label {field:?} is not a positive integer",
                        r + 1
                    ))
                })?;
                labels.push(s);
            } else {
                vals.push(parse_f64(field, r + 1, name)?);
            }
        }
        rows.push(vals);
    }
    let samples = rows.len();
    let lit = |v: f64| T::lit(v);
    let x = Matrix::from_fn(n, samples, |i, t| lit(rows[t][i]));
    let u = Matrix::from_fn(m, samples, |j, t| lit(rows[t][n + j]));
    let xd = Matrix::from_fn(n, samples, |i, t| lit(rows[t][n + m + i]));
    let mut d = Dataset::new(time_kind, x, u, xd, T::lit(epsilon))?;
    if has_mode {
        d = d.with_switching(labels)?;
    }
    if l > 0 {
        d = d.with_theta(Matrix::from_fn(l, samples, |i, t| lit(rows[t][2 * n + m + i])))?;
    }
    Ok(d)
}

/// Write `t,x1..xn[,V][,s|th1..thL]`, one row per sample.
pub fn write_trajectory_csv<T: Scalar, W: Write>(traj: &Trajectory<T>, w: W) -> Result<(), IoError> {
    let n = traj.states.rows();
    let mut wr = csv::Writer::from_writer(w);
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    if traj.lyapunov.is_some() {
        header.push("V".into());
    }
    match &traj.labels {
        Some(Labels::Modes(_)) => header.push("s".into()),
        Some(Labels::Theta(th)) => header.extend((1..=th.rows()).map(|i| format!("th{i}"))),
        None => {}
    }
    wr.write_record(&header)?;
    for k in 0..traj.len() {
        let mut rec = vec![traj.times[k].to_string()];
        rec.extend((0..n).map(|i| traj.states.get(i, k).to_string()));
        if let Some(v) = &traj.lyapunov {
            rec.push(v[k].to_string());
        }
        match &traj.labels {
            Some(Labels::Modes(s)) => rec.push(s[k].to_string()),
            Some(Labels::Theta(th)) => rec.extend((0..th.rows()).map(|i| th.get(i, k).to_string())),
            None => {}
        }
        wr.write_record(&rec)?;
    }
    wr.flush()?;
    Ok(())
}

/// `%.17g`: 17 significant digits, trailing zeros dropped.
pub fn format_sig17(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.16e}");
    let (mant, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if (-5..17).contains(&exp) {
        trim(&format!("{x:.*}", (16 - exp) as usize))
    } else {
        format!("{}e{exp}", trim(mant))
    }
}

/// Pretty JSON whose floats carry 17 significant digits; non-finite
/// floats become `null`.
struct Sig17(serde_json::ser::PrettyFormatter<'static>);

impl serde_json::ser::Formatter for Sig17 {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, x: f64) -> std::io::Result<()> {
        if x.is_finite() {
            w.write_all(format_sig17(x).as_bytes())
        } else {
            w.write_all(b"null")
        }
    }
    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, x: f32) -> std::io::Result<()> {
        self.write_f64(w, f64::from(x))
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Serialize as pretty JSON with 17-significant-digit floats.
pub fn to_json_string<S: Serialize>(value: &S) -> Result<String, IoError> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17(serde_json::ser::PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationSummary {
    pub plants_checked: usize,
    pub vertices_checked: usize,
    pub samples_checked: usize,
    pub max_violation: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub worst_margin: Option<f64>,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl From<&VerificationReport> for VerificationSummary {
    fn from(r: &VerificationReport) -> Self {
        Self {
            plants_checked: r.plants_checked,
            vertices_checked: r.vertices_checked,
            samples_checked: r.samples_checked,
            max_violation: r.max_violation,
            worst_margin: r.worst_margin.is_finite().then_some(r.worst_margin),
            passed: r.passed,
            notes: r.notes.clone(),
        }
    }
}

/// On-disk form of a synthesis result. `v` is scaled to sum to one; the gain
/// is unaffected by that scaling. A single gain is stored as `K`, several
/// (per mode or per scheduling vertex) as `gains`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub status: SynthesisStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<Vec<f64>>,
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub k: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gains: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    pub eta: f64,
    pub normalize_v: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sign_pattern: Option<SignPattern>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verification: Option<VerificationSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<DiagnosticsRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub lp_iterations: usize,
    pub n_variables: usize,
    pub n_equalities: usize,
    pub n_inequalities: usize,
    pub faces: Vec<usize>,
    pub farkas_residual: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl From<&Diagnostics> for DiagnosticsRecord {
    fn from(d: &Diagnostics) -> Self {
        Self {
            lp_iterations: d.lp_iterations,
            n_variables: d.n_variables,
            n_equalities: d.n_equalities,
            n_inequalities: d.n_inequalities,
            faces: d.faces.clone(),
            farkas_residual: d.farkas_residual,
            message: d.message.clone(),
        }
    }
}

impl ResultRecord {
    pub fn from_result<T: Scalar>(r: &ControllerResult<T>, opts: &SynthesisOptions) -> Self {
        let gains: Vec<Vec<Vec<f64>>> = r.gains.iter().map(Matrix::to_f64_rows).collect();
        let (k, gains) = match gains.len() {
            0 => (None, None),
            1 => (gains.into_iter().next(), None),
            _ => (None, Some(gains)),
        };
        Self {
            status: r.status,
            v: r.v_normalized().map(|v| v.iter().map(|x| x.to_f64_lossy()).collect()),
            k,
            gains,
            gamma: r.gamma.map(Scalar::to_f64_lossy),
            eta: opts.eta,
            normalize_v: opts.normalize_v,
            sign_pattern: opts.sign_pattern.clone(),
            verification: r.verification.as_ref().map(VerificationSummary::from),
            diagnostics: Some(DiagnosticsRecord::from(&r.diagnostics)),
        }
    }

    /// All gains as matrices, whether stored as `K` or `gains`.
    pub fn gain_matrices<T: Scalar>(&self) -> Result<Vec<Matrix<T>>, IoError> {
        let to_matrix = |rows: &Vec<Vec<f64>>| {
            Matrix::from_f64_rows(rows).map_err(|e| IoError::Schema(format!("gain matrix: {e}")))
        };
        match (&self.k, &self.gains) {
            (Some(k), _) => Ok(vec![to_matrix(k)?]),
            (None, Some(g)) => g.iter().map(to_matrix).collect(),
            (None, None) => Ok(Vec::new()),
        }
    }

    pub fn to_json(&self) -> Result<String, IoError> {
        to_json_string(self)
    }

    pub fn from_json(s: &str) -> Result<Self, IoError> {
        Ok(serde_json::from_str(s)?)
    }
}
