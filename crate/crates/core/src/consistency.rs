//! Data-consistency polytopes over vectorized plant parameters.
//!
//! Coordinates are `[vec(A); vec(B)]` for a single plant, one such block per
//! mode for switched plants, and `[vec(A₁); …; vec(A_L); vec(B)]` for
//! parameter-affine plants `δx = (Σ θ_ℓ A_ℓ) x + B u`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{khatri_rao_col, off_diagonal_positions, LinalgError, Matrix, TimeKind, Vector};
use crate::polytope::{remove_redundant_faces, Polytope, PolytopeError};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConsistencyError {
    #[error("dataset has no samples")]
    EmptyDataset,
    #[error("noise bound epsilon must be finite and nonnegative, got {0}")]
    NegativeEpsilon(f64),
    #[error("data matrices disagree: {0}")]
    Shape(String),
    #[error("mode label {label} at sample {index} outside 1..={n_modes}")]
    LabelOutOfRange { index: usize, label: usize, n_modes: usize },
    #[error("dataset is missing the {0} channel")]
    MissingChannel(&'static str),
    #[error("dataset carries an unexpected {0} channel")]
    UnexpectedChannel(&'static str),
    #[error("parameter count mismatch: expected {expected}, dataset has {got}")]
    ParameterCount { expected: usize, got: usize },
    #[error("invalid plant: {0}")]
    Plant(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Polytope(#[from] PolytopeError),
}

/// Recorded samples `δx(t) = A x(t) + B u(t) + w(t)` with `‖w(t)‖∞ <= ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T: Scalar> {
    pub time_kind: TimeKind,
    pub x: Matrix<T>,
    pub u: Matrix<T>,
    pub xdelta: Matrix<T>,
    pub epsilon: T,
    /// Mode labels in `1..=N_s`.
    pub switching: Option<Vec<usize>>,
    /// `L × T` scheduling parameters.
    pub theta: Option<Matrix<T>>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(
        time_kind: TimeKind,
        x: Matrix<T>,
        u: Matrix<T>,
        xdelta: Matrix<T>,
        epsilon: T,
    ) -> Result<Self, ConsistencyError> {
        let d = Self {
            time_kind,
            x,
            u,
            xdelta,
            epsilon,
            switching: None,
            theta: None,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn with_switching(mut self, labels: Vec<usize>) -> Result<Self, ConsistencyError> {
        self.switching = Some(labels);
        self.validate()?;
        Ok(self)
    }

    pub fn with_theta(mut self, theta: Matrix<T>) -> Result<Self, ConsistencyError> {
        self.theta = Some(theta);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), ConsistencyError> {
        let t = self.x.cols();
        if t == 0 {
            return Err(ConsistencyError::EmptyDataset);
        }
        if !(self.epsilon >= T::zero()) || !self.epsilon.is_finite() {
            return Err(ConsistencyError::NegativeEpsilon(self.epsilon.to_f64_lossy()));
        }
        if self.u.cols() != t || self.xdelta.cols() != t {
            return Err(ConsistencyError::Shape(format!(
                "X has {t} columns, U has {}, Xdelta has {}",
                self.u.cols(),
                self.xdelta.cols()
            )));
        }
        if self.xdelta.rows() != self.x.rows() {
            return Err(ConsistencyError::Shape(
                "Xdelta and X must have the same number of rows".into(),
            ));
        }
        if let Some(s) = &self.switching {
            if s.len() != t {
                return Err(ConsistencyError::Shape(format!(
                    "{} mode labels for {t} samples",
                    s.len()
                )));
            }
        }
        if let Some(th) = &self.theta {
            if th.cols() != t {
                return Err(ConsistencyError::Shape(format!(
                    "theta has {} columns for {t} samples",
                    th.cols()
                )));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn m(&self) -> usize {
        self.u.rows()
    }

    pub fn samples(&self) -> usize {
        self.x.cols()
    }

    /// The first `t` samples.
    pub fn truncate(&self, t: usize) -> Result<Self, ConsistencyError> {
        let t = t.min(self.samples());
        let cols: Vec<usize> = (0..t).collect();
        let d = Self {
            time_kind: self.time_kind,
            x: self.x.select_cols(&cols),
            u: self.u.select_cols(&cols),
            xdelta: self.xdelta.select_cols(&cols),
            epsilon: self.epsilon,
            switching: self.switching.as_ref().map(|s| s[..t].to_vec()),
            theta: self.theta.as_ref().map(|th| th.select_cols(&cols)),
        };
        d.validate()?;
        Ok(d)
    }

    fn select(&self, cols: &[usize], m_rows: usize) -> (Matrix<T>, Matrix<T>, Matrix<T>) {
        let rows: Vec<usize> = (0..m_rows).collect();
        (
            self.x.select_cols(cols),
            self.u.select_cols(cols).select_rows(&rows),
            self.xdelta.select_cols(cols),
        )
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prior {
    /// `A` Metzler (continuous time) or elementwise nonnegative (discrete time).
    #[serde(default)]
    pub a_positive: bool,
    #[serde(default)]
    pub b_nonnegative: bool,
}

impl Prior {
    pub const NONE: Prior = Prior {
        a_positive: false,
        b_nonnegative: false,
    };
    pub const POSITIVE: Prior = Prior {
        a_positive: true,
        b_nonnegative: true,
    };
    pub fn metzler() -> Self {
        Prior {
            a_positive: true,
            b_nonnegative: false,
        }
    }
}

/// Plant matrices in one of the three supported structures.
#[derive(Debug, Clone, PartialEq)]
pub enum PlantModel<T: Scalar> {
    Single { a: Matrix<T>, b: Matrix<T> },
    Switched { modes: Vec<(Matrix<T>, Matrix<T>)> },
    Lpva { a: Vec<Matrix<T>>, b: Matrix<T> },
}

impl<T: Scalar> PlantModel<T> {
    pub fn n(&self) -> usize {
        match self {
            Self::Single { a, .. } => a.rows(),
            Self::Switched { modes } => modes.first().map_or(0, |(a, _)| a.rows()),
            Self::Lpva { a, .. } => a.first().map_or(0, Matrix::rows),
        }
    }

    fn validate(&self) -> Result<(), ConsistencyError> {
        let check = |a: &Matrix<T>, b: &Matrix<T>, n: usize| {
            if !a.is_square() || a.rows() != n || b.rows() != n {
                Err(ConsistencyError::Plant(format!(
                    "A must be {n}x{n} and B must have {n} rows, got A {:?}, B {:?}",
                    a.shape(),
                    b.shape()
                )))
            } else {
                Ok(())
            }
        };
        let n = self.n();
        if n == 0 {
            return Err(ConsistencyError::Plant("plant has no states".into()));
        }
        match self {
            Self::Single { a, b } => check(a, b, n),
            Self::Switched { modes } => modes.iter().try_for_each(|(a, b)| check(a, b, n)),
            Self::Lpva { a, b } => a.iter().try_for_each(|al| check(al, b, n)),
        }
    }

    /// `A`-matrix of an affine plant at `θ`.
    pub fn lpva_a_at(a: &[Matrix<T>], theta: &[T]) -> Matrix<T> {
        let n = a[0].rows();
        let mut out = Matrix::zeros(n, n);
        for (al, &th) in a.iter().zip(theta) {
            out = out.add(&al.scale(th)).expect("equal shapes");
        }
        out
    }
}

/// Contiguous coordinate range holding `vec` of one named matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Block {
    pub name: String,
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Block {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Coordinate of entry `(i, j)` (column-major within the block).
    pub fn coord(&self, i: usize, j: usize) -> usize {
        self.offset + j * self.rows + i
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Layout {
    pub blocks: Vec<Block>,
}

impl Layout {
    fn from_shapes(shapes: &[(String, usize, usize)]) -> Self {
        let mut offset = 0;
        let blocks = shapes
            .iter()
            .map(|(name, rows, cols)| {
                let b = Block {
                    name: name.clone(),
                    offset,
                    rows: *rows,
                    cols: *cols,
                };
                offset += rows * cols;
                b
            })
            .collect();
        Self { blocks }
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(Block::len).sum()
    }

    pub fn find(&self, name: &str) -> Option<&Block> {
        self.blocks.iter().find(|b| b.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Variant {
    Single,
    Switched { n_modes: usize, input_counts: Vec<usize> },
    Lpva { l: usize },
}

#[derive(Debug, Clone)]
pub struct ConsistencySet<T: Scalar> {
    pub polytope: Polytope<T>,
    pub layout: Layout,
    pub n: usize,
    pub m: usize,
    pub time_kind: TimeKind,
    pub variant: Variant,
    /// Per-mode polytopes in local `[a_s; b_s]` coordinates (switched), or
    /// the whole polytope (single, affine).
    pub parts: Vec<Polytope<T>>,
    pub warnings: Vec<String>,
}

/// Rows `±[Xᵀ⊗I, Uᵀ⊗I] [a; b] <= ε·1 ± vec(Xδ)` on a regressor `R` whose
/// column `t` multiplies the stacked `A`-block coordinates.
fn data_block<T: Scalar>(regressor: &Matrix<T>, u: &Matrix<T>, xdelta: &Matrix<T>, eps: T) -> (Vec<Vec<T>>, Vec<T>) {
    let n = xdelta.rows();
    let (k, t_len) = regressor.shape();
    let m = u.rows();
    let dim = n * (k + m);
    let mut plus = Vec::with_capacity(n * t_len);
    let mut rhs_plus = Vec::with_capacity(n * t_len);
    for t in 0..t_len {
        for i in 0..n {
            let mut row = vec![T::zero(); dim];
            for j in 0..k {
                row[j * n + i] = regressor.get(j, t);
            }
            for j in 0..m {
                row[n * k + j * n + i] = u.get(j, t);
            }
            plus.push(row);
            rhs_plus.push(eps + xdelta.get(i, t));
        }
    }
    let mut rows = plus.clone();
    let mut rhs = rhs_plus;
    for (t, row) in plus.into_iter().enumerate() {
        rows.push(row.into_iter().map(|x| -x).collect());
        let (tt, i) = (t / n, t % n);
        rhs.push(eps - xdelta.get(i, tt));
    }
    (rows, rhs)
}

/// Prior rows on `n_a` stacked `A`-blocks followed by a `B` block.
fn prior_block<T: Scalar>(n: usize, n_a: usize, m: usize, kind: TimeKind, prior: Prior) -> (Vec<Vec<T>>, Vec<T>) {
    let dim = n * (n_a * n + m);
    let mut rows = Vec::new();
    if prior.a_positive {
        for l in 0..n_a {
            let positions: Vec<(usize, usize)> = match kind {
                TimeKind::Continuous => off_diagonal_positions(n),
                TimeKind::Discrete => (0..n).flat_map(|j| (0..n).map(move |i| (i, j))).collect(),
            };
            for (i, j) in positions {
                let mut row = vec![T::zero(); dim];
                row[l * n * n + j * n + i] = -T::one();
                rows.push(row);
            }
        }
    }
    if prior.b_nonnegative {
        for c in 0..n * m {
            let mut row = vec![T::zero(); dim];
            row[n_a * n * n + c] = -T::one();
            rows.push(row);
        }
    }
    let rhs = vec![T::zero(); rows.len()];
    (rows, rhs)
}

fn assemble<T: Scalar>(dim: usize, blocks: Vec<(Vec<Vec<T>>, Vec<T>)>) -> Result<Polytope<T>, ConsistencyError> {
    let mut data = Vec::new();
    let mut h = Vec::new();
    let mut rows = 0;
    for (r, b) in blocks {
        rows += r.len();
        for row in r {
            data.extend(row);
        }
        h.extend(b);
    }
    let g = Matrix::new(rows, dim, data)?;
    Ok(Polytope::new(g, Vector::new(h)?)?)
}

/// Single-plant consistency set with optional positivity priors.
pub fn build_consistency<T: Scalar>(d: &Dataset<T>, prior: Prior) -> Result<ConsistencySet<T>, ConsistencyError> {
    d.validate()?;
    if d.switching.is_some() {
        return Err(ConsistencyError::UnexpectedChannel("switching"));
    }
    if d.theta.is_some() {
        return Err(ConsistencyError::UnexpectedChannel("theta"));
    }
    let (n, m) = (d.n(), d.m());
    let poly = single_polytope(&d.x, &d.u, &d.xdelta, d.epsilon, d.time_kind, prior)?;
    Ok(ConsistencySet {
        layout: Layout::from_shapes(&[("A".into(), n, n), ("B".into(), n, m)]),
        parts: vec![poly.clone()],
        polytope: poly,
        n,
        m,
        time_kind: d.time_kind,
        variant: Variant::Single,
        warnings: Vec::new(),
    })
}

fn single_polytope<T: Scalar>(
    x: &Matrix<T>,
    u: &Matrix<T>,
    xdelta: &Matrix<T>,
    eps: T,
    kind: TimeKind,
    prior: Prior,
) -> Result<Polytope<T>, ConsistencyError> {
    let (n, m) = (x.rows(), u.rows());
    assemble(
        n * (n + m),
        vec![data_block(x, u, xdelta, eps), prior_block(n, 1, m, kind, prior)],
    )
}

/// Switched consistency set with the same input count for every mode.
pub fn build_switched_consistency<T: Scalar>(
    d: &Dataset<T>,
    prior: Prior,
    n_modes: usize,
) -> Result<ConsistencySet<T>, ConsistencyError> {
    build_switched_consistency_with_inputs(d, prior, &vec![d.m(); n_modes])
}

/// Switched consistency set where mode `s` uses the first `input_counts[s]`
/// rows of `U`.
pub fn build_switched_consistency_with_inputs<T: Scalar>(
    d: &Dataset<T>,
    prior: Prior,
    input_counts: &[usize],
) -> Result<ConsistencySet<T>, ConsistencyError> {
    d.validate()?;
    let labels = d
        .switching
        .as_ref()
        .ok_or(ConsistencyError::MissingChannel("switching"))?;
    let n_modes = input_counts.len();
    if n_modes == 0 {
        return Err(ConsistencyError::Shape("at least one mode is required".into()));
    }
    for (index, &label) in labels.iter().enumerate() {
        if label < 1 || label > n_modes {
            return Err(ConsistencyError::LabelOutOfRange { index, label, n_modes });
        }
    }
    if let Some(&ms) = input_counts.iter().find(|&&ms| ms > d.m()) {
        return Err(ConsistencyError::Shape(format!(
            "mode input count {ms} exceeds U's {} rows",
            d.m()
        )));
    }
    let n = d.n();
    let mut parts = Vec::with_capacity(n_modes);
    let mut shapes = Vec::new();
    let mut warnings = Vec::new();
    for (s, &ms) in input_counts.iter().enumerate() {
        let cols: Vec<usize> = (0..labels.len()).filter(|&t| labels[t] == s + 1).collect();
        shapes.push((format!("A{}", s + 1), n, n));
        shapes.push((format!("B{}", s + 1), n, ms));
        if cols.is_empty() {
            warnings.push(format!("mode {} has no samples; only prior faces constrain it", s + 1));
            let (r, h) = prior_block::<T>(n, 1, ms, d.time_kind, prior);
            parts.push(assemble(n * (n + ms), vec![(r, h)])?);
        } else {
            let (x, u, xd) = d.select(&cols, ms);
            parts.push(single_polytope(&x, &u, &xd, d.epsilon, d.time_kind, prior)?);
        }
    }
    Ok(ConsistencySet {
        polytope: Polytope::product(&parts),
        layout: Layout::from_shapes(&shapes),
        n,
        m: d.m(),
        time_kind: d.time_kind,
        variant: Variant::Switched {
            n_modes,
            input_counts: input_counts.to_vec(),
        },
        parts,
        warnings,
    })
}

/// Consistency set of `δx = (Σ θ_ℓ A_ℓ) x + B u`. Priors apply to every `A_ℓ`.
pub fn build_lpva_consistency<T: Scalar>(
    d: &Dataset<T>,
    prior: Prior,
    l: usize,
) -> Result<ConsistencySet<T>, ConsistencyError> {
    d.validate()?;
    let theta = d.theta.as_ref().ok_or(ConsistencyError::MissingChannel("theta"))?;
    if theta.rows() != l {
        return Err(ConsistencyError::ParameterCount {
            expected: l,
            got: theta.rows(),
        });
    }
    let (n, m) = (d.n(), d.m());
    // Column t is kron(θ(t), x(t)), matching the coordinate order [a₁; …; a_L].
    let regressor = khatri_rao_col(theta, &d.x)?;
    let poly = assemble(
        n * (l * n + m),
        vec![
            data_block(&regressor, &d.u, &d.xdelta, d.epsilon),
            prior_block(n, l, m, d.time_kind, prior),
        ],
    )?;
    let mut shapes: Vec<(String, usize, usize)> = (1..=l).map(|k| (format!("A{k}"), n, n)).collect();
    shapes.push(("B".into(), n, m));
    Ok(ConsistencySet {
        parts: vec![poly.clone()],
        polytope: poly,
        layout: Layout::from_shapes(&shapes),
        n,
        m,
        time_kind: d.time_kind,
        variant: Variant::Lpva { l },
        warnings: Vec::new(),
    })
}

impl<T: Scalar> ConsistencySet<T> {
    pub fn dim(&self) -> usize {
        self.polytope.dim()
    }

    /// Coordinates of a plant in this set's layout.
    pub fn pack(&self, plant: &PlantModel<T>) -> Result<Vector<T>, ConsistencyError> {
        let mut out = vec![T::zero(); self.layout.dim()];
        let mut put = |name: &str, mat: &Matrix<T>| -> Result<(), ConsistencyError> {
            let b = self
                .layout
                .find(name)
                .ok_or_else(|| ConsistencyError::Plant(format!("no block {name} in layout")))?;
            if mat.shape() != (b.rows, b.cols) {
                return Err(ConsistencyError::Plant(format!(
                    "{name} is {:?}, layout expects {:?}",
                    mat.shape(),
                    (b.rows, b.cols)
                )));
            }
            for j in 0..b.cols {
                for i in 0..b.rows {
                    out[b.coord(i, j)] = mat.get(i, j);
                }
            }
            Ok(())
        };
        match (plant, &self.variant) {
            (PlantModel::Single { a, b }, Variant::Single) => {
                put("A", a)?;
                put("B", b)?;
            }
            (PlantModel::Switched { modes }, Variant::Switched { n_modes, .. }) if modes.len() == *n_modes => {
                for (s, (a, b)) in modes.iter().enumerate() {
                    put(&format!("A{}", s + 1), a)?;
                    put(&format!("B{}", s + 1), b)?;
                }
            }
            (PlantModel::Lpva { a, b }, Variant::Lpva { l }) if a.len() == *l => {
                for (k, al) in a.iter().enumerate() {
                    put(&format!("A{}", k + 1), al)?;
                }
                put("B", b)?;
            }
            _ => {
                return Err(ConsistencyError::Plant(
                    "plant structure does not match the consistency set".into(),
                ))
            }
        }
        Ok(Vector::from_vec_unchecked(out))
    }

    pub fn unpack(&self, x: &[T]) -> Result<PlantModel<T>, ConsistencyError> {
        if x.len() != self.layout.dim() {
            return Err(ConsistencyError::Shape(format!(
                "coordinate vector has {} entries, layout has {}",
                x.len(),
                self.layout.dim()
            )));
        }
        let get = |b: &Block| Matrix::from_fn(b.rows, b.cols, |i, j| x[b.coord(i, j)]);
        let blocks = &self.layout.blocks;
        Ok(match &self.variant {
            Variant::Single => PlantModel::Single {
                a: get(&blocks[0]),
                b: get(&blocks[1]),
            },
            Variant::Switched { .. } => PlantModel::Switched {
                modes: blocks.chunks(2).map(|p| (get(&p[0]), get(&p[1]))).collect(),
            },
            Variant::Lpva { l } => PlantModel::Lpva {
                a: blocks[..*l].iter().map(get).collect(),
                b: get(&blocks[*l]),
            },
        })
    }

    /// Same set with redundant faces removed (per mode for switched sets).
    pub fn reduced(&self) -> Result<Self, ConsistencyError> {
        let parts = self
            .parts
            .iter()
            .map(|p| remove_redundant_faces(p).map(|(r, _)| r))
            .collect::<Result<Vec<_>, _>>()?;
        let polytope = match self.variant {
            Variant::Switched { .. } => Polytope::product(&parts),
            _ => parts[0].clone(),
        };
        Ok(Self {
            polytope,
            parts,
            ..self.clone()
        })
    }
}

/// `W = Xδ − A X − B U` (with the structure-specific `A`, `B` per sample).
pub fn residual<T: Scalar>(d: &Dataset<T>, plant: &PlantModel<T>) -> Result<Matrix<T>, ConsistencyError> {
    d.validate()?;
    let n = d.n();
    let mut w = Matrix::zeros(n, d.samples());
    for t in 0..d.samples() {
        let (a, b) = match plant {
            PlantModel::Single { a, b } => (a.clone(), b.clone()),
            PlantModel::Switched { modes } => {
                let s = d
                    .switching
                    .as_ref()
                    .ok_or(ConsistencyError::MissingChannel("switching"))?[t];
                let (a, b) = modes.get(s.wrapping_sub(1)).ok_or(ConsistencyError::LabelOutOfRange {
                    index: t,
                    label: s,
                    n_modes: modes.len(),
                })?;
                (a.clone(), b.clone())
            }
            PlantModel::Lpva { a, b } => {
                let th = d
                    .theta
                    .as_ref()
                    .ok_or(ConsistencyError::MissingChannel("theta"))?
                    .col(t);
                (PlantModel::lpva_a_at(a, &th), b.clone())
            }
        };
        let x = d.x.col(t);
        let u: Vec<T> = d.u.col(t)[..b.cols()].to_vec();
        let ax = a.mul_vec(&x)?;
        let bu = b.mul_vec(&u)?;
        for i in 0..n {
            w.set(i, t, d.xdelta.get(i, t) - ax[i] - bu[i]);
        }
    }
    Ok(w)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum StatePolicy {
    /// Independent states drawn uniformly from `[lo, hi]ⁿ`.
    Iid { lo: f64, hi: f64 },
    /// One trajectory from `x0`. Discrete time feeds each recorded next state
    /// back; continuous time advances by an RK4 step of length `dt` between
    /// derivative samples.
    Trajectory { x0: Vec<f64>, dt: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ModePolicy {
    /// Labels cycle `1, 2, …, N_s, 1, …`.
    RoundRobin,
    /// Labels drawn uniformly at random.
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationPolicy {
    /// Inputs uniform on `[input_lo, input_hi]ᵐ`.
    pub input_lo: f64,
    pub input_hi: f64,
    pub state: StatePolicy,
    pub modes: ModePolicy,
    /// Box the affine parameters are drawn from (required for affine plants).
    pub theta_box: Option<(Vec<f64>, Vec<f64>)>,
}

impl GenerationPolicy {
    /// Uniform `[-1, 1]` states and inputs, round-robin modes.
    pub fn iid() -> Self {
        Self {
            input_lo: -1.0,
            input_hi: 1.0,
            state: StatePolicy::Iid { lo: -1.0, hi: 1.0 },
            modes: ModePolicy::RoundRobin,
            theta_box: None,
        }
    }

    pub fn trajectory(x0: Vec<f64>, dt: f64) -> Self {
        Self {
            state: StatePolicy::Trajectory { x0, dt },
            ..Self::iid()
        }
    }

    pub fn with_theta_box(mut self, lo: Vec<f64>, hi: Vec<f64>) -> Self {
        self.theta_box = Some((lo, hi));
        self
    }
}

impl Default for GenerationPolicy {
    fn default() -> Self {
        Self::iid()
    }
}

/// Simulate noisy samples of `plant`. Noise is uniform on the `ε` ∞-ball.
pub fn generate_dataset<T: Scalar>(
    plant: &PlantModel<T>,
    time_kind: TimeKind,
    samples: usize,
    epsilon: f64,
    seed: u64,
    policy: &GenerationPolicy,
) -> Result<Dataset<T>, ConsistencyError> {
    if samples == 0 {
        return Err(ConsistencyError::EmptyDataset);
    }
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(ConsistencyError::NegativeEpsilon(epsilon));
    }
    plant.validate()?;
    let n = plant.n();
    let (m, n_modes, l) = match plant {
        PlantModel::Single { b, .. } => (b.cols(), 1, 0),
        PlantModel::Switched { modes } => (modes.iter().map(|(_, b)| b.cols()).max().unwrap_or(0), modes.len(), 0),
        PlantModel::Lpva { a, b } => (b.cols(), 1, a.len()),
    };
    let theta_box = match plant {
        PlantModel::Lpva { .. } => {
            let (lo, hi) = policy
                .theta_box
                .clone()
                .ok_or(ConsistencyError::MissingChannel("theta box"))?;
            if lo.len() != l || hi.len() != l {
                return Err(ConsistencyError::ParameterCount {
                    expected: l,
                    got: lo.len().min(hi.len()),
                });
            }
            Some((lo, hi))
        }
        _ => None,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Matrix::zeros(n, samples);
    let mut u = Matrix::zeros(m, samples);
    let mut xd = Matrix::zeros(n, samples);
    let mut labels = Vec::with_capacity(samples);
    let mut theta = Matrix::zeros(l, samples);
    let mut state: Vec<f64> = match &policy.state {
        StatePolicy::Trajectory { x0, .. } => {
            if x0.len() != n {
                return Err(ConsistencyError::Plant(format!(
                    "x0 has {} entries, plant has {n} states",
                    x0.len()
                )));
            }
            x0.clone()
        }
        StatePolicy::Iid { .. } => vec![0.0; n],
    };
    let uniform = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| if hi > lo { rng.random_range(lo..=hi) } else { lo };

    for t in 0..samples {
        if let StatePolicy::Iid { lo, hi } = policy.state {
            for s in state.iter_mut() {
                *s = uniform(&mut rng, lo, hi);
            }
        }
        let mode = match plant {
            PlantModel::Switched { .. } => match policy.modes {
                ModePolicy::RoundRobin => t % n_modes,
                ModePolicy::Uniform => rng.random_range(0..n_modes),
            },
            _ => 0,
        };
        let th: Vec<f64> = match &theta_box {
            Some((lo, hi)) => lo.iter().zip(hi).map(|(&a, &b)| uniform(&mut rng, a, b)).collect(),
            None => Vec::new(),
        };
        let (a, b) = match plant {
            PlantModel::Single { a, b } => (a.clone(), b.clone()),
            PlantModel::Switched { modes } => modes[mode].clone(),
            PlantModel::Lpva { a, b } => {
                let tt: Vec<T> = th.iter().map(|&v| T::lit(v)).collect();
                (PlantModel::lpva_a_at(a, &tt), b.clone())
            }
        };
        let ms = b.cols();
        let uu: Vec<f64> = (0..ms)
            .map(|_| uniform(&mut rng, policy.input_lo, policy.input_hi))
            .collect();
        let w: Vec<f64> = (0..n).map(|_| uniform(&mut rng, -epsilon, epsilon)).collect();

        let xs: Vec<T> = state.iter().map(|&v| T::lit(v)).collect();
        let us: Vec<T> = uu.iter().map(|&v| T::lit(v)).collect();
        let ax = a.mul_vec(&xs)?;
        let bu = b.mul_vec(&us)?;
        for i in 0..n {
            x.set(i, t, xs[i]);
            xd.set(i, t, ax[i] + bu[i] + T::lit(w[i]));
        }
        for (j, &uj) in us.iter().enumerate() {
            u.set(j, t, uj);
        }
        for (k, &v) in th.iter().enumerate() {
            theta.set(k, t, T::lit(v));
        }
        labels.push(mode + 1);

        if let StatePolicy::Trajectory { dt, .. } = policy.state {
            state = match time_kind {
                TimeKind::Discrete => (0..n).map(|i| xd.get(i, t).to_f64_lossy()).collect(),
                TimeKind::Continuous => {
                    // Hold u and w over the step.
                    let f = |z: &[f64]| -> Vec<f64> {
                        let zs: Vec<T> = z.iter().map(|&v| T::lit(v)).collect();
                        let az = a.mul_vec(&zs).expect("shape checked");
                        (0..n)
                            .map(|i| az[i].to_f64_lossy() + bu[i].to_f64_lossy() + w[i])
                            .collect()
                    };
                    let add = |z: &[f64], k: &[f64], h: f64| -> Vec<f64> {
                        z.iter().zip(k).map(|(a, b)| a + h * b).collect()
                    };
                    let k1 = f(&state);
                    let k2 = f(&add(&state, &k1, dt / 2.0));
                    let k3 = f(&add(&state, &k2, dt / 2.0));
                    let k4 = f(&add(&state, &k3, dt));
                    (0..n)
                        .map(|i| state[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
                        .collect()
                }
            };
            if state.iter().any(|v| !v.is_finite() || v.abs() > 1e12) {
                return Err(ConsistencyError::Plant(
                    "trajectory diverged during data generation".into(),
                ));
            }
        }
    }

    let mut d = Dataset::new(time_kind, x, u, xd, T::lit(epsilon))?;
    match plant {
        PlantModel::Switched { .. } => d = d.with_switching(labels)?,
        PlantModel::Lpva { .. } => d = d.with_theta(theta)?,
        PlantModel::Single { .. } => {}
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polytope::{chebyshev_center, check_containment_farkas, contains_point};

    fn three_state() -> PlantModel<f64> {
        PlantModel::Single {
            a: Matrix::from_rows(&[[-0.55, 0.3, 0.65], [0.06, -1.35, 0.25], [0.1, 0.15, 0.4]]).unwrap(),
            b: Matrix::from_rows(&[[0.18, 0.08], [0.47, 0.25], [0.07, 0.95]]).unwrap(),
        }
    }

    #[test]
    fn face_counts_and_dimension() {
        let d = generate_dataset(
            &three_state(),
            TimeKind::Continuous,
            50,
            0.1,
            0,
            &GenerationPolicy::iid(),
        )
        .unwrap();
        let cs = build_consistency(&d, Prior::NONE).unwrap();
        assert_eq!(cs.dim(), 15);
        assert_eq!(cs.polytope.n_faces(), 2 * 3 * 50);
        let cs = build_consistency(&d, Prior::metzler()).unwrap();
        assert_eq!(cs.polytope.n_faces(), 306);
        let cs = build_consistency(&d, Prior::POSITIVE).unwrap();
        assert_eq!(cs.polytope.n_faces(), 306 + 6);
        let dt = Dataset {
            time_kind: TimeKind::Discrete,
            ..d
        };
        assert_eq!(
            build_consistency(&dt, Prior::metzler()).unwrap().polytope.n_faces(),
            300 + 9
        );
    }

    #[test]
    fn ground_truth_is_consistent_and_residual_bounded() {
        let plant = three_state();
        for seed in 0..5 {
            let d = generate_dataset(&plant, TimeKind::Continuous, 20, 0.1, seed, &GenerationPolicy::iid()).unwrap();
            let w = residual(&d, &plant).unwrap();
            assert!(w.max_abs() <= 0.1 + 1e-12);
            let cs = build_consistency(&d, Prior::metzler()).unwrap();
            let x = cs.pack(&plant).unwrap();
            assert!(contains_point(&cs.polytope, &x, 1e-12).unwrap());
            assert_eq!(cs.unpack(&x).unwrap(), plant);
        }
    }

    #[test]
    fn noiseless_data_pins_the_plant() {
        let plant = three_state();
        let d = generate_dataset(&plant, TimeKind::Continuous, 12, 0.0, 4, &GenerationPolicy::iid()).unwrap();
        let w = residual(&d, &plant).unwrap();
        assert!(w.max_abs() < 1e-15);
        let cs = build_consistency(&d, Prior::NONE).unwrap();
        let ball = chebyshev_center(&cs.polytope).unwrap();
        assert!(ball.radius < 1e-9);
        let x = cs.pack(&plant).unwrap();
        assert!(contains_point(&cs.polytope, &x, 1e-12).unwrap());
        assert!(ball.center.iter().zip(x.iter()).all(|(a, b)| (a - b).abs() < 1e-6));
    }

    #[test]
    fn generation_is_deterministic() {
        let p = GenerationPolicy::trajectory(vec![1.0, 0.5, 0.2], 0.05);
        let a = generate_dataset(&three_state(), TimeKind::Continuous, 30, 0.1, 9, &p).unwrap();
        let b = generate_dataset(&three_state(), TimeKind::Continuous, 30, 0.1, 9, &p).unwrap();
        assert_eq!(a, b);
        let c = generate_dataset(&three_state(), TimeKind::Continuous, 30, 0.1, 10, &p).unwrap();
        assert_ne!(a, c);
        assert_eq!(a.x.col(0), vec![1.0, 0.5, 0.2]);
    }

    #[test]
    fn discrete_trajectory_records_next_states() {
        let plant = PlantModel::Single {
            a: Matrix::from_rows(&[[0.5, 0.1], [0.2, 0.3]]).unwrap(),
            b: Matrix::from_rows(&[[1.0], [0.0]]).unwrap(),
        };
        let d = generate_dataset(
            &plant,
            TimeKind::Discrete,
            10,
            0.0,
            1,
            &GenerationPolicy::trajectory(vec![1.0, 1.0], 1.0),
        )
        .unwrap();
        for t in 0..9 {
            assert_eq!(d.x.col(t + 1), d.xdelta.col(t));
        }
    }

    #[test]
    fn nested_datasets_shrink() {
        let d = generate_dataset(
            &three_state(),
            TimeKind::Continuous,
            30,
            0.1,
            2,
            &GenerationPolicy::iid(),
        )
        .unwrap();
        let small = build_consistency(&d.truncate(20).unwrap(), Prior::NONE).unwrap();
        let large = build_consistency(&d, Prior::NONE).unwrap();
        assert!(
            check_containment_farkas(&large.polytope, &small.polytope)
                .unwrap()
                .contained
        );
    }

    #[test]
    fn switched_construction() {
        let PlantModel::Single { a, b } = three_state() else {
            unreachable!()
        };
        let a2 = Matrix::from_rows(&[[0.1, 0.1, 0.1], [0.1, -1.9, 0.15], [0.1, 0.1, 0.6]]).unwrap();
        let b2 = Matrix::from_rows(&[[1.0, 0.0], [0.0, 0.0], [0.0, 1.0]]).unwrap();
        let plant = PlantModel::Switched {
            modes: vec![(a.clone(), b.clone()), (a2, b2)],
        };
        let d = generate_dataset(&plant, TimeKind::Continuous, 55, 0.1, 0, &GenerationPolicy::iid()).unwrap();
        let labels = d.switching.clone().unwrap();
        assert_eq!(labels.iter().filter(|&&s| s == 1).count(), 28);
        let cs = build_switched_consistency(&d, Prior::NONE, 2).unwrap();
        assert_eq!(cs.dim(), 30);
        assert_eq!(cs.polytope.n_faces(), 2 * 3 * 55);
        let x = cs.pack(&plant).unwrap();
        assert!(contains_point(&cs.polytope, &x, 1e-12).unwrap());
        assert_eq!(cs.unpack(&x).unwrap(), plant);

        // One mode reduces to the single-plant construction.
        let single = generate_dataset(
            &three_state(),
            TimeKind::Continuous,
            8,
            0.1,
            0,
            &GenerationPolicy::iid(),
        )
        .unwrap();
        let one = single.clone().with_switching(vec![1; 8]).unwrap();
        let s1 = build_switched_consistency(&one, Prior::metzler(), 1).unwrap();
        let s0 = build_consistency(&single, Prior::metzler()).unwrap();
        assert_eq!(s1.polytope, s0.polytope);

        let bad = single.clone().with_switching(vec![3; 8]).unwrap();
        assert!(matches!(
            build_switched_consistency(&bad, Prior::NONE, 2),
            Err(ConsistencyError::LabelOutOfRange { .. })
        ));
        let lonely = single.with_switching(vec![1; 8]).unwrap();
        let cs = build_switched_consistency(&lonely, Prior::metzler(), 2).unwrap();
        assert_eq!(cs.warnings.len(), 1);
        assert_eq!(cs.parts[1].n_faces(), 6);
    }

    #[test]
    fn lpva_construction() {
        let a = vec![
            Matrix::from_rows(&[[-0.9190, 0.5555], [0.4936, -0.5761]]).unwrap(),
            Matrix::from_rows(&[[-1.2653, 0.0574], [0.2981, 0.2455]]).unwrap(),
            Matrix::from_rows(&[[0.9328, 0.5702], [0.0636, -1.0487]]).unwrap(),
        ];
        let b = Matrix::from_rows(&[[0.4570, 0.2828], [0.2115, 0.8863]]).unwrap();
        let plant = PlantModel::Lpva { a, b };
        let policy = GenerationPolicy::iid().with_theta_box(vec![1.0, -1.0, -0.5], vec![1.0, 1.0, 0.9]);
        let d = generate_dataset(&plant, TimeKind::Continuous, 10, 0.1, 0, &policy).unwrap();
        let cs = build_lpva_consistency(&d, Prior::POSITIVE, 3).unwrap();
        assert_eq!(cs.dim(), 16);
        assert_eq!(cs.polytope.n_faces(), 50);
        let x = cs.pack(&plant).unwrap();
        assert!(contains_point(&cs.polytope, &x, 1e-12).unwrap());
        assert!(residual(&d, &plant).unwrap().max_abs() <= 0.1 + 1e-12);
        assert!(matches!(
            build_lpva_consistency(&d, Prior::NONE, 2),
            Err(ConsistencyError::ParameterCount { .. })
        ));

        // L = 1 with θ ≡ 1 is the single-plant set.
        let single = generate_dataset(
            &three_state(),
            TimeKind::Continuous,
            6,
            0.1,
            3,
            &GenerationPolicy::iid(),
        )
        .unwrap();
        let with_theta = single.clone().with_theta(Matrix::from_fn(1, 6, |_, _| 1.0)).unwrap();
        assert_eq!(
            build_lpva_consistency(&with_theta, Prior::POSITIVE, 1)
                .unwrap()
                .polytope,
            build_consistency(&single, Prior::POSITIVE).unwrap().polytope
        );
    }

    #[test]
    fn rejects_bad_datasets() {
        let z = Matrix::<f64>::zeros(2, 0);
        assert_eq!(
            Dataset::new(TimeKind::Continuous, z.clone(), Matrix::zeros(1, 0), z, 0.1).unwrap_err(),
            ConsistencyError::EmptyDataset
        );
        let x = Matrix::<f64>::zeros(2, 3);
        assert!(matches!(
            Dataset::new(TimeKind::Continuous, x.clone(), Matrix::zeros(1, 3), x.clone(), -0.1),
            Err(ConsistencyError::NegativeEpsilon(_))
        ));
        assert!(Dataset::new(TimeKind::Continuous, x.clone(), Matrix::zeros(1, 2), x, 0.1).is_err());
        assert!(generate_dataset(
            &three_state(),
            TimeKind::Continuous,
            0,
            0.1,
            0,
            &GenerationPolicy::iid()
        )
        .is_err());
    }
}
