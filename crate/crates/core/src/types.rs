//! Data model shared by the solver, the spectral stage and the metrics, plus
//! the elementwise operators that tie a coefficient matrix to a segmentation.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const UNIT_NORM_TOL: f64 = 1e-9;

/// D×N matrix whose columns are the data points.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: DMatrix<f64>,
    column_normalized: bool,
}

impl DataMatrix {
    /// Validates `values` and, when `normalize` is set, scales every column to
    /// unit ℓ2 norm. Zero columns cannot be normalized and are rejected.
    pub fn new(mut values: DMatrix<f64>, normalize: bool) -> Result<Self> {
        let (rows, cols) = values.shape();
        if rows < 1 {
            return Err(Error::InvalidInput("data needs at least one row".into()));
        }
        if cols < 2 {
            return Err(Error::InvalidInput(format!(
                "data needs at least two points, got {cols}"
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite entry at row {}, column {}",
                k % rows + 1,
                k / rows + 1
            )));
        }
        if normalize {
            for (j, mut col) in values.column_iter_mut().enumerate() {
                let norm = col.norm();
                if norm == 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "column {} is zero and cannot be normalized",
                        j + 1
                    )));
                }
                col /= norm;
            }
            debug_assert!(values
                .column_iter()
                .all(|c| (c.norm() - 1.0).abs() <= UNIT_NORM_TOL));
        }
        Ok(Self {
            values,
            column_normalized: normalize,
        })
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    pub fn num_points(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_column_normalized(&self) -> bool {
        self.column_normalized
    }
}

/// N×N self-expression coefficients. Dense storage; sparsity is a property of
/// the values, not of the container.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMatrix {
    values: DMatrix<f64>,
}

impl CoefficientMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if !values.is_square() {
            return Err(Error::shape("square matrix", format!("{:?}", values.shape())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite coefficient".into()));
        }
        Ok(Self { values })
    }

    /// Like [`CoefficientMatrix::new`] but also requires an exactly zero diagonal.
    pub fn with_zero_diagonal(values: DMatrix<f64>) -> Result<Self> {
        let c = Self::new(values)?;
        if !c.has_zero_diagonal() {
            return Err(Error::InvalidInput("coefficient diagonal must be zero".into()));
        }
        Ok(c)
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    pub fn has_zero_diagonal(&self) -> bool {
        self.values.diagonal().iter().all(|&d| d == 0.0)
    }
}

/// Hard cluster assignment with labels `0..n`, every cluster nonempty.
///
/// Labels are zero-based in memory; files use one-based labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HardSegmentation {
    labels: Vec<usize>,
    n_clusters: usize,
}

impl HardSegmentation {
    pub fn new(labels: Vec<usize>, n_clusters: usize) -> Result<Self> {
        if n_clusters == 0 {
            return Err(Error::InvalidInput("cluster count must be positive".into()));
        }
        let mut seen = vec![false; n_clusters];
        for (i, &l) in labels.iter().enumerate() {
            if l >= n_clusters {
                return Err(Error::InvalidInput(format!(
                    "label {} of point {} outside 1..={n_clusters}",
                    l + 1,
                    i + 1
                )));
            }
            seen[l] = true;
        }
        if let Some(k) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidInput(format!("cluster {} is empty", k + 1)));
        }
        Ok(Self { labels, n_clusters })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Binary N×n indicator Q with `Q·1 = 1`.
    pub fn indicator(&self) -> DMatrix<f64> {
        let mut q = DMatrix::zeros(self.labels.len(), self.n_clusters);
        for (i, &l) in self.labels.iter().enumerate() {
            q[(i, l)] = 1.0;
        }
        q
    }
}

/// Real-valued N×n spectral embedding, one row per point.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftEmbedding {
    rows: DMatrix<f64>,
}

impl SoftEmbedding {
    pub fn new(rows: DMatrix<f64>) -> Result<Self> {
        if rows.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite embedding entry".into()));
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &DMatrix<f64> {
        &self.rows
    }

    /// Copy with every nonzero row scaled to unit ℓ2 norm; zero rows stay zero.
    pub fn row_normalized(&self) -> DMatrix<f64> {
        let mut out = self.rows.clone();
        for mut row in out.row_iter_mut() {
            let norm = row.norm();
            if norm > 0.0 {
                row /= norm;
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StructureKind {
    Hard,
    Soft,
}

/// Pairwise disagreement Θ_ij = ½‖q_i − q_j‖² between segmentation rows.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureMatrix {
    values: DMatrix<f64>,
    kind: StructureKind,
}

impl StructureMatrix {
    /// The all-zero structure: no segmentation feedback.
    pub fn zeros(n: usize) -> Self {
        Self {
            values: DMatrix::zeros(n, n),
            kind: StructureKind::Hard,
        }
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn kind(&self) -> StructureKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    /// Checks symmetry, zero diagonal and the value range of the kind.
    pub fn check_invariants(&self) -> Result<()> {
        let n = self.values.nrows();
        for i in 0..n {
            if self.values[(i, i)] != 0.0 {
                return Err(Error::InvalidInput(format!("Θ diagonal nonzero at {i}")));
            }
            for j in 0..n {
                let v = self.values[(i, j)];
                if v != self.values[(j, i)] {
                    return Err(Error::InvalidInput(format!("Θ asymmetric at ({i}, {j})")));
                }
                let ok = match self.kind {
                    StructureKind::Hard => v == 0.0 || v == 1.0,
                    StructureKind::Soft => (0.0..=2.0).contains(&v),
                };
                if !ok {
                    return Err(Error::InvalidInput(format!(
                        "Θ entry {v} at ({i}, {j}) out of range for {:?}",
                        self.kind
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LinkKind {
    Must,
    Cannot,
}

/// Pairwise side information between two (zero-based) points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Constraint {
    pub i: usize,
    pub j: usize,
    pub kind: LinkKind,
}

impl Constraint {
    pub fn new(i: usize, j: usize, kind: LinkKind) -> Self {
        Self { i, j, kind }
    }

    /// The unordered pair as `(min, max)`.
    pub fn pair(&self) -> (usize, usize) {
        (self.i.min(self.j), self.i.max(self.j))
    }
}

/// Per-pair ℓ1 weights Ψ: e⁻¹ for must-link, e for cannot-link, 1 otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct SideInfoMatrix {
    values: DMatrix<f64>,
    constraints: Vec<Constraint>,
}

impl SideInfoMatrix {
    pub fn ones(n: usize) -> Self {
        Self {
            values: DMatrix::from_element(n, n, 1.0),
            constraints: Vec::new(),
        }
    }

    pub(crate) fn from_parts(values: DMatrix<f64>, constraints: Vec<Constraint>) -> Self {
        Self {
            values,
            constraints,
        }
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }
}

/// Symmetric nonnegative affinity A = ½(|C| + |Cᵀ|).
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix {
    values: DMatrix<f64>,
}

impl AffinityMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if !values.is_square() {
            return Err(Error::shape("square matrix", format!("{:?}", values.shape())));
        }
        let n = values.nrows();
        for i in 0..n {
            for j in 0..n {
                let v = values[(i, j)];
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(Error::InvalidInput(format!(
                        "affinity entry ({i}, {j}) = {v} is not a finite nonnegative value"
                    )));
                }
                if v != values[(j, i)] {
                    return Err(Error::InvalidInput(format!("affinity asymmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }
}

/// Soft thresholding `sign(x)·max(|x| − τ, 0)`, the prox of `τ|·|`.
#[inline]
pub fn shrink(x: f64, tau: f64) -> f64 {
    if x > tau {
        x - tau
    } else if x < -tau {
        x + tau
    } else {
        0.0
    }
}

pub fn affinity_from_coefficients(c: &CoefficientMatrix) -> AffinityMatrix {
    let v = c.values();
    let n = v.nrows();
    let values = DMatrix::from_fn(n, n, |i, j| 0.5 * (v[(i, j)].abs() + v[(j, i)].abs()));
    AffinityMatrix { values }
}

/// Binary Θ: 0 for points sharing a label, 1 otherwise.
pub fn structure_from_hard(seg: &HardSegmentation) -> StructureMatrix {
    let labels = seg.labels();
    let n = labels.len();
    let values = DMatrix::from_fn(n, n, |i, j| if labels[i] == labels[j] { 0.0 } else { 1.0 });
    StructureMatrix {
        values,
        kind: StructureKind::Hard,
    }
}

/// Soft Θ from the row-normalized embedding. Entries lie in [0, 2].
pub fn structure_from_soft(emb: &SoftEmbedding) -> StructureMatrix {
    let q = emb.row_normalized();
    let n = q.nrows();
    let gram = &q * q.transpose();
    let mut values = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            // ½(‖u‖² + ‖v‖²) − u·v, clamped against rounding.
            let v = (0.5 * (gram[(i, i)] + gram[(j, j)]) - gram[(i, j)]).clamp(0.0, 2.0);
            values[(i, j)] = v;
            values[(j, i)] = v;
        }
    }
    StructureMatrix {
        values,
        kind: StructureKind::Soft,
    }
}

/// ‖C‖_Θ = Σ |C_ij|·Θ_ij.
pub fn subspace_structured_norm(c: &CoefficientMatrix, theta: &StructureMatrix) -> Result<f64> {
    if c.values().shape() != theta.values().shape() {
        return Err(Error::shape(
            format!("{:?}", theta.values().shape()),
            format!("{:?}", c.values().shape()),
        ));
    }
    Ok(c
        .values()
        .iter()
        .zip(theta.values().iter())
        .map(|(c, t)| c.abs() * t)
        .sum())
}
