//! Synthetic union-of-subspaces data with sparse gross corruption, and
//! side-information sampling from ground truth.
//!
//! Randomness comes from ChaCha8 seeded with the dataset seed. Streams are
//! split by purpose so that changing one draw never shifts another:
//!
//! | stream      | draws                                              |
//! |-------------|----------------------------------------------------|
//! | `0`         | corrupted entry positions, then their noise values |
//! | `1 + j`     | basis matrix `R_j`, then coefficients `Y_j`        |
//! | `SIDE_INFO` | constraint pairs (in [`sample_side_info`])         |

use nalgebra::DMatrix;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Constraint, DataMatrix, LinkKind};

const CORRUPTION_STREAM: u64 = 0;
const SIDE_INFO_STREAM: u64 = 0x5eed_51de;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSpec {
    pub ambient_dim: usize,
    pub subspace_dim: usize,
    pub n_subspaces: usize,
    pub points_per_subspace: usize,
    /// Fraction of all entries that receive additive noise.
    pub corruption: f64,
    /// Noise variance on an entry of column x is `noise_factor·‖x‖₂`.
    pub noise_factor: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            ambient_dim: 100,
            subspace_dim: 5,
            n_subspaces: 15,
            points_per_subspace: 10,
            corruption: 0.0,
            noise_factor: 0.3,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.subspace_dim == 0 || self.subspace_dim >= self.ambient_dim {
            return bad(format!(
                "need 0 < d < D, got d = {}, D = {}",
                self.subspace_dim, self.ambient_dim
            ));
        }
        if self.n_subspaces == 0 || self.points_per_subspace == 0 {
            return bad("need at least one subspace and one point per subspace".into());
        }
        if !(0.0..=1.0).contains(&self.corruption) {
            return bad(format!("corruption {} outside [0, 1]", self.corruption));
        }
        if !(self.noise_factor >= 0.0 && self.noise_factor.is_finite()) {
            return bad(format!("noise factor {} must be nonnegative", self.noise_factor));
        }
        Ok(())
    }

    pub fn num_points(&self) -> usize {
        self.n_subspaces * self.points_per_subspace
    }
}

#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub spec: SynthSpec,
    /// Corrupted data, columns grouped by subspace.
    pub values: DMatrix<f64>,
    pub clean: DMatrix<f64>,
    pub truth: Vec<usize>,
    pub corrupted_mask: DMatrix<bool>,
    /// Orthonormal D×d basis of each subspace.
    pub bases: Vec<DMatrix<f64>>,
}

impl SynthDataset {
    pub fn data(&self, normalize: bool) -> Result<DataMatrix> {
        DataMatrix::new(self.values.clone(), normalize)
    }

    pub fn corrupted_count(&self) -> usize {
        self.corrupted_mask.iter().filter(|&&m| m).count()
    }
}

/// `⌊fraction·total⌋`, robust to the fraction being a rounded decimal.
pub(crate) fn fraction_count(fraction: f64, total: usize) -> usize {
    ((fraction * total as f64 + 1e-9).floor() as usize).min(total)
}

fn top_left_singular_vectors(r: DMatrix<f64>, d: usize) -> DMatrix<f64> {
    let svd = r.svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .total_cmp(&svd.singular_values[a])
            .then(a.cmp(&b))
    });
    DMatrix::from_fn(u.nrows(), d, |i, k| u[(i, order[k])])
}

pub fn generate(spec: &SynthSpec) -> Result<SynthDataset> {
    spec.validate()?;
    let (dim, d, nj) = (spec.ambient_dim, spec.subspace_dim, spec.points_per_subspace);
    let n_points = spec.num_points();

    let mut clean = DMatrix::zeros(dim, n_points);
    let mut truth = Vec::with_capacity(n_points);
    let mut bases = Vec::with_capacity(spec.n_subspaces);
    for j in 0..spec.n_subspaces {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(1 + j as u64);
        let r = DMatrix::from_fn(dim, dim, |_, _| StandardNormal.sample(&mut rng));
        let basis = top_left_singular_vectors(r, d);
        let y = DMatrix::from_fn(d, nj, |_, _| StandardNormal.sample(&mut rng));
        clean.columns_mut(j * nj, nj).copy_from(&(&basis * y));
        truth.extend(std::iter::repeat_n(j, nj));
        bases.push(basis);
    }

    let mut values = clean.clone();
    let mut mask = DMatrix::from_element(dim, n_points, false);
    let total = dim * n_points;
    let count = fraction_count(spec.corruption, total);
    if count > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(CORRUPTION_STREAM);
        let mut picked = index::sample(&mut rng, total, count).into_vec();
        picked.sort_unstable();
        let norms: Vec<f64> = clean.column_iter().map(|c| c.norm()).collect();
        for k in picked {
            // Column-major linear index.
            let (row, col) = (k % dim, k / dim);
            let std = (spec.noise_factor * norms[col]).sqrt();
            let noise = Normal::new(0.0, std)
                .map_err(|e| Error::InvalidInput(format!("noise distribution: {e}")))?
                .sample(&mut rng);
            values[(row, col)] += noise;
            mask[(row, col)] = true;
        }
    }

    Ok(SynthDataset {
        spec: *spec,
        values,
        clean,
        truth,
        corrupted_mask: mask,
        bases,
    })
}

/// Samples `⌊fraction·N(N−1)/2⌋` distinct unordered pairs and labels each
/// must-link or cannot-link from `truth`. Output is sorted by `(i, j)`.
pub fn sample_side_info(truth: &[usize], fraction: f64, seed: u64) -> Result<Vec<Constraint>> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidInput(format!("fraction {fraction} outside [0, 1]")));
    }
    let n = truth.len();
    let total = n * n.saturating_sub(1) / 2;
    let count = fraction_count(fraction, total);
    if count == 0 {
        return Ok(Vec::new());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(SIDE_INFO_STREAM);
    let mut picked = index::sample(&mut rng, total, count).into_vec();
    picked.sort_unstable();

    let mut out = Vec::with_capacity(count);
    let mut picked = picked.into_iter().peekable();
    let mut base = 0;
    'rows: for i in 0..n {
        let row_len = n - 1 - i;
        while let Some(&k) = picked.peek() {
            if k >= base + row_len {
                break;
            }
            let j = i + 1 + (k - base);
            let kind = if truth[i] == truth[j] {
                LinkKind::Must
            } else {
                LinkKind::Cannot
            };
            out.push(Constraint::new(i, j, kind));
            picked.next();
        }
        base += row_len;
        if picked.peek().is_none() {
            break 'rows;
        }
    }
    Ok(out)
}
