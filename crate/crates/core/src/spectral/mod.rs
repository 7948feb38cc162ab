//! Normalized-cut spectral clustering of a coefficient matrix.

pub mod kmeans;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::types::{
    affinity_from_coefficients, AffinityMatrix, CoefficientMatrix, HardSegmentation, SoftEmbedding,
};

pub use kmeans::{kmeans, kmeans_with, KMeansOptions, KMeansResult};

/// Degree floor for isolated nodes.
pub const DEGREE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct LaplacianPair {
    /// `I − D^{-1/2} A D^{-1/2}`.
    pub l_sym: DMatrix<f64>,
    pub degrees: DVector<f64>,
}

pub fn normalized_laplacian(a: &AffinityMatrix) -> LaplacianPair {
    normalized_laplacian_of(a.values())
}

pub(crate) fn normalized_laplacian_of(a: &DMatrix<f64>) -> LaplacianPair {
    let n = a.nrows();
    let degrees = DVector::from_fn(n, |j, _| a.column(j).sum().max(DEGREE_FLOOR));
    let inv_sqrt = degrees.map(|d| 1.0 / d.sqrt());
    let l_sym = DMatrix::from_fn(n, n, |i, j| {
        let off = a[(i, j)] * inv_sqrt[i] * inv_sqrt[j];
        if i == j {
            1.0 - off
        } else {
            -off
        }
    });
    LaplacianPair { l_sym, degrees }
}

/// Eigenpairs of a symmetric matrix, eigenvalues ascending.
pub(crate) fn sorted_eigen(m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 1000 * n.max(1))
        .ok_or(Error::Eigendecomposition)?;
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigendecomposition);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(n, n, |i, c| eig.eigenvectors[(i, order[c])]);
    Ok((values, vectors))
}

pub fn laplacian_eigenvalues(lap: &LaplacianPair) -> Result<Vec<f64>> {
    Ok(sorted_eigen(&lap.l_sym)?.0)
}

/// Eigenvectors of the `n` smallest eigenvalues of `L_sym`, signs fixed so
/// that each column's largest-magnitude entry (lowest index on ties) is positive.
pub fn spectral_embedding(lap: &LaplacianPair, n: usize) -> Result<SoftEmbedding> {
    let size = lap.l_sym.nrows();
    if n == 0 || n > size {
        return Err(Error::InvalidInput(format!(
            "embedding dimension must be in 1..={size}, got {n}"
        )));
    }
    let (_, vectors) = sorted_eigen(&lap.l_sym)?;
    let mut q = vectors.columns(0, n).into_owned();
    for mut col in q.column_iter_mut() {
        let mut pivot = 0;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > col[pivot].abs() {
                pivot = i;
            }
        }
        if col[pivot] < 0.0 {
            col.neg_mut();
        }
    }
    SoftEmbedding::new(q)
}

#[derive(Debug, Clone)]
pub struct SpectralClustering {
    pub labels: HardSegmentation,
    pub embedding: SoftEmbedding,
    pub kmeans_cost: f64,
    /// Set when the affinity is identically zero; labels are then meaningless.
    pub degenerate: bool,
}

/// Affinity → normalized Laplacian → bottom-`n` embedding → k-means on the raw rows.
pub fn cluster(
    c: &CoefficientMatrix,
    n: usize,
    restarts: usize,
    seed: u64,
) -> Result<SpectralClustering> {
    cluster_with(
        c,
        n,
        &KMeansOptions {
            restarts,
            seed,
            ..KMeansOptions::default()
        },
    )
}

pub fn cluster_with(c: &CoefficientMatrix, n: usize, opts: &KMeansOptions) -> Result<SpectralClustering> {
    if n < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 clusters, got {n}")));
    }
    if n > c.len() {
        return Err(Error::InvalidInput(format!(
            "{n} clusters requested for {} points",
            c.len()
        )));
    }
    let affinity = affinity_from_coefficients(c);
    let degenerate = affinity.is_zero();
    let lap = normalized_laplacian(&affinity);
    let embedding = spectral_embedding(&lap, n)?;
    let km = kmeans_with(embedding.rows(), n, opts)?;
    Ok(SpectralClustering {
        labels: km.labels,
        embedding,
        kmeans_cost: km.cost,
        degenerate,
    })
}
