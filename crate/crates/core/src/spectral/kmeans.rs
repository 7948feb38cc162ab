//! Lloyd's k-means with k-means++ seeding and multiple restarts.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::types::HardSegmentation;

const MAX_RESEEDS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansOptions {
    pub restarts: usize,
    pub max_iters: usize,
    /// Lloyd stops once no centroid moves farther than this.
    pub tol: f64,
    pub seed: u64,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self {
            restarts: 20,
            max_iters: 300,
            tol: 1e-9,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KMeansResult {
    pub labels: HardSegmentation,
    /// Sum of squared distances to the assigned centroids.
    pub cost: f64,
    pub restarts_run: usize,
    /// Index of the restart that produced `labels`.
    pub best_restart: usize,
}

/// One Lloyd run from fixed initial centers.
#[derive(Debug, Clone)]
pub struct LloydRun {
    pub labels: Vec<usize>,
    pub centers: DMatrix<f64>,
    pub cost: f64,
    /// Cost after every centroid update; non-increasing.
    pub cost_trace: Vec<f64>,
}

fn sq_dist(points: &DMatrix<f64>, i: usize, centers: &DMatrix<f64>, k: usize) -> f64 {
    points
        .row(i)
        .iter()
        .zip(centers.row(k).iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

fn assign(points: &DMatrix<f64>, centers: &DMatrix<f64>) -> Vec<usize> {
    (0..points.nrows())
        .map(|i| {
            let mut best = (f64::INFINITY, 0);
            for k in 0..centers.nrows() {
                let d = sq_dist(points, i, centers, k);
                if d < best.0 {
                    best = (d, k);
                }
            }
            best.1
        })
        .collect()
}

fn centroids(points: &DMatrix<f64>, labels: &[usize], k: usize) -> (DMatrix<f64>, Vec<usize>) {
    let mut centers = DMatrix::zeros(k, points.ncols());
    let mut counts = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        let mut row = centers.row_mut(l);
        row += points.row(i);
    }
    for (l, &count) in counts.iter().enumerate() {
        if count > 0 {
            let mut row = centers.row_mut(l);
            row /= count as f64;
        }
    }
    (centers, counts)
}

fn cost_of(points: &DMatrix<f64>, labels: &[usize], centers: &DMatrix<f64>) -> f64 {
    labels
        .iter()
        .enumerate()
        .map(|(i, &l)| sq_dist(points, i, centers, l))
        .sum()
}

/// Moves the point farthest from its centroid (taken from a cluster with at
/// least two members) into each empty cluster.
fn relocate_empty(points: &DMatrix<f64>, labels: &mut [usize], k: usize) {
    loop {
        let (centers, counts) = centroids(points, labels, k);
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        let mut far = (f64::NEG_INFINITY, usize::MAX);
        for (i, &l) in labels.iter().enumerate() {
            if counts[l] > 1 {
                let d = sq_dist(points, i, &centers, l);
                if d > far.0 {
                    far = (d, i);
                }
            }
        }
        labels[far.1] = empty;
    }
}

/// Lloyd iterations from `init` centers. Returns `None` when a cluster
/// empties and `relocate` is false.
pub fn lloyd(
    points: &DMatrix<f64>,
    init: DMatrix<f64>,
    max_iters: usize,
    tol: f64,
    relocate: bool,
) -> Option<LloydRun> {
    let k = init.nrows();
    let mut labels = assign(points, &init);
    let mut old_centers = init;
    let mut trace = Vec::new();
    for _ in 0..max_iters.max(1) {
        let (centers, counts) = centroids(points, &labels, k);
        let centers = if counts.contains(&0) {
            if !relocate {
                return None;
            }
            relocate_empty(points, &mut labels, k);
            centroids(points, &labels, k).0
        } else {
            centers
        };
        trace.push(cost_of(points, &labels, &centers));
        let shift = (&centers - &old_centers)
            .row_iter()
            .map(|r| r.norm())
            .fold(0.0, f64::max);
        let next = assign(points, &centers);
        old_centers = centers;
        if next == labels || shift < tol {
            break;
        }
        labels = next;
    }
    let (mut centers, counts) = centroids(points, &labels, k);
    if counts.contains(&0) {
        if !relocate {
            return None;
        }
        relocate_empty(points, &mut labels, k);
        centers = centroids(points, &labels, k).0;
    }
    let cost = cost_of(points, &labels, &centers);
    if trace.last().is_none_or(|&last| cost < last) {
        trace.push(cost);
    }
    Some(LloydRun {
        labels,
        centers,
        cost,
        cost_trace: trace,
    })
}

/// k-means++ seeding: first center uniform, then proportional to squared
/// distance from the nearest chosen center.
pub fn kmeans_plus_plus(points: &DMatrix<f64>, k: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let n = points.nrows();
    let mut chosen = Vec::with_capacity(k);
    chosen.push(rng.random_range(0..n));
    let mut d2: Vec<f64> = (0..n)
        .map(|i| {
            let c = chosen[0];
            (points.row(i) - points.row(c)).norm_squared()
        })
        .collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 {
                    pick = Some(i);
                    if target < w {
                        break;
                    }
                    target -= w;
                }
            }
            pick.expect("positive total implies a positive weight")
        } else {
            // All remaining points coincide with chosen centers.
            let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen.push(next);
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min((points.row(i) - points.row(next)).norm_squared());
        }
    }
    DMatrix::from_fn(k, points.ncols(), |r, c| points[(chosen[r], c)])
}

fn one_restart(points: &DMatrix<f64>, k: usize, opts: &KMeansOptions, restart: usize) -> LloydRun {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(restart as u64);
    for _ in 0..MAX_RESEEDS {
        let init = kmeans_plus_plus(points, k, &mut rng);
        if let Some(run) = lloyd(points, init, opts.max_iters, opts.tol, false) {
            return run;
        }
    }
    let init = kmeans_plus_plus(points, k, &mut rng);
    lloyd(points, init, opts.max_iters, opts.tol, true).expect("relocation never leaves empties")
}

/// Clusters the rows of `points` into `k` groups, keeping the lowest-cost
/// restart (ties go to the lowest restart index).
pub fn kmeans_with(points: &DMatrix<f64>, k: usize, opts: &KMeansOptions) -> Result<KMeansResult> {
    let n = points.nrows();
    if k == 0 || k > n {
        return Err(Error::InvalidInput(format!(
            "k-means needs 1 ≤ k ≤ N, got k = {k}, N = {n}"
        )));
    }
    if opts.restarts == 0 {
        return Err(Error::InvalidInput("k-means needs at least one restart".into()));
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite k-means input".into()));
    }
    let mut best: Option<(usize, LloydRun)> = None;
    for restart in 0..opts.restarts {
        let run = one_restart(points, k, opts, restart);
        if best.as_ref().is_none_or(|(_, b)| run.cost < b.cost) {
            best = Some((restart, run));
        }
    }
    let (best_restart, run) = best.expect("at least one restart");
    Ok(KMeansResult {
        labels: HardSegmentation::new(run.labels, k)?,
        cost: run.cost,
        restarts_run: opts.restarts,
        best_restart,
    })
}

pub fn kmeans(points: &DMatrix<f64>, k: usize, restarts: usize, seed: u64) -> Result<KMeansResult> {
    kmeans_with(
        points,
        k,
        &KMeansOptions {
            restarts,
            seed,
            ..KMeansOptions::default()
        },
    )
}
