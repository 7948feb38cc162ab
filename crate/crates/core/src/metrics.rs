//! Clustering error, subspace-preserving rate and per-class graph connectivity.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use pathfinding::kuhn_munkres::kuhn_munkres;
use pathfinding::matrix::Matrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{normalized_laplacian_of, sorted_eigen};
use crate::types::{affinity_from_coefficients, AffinityMatrix, CoefficientMatrix};

const MAX_BRUTEFORCE_CLUSTERS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub err: f64,
    pub spr: Option<f64>,
    pub conn: Option<f64>,
    pub per_class_conn: Vec<f64>,
    /// Columns of C with zero ℓ1 norm; SPR counts them as preserving.
    pub zero_columns: usize,
}

fn confusion(truth: &[usize], pred: &[usize], n: usize) -> Result<Vec<Vec<i64>>> {
    if truth.len() != pred.len() {
        return Err(Error::shape(
            format!("{} predicted labels", truth.len()),
            pred.len(),
        ));
    }
    if truth.is_empty() {
        return Err(Error::InvalidInput("no labels".into()));
    }
    let mut m = vec![vec![0i64; n]; n];
    for (&t, &p) in truth.iter().zip(pred) {
        if t >= n || p >= n {
            return Err(Error::InvalidInput(format!(
                "label {} outside 1..={n}",
                t.max(p) + 1
            )));
        }
        m[t][p] += 1;
    }
    Ok(m)
}

/// `1 − max_π (1/N) Σ 1{π(truth_i) = pred_i}` via maximum-weight matching on
/// the confusion matrix. Labels are zero-based and must be `< n`.
pub fn clustering_error(truth: &[usize], pred: &[usize], n: usize) -> Result<f64> {
    let conf = confusion(truth, pred, n)?;
    let weights = Matrix::from_rows(conf).expect("rectangular confusion matrix");
    let (matched, _) = kuhn_munkres(&weights);
    Ok(1.0 - matched as f64 / truth.len() as f64)
}

/// Same quantity as [`clustering_error`] by enumerating all `n!` permutations.
pub fn clustering_error_bruteforce(truth: &[usize], pred: &[usize], n: usize) -> Result<f64> {
    if n > MAX_BRUTEFORCE_CLUSTERS {
        return Err(Error::InvalidInput(format!(
            "brute-force ERR supports n ≤ {MAX_BRUTEFORCE_CLUSTERS}, got {n}"
        )));
    }
    let conf = confusion(truth, pred, n)?;
    let mut perm: Vec<usize> = (0..n).collect();
    let score = |p: &[usize]| -> i64 { (0..n).map(|k| conf[k][p[k]]).sum() };
    let mut best = score(&perm);
    // Heap's algorithm, iterative form.
    let mut c = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            best = best.max(score(&perm));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok(1.0 - best as f64 / truth.len() as f64)
}

/// Mean over columns of the share of `‖c_j‖₁` carried by same-class rows.
/// Zero columns contribute 1.
pub fn subspace_preserving_rate(c: &CoefficientMatrix, truth: &[usize]) -> Result<f64> {
    let v = c.values();
    let n = v.ncols();
    if truth.len() != n {
        return Err(Error::shape(format!("{n} labels"), truth.len()));
    }
    let total: f64 = (0..n)
        .map(|j| {
            let col = v.column(j);
            let l1: f64 = col.iter().map(|x| x.abs()).sum();
            if l1 == 0.0 {
                return 1.0;
            }
            let inside: f64 = col
                .iter()
                .enumerate()
                .filter(|(i, _)| truth[*i] == truth[j])
                .map(|(_, x)| x.abs())
                .sum();
            inside / l1
        })
        .sum();
    Ok(total / n as f64)
}

pub fn zero_columns(c: &CoefficientMatrix) -> usize {
    c.values()
        .column_iter()
        .filter(|col| col.iter().all(|&x| x == 0.0))
        .count()
}

fn is_connected(a: &DMatrix<f64>) -> bool {
    let n = a.nrows();
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    while let Some(i) = queue.pop_front() {
        for j in 0..n {
            if !seen[j] && a[(i, j)] > 0.0 {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Second-smallest eigenvalue of `I − D^{-1/2}AD^{-1/2}`; exactly 0 for a
/// disconnected graph and for a single node.
pub fn algebraic_connectivity(a: &DMatrix<f64>) -> Result<f64> {
    if a.nrows() < 2 || !is_connected(a) {
        return Ok(0.0);
    }
    let lap = normalized_laplacian_of(a);
    let (values, _) = sorted_eigen(&lap.l_sym)?;
    Ok(values[1].max(0.0))
}

/// Mean over classes of the algebraic connectivity of each class's induced
/// subgraph, plus the per-class values in label order.
pub fn connectivity(a: &AffinityMatrix, truth: &[usize]) -> Result<(f64, Vec<f64>)> {
    let v = a.values();
    if truth.len() != v.nrows() {
        return Err(Error::shape(format!("{} labels", v.nrows()), truth.len()));
    }
    let classes = truth.iter().max().map_or(0, |m| m + 1);
    let mut per_class = Vec::new();
    for class in 0..classes {
        let members: Vec<usize> = (0..truth.len()).filter(|&i| truth[i] == class).collect();
        if members.is_empty() {
            continue;
        }
        let sub = DMatrix::from_fn(members.len(), members.len(), |r, c| v[(members[r], members[c])]);
        per_class.push(algebraic_connectivity(&sub)?);
    }
    if per_class.is_empty() {
        return Err(Error::InvalidInput("no classes".into()));
    }
    let mean = per_class.iter().sum::<f64>() / per_class.len() as f64;
    Ok((mean, per_class))
}

/// ERR, and SPR/CONN when coefficients are supplied.
pub fn evaluate(truth: &[usize], pred: &[usize], coeffs: Option<&CoefficientMatrix>) -> Result<EvalReport> {
    let n = truth.iter().chain(pred).max().map_or(1, |m| m + 1);
    let err = clustering_error(truth, pred, n)?;
    let (spr, conn, per_class_conn, zeros) = match coeffs {
        Some(c) => {
            let spr = subspace_preserving_rate(c, truth)?;
            let (conn, per_class) = connectivity(&affinity_from_coefficients(c), truth)?;
            (Some(spr), Some(conn), per_class, zero_columns(c))
        }
        None => (None, None, Vec::new(), 0),
    };
    Ok(EvalReport {
        err,
        spr,
        conn,
        per_class_conn,
        zero_columns: zeros,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn err_examples() {
        let truth = [0, 0, 1, 1, 2, 2];
        assert_eq!(clustering_error(&truth, &truth, 3).unwrap(), 0.0);
        let relabeled = [2, 2, 0, 0, 1, 1];
        assert_eq!(clustering_error(&truth, &relabeled, 3).unwrap(), 0.0);
        let pred = [0, 1, 1, 2, 2, 0];
        assert_eq!(clustering_error(&truth, &pred, 3).unwrap(), 0.5);
        assert_eq!(clustering_error_bruteforce(&truth, &pred, 3).unwrap(), 0.5);
    }

    #[test]
    fn err_errors() {
        assert!(clustering_error(&[0, 1], &[0], 2).is_err());
        assert!(clustering_error(&[0, 2], &[0, 1], 2).is_err());
        assert!(clustering_error_bruteforce(&[0], &[0], 9).is_err());
    }

    #[test]
    fn bruteforce_single_cluster() {
        assert_eq!(clustering_error_bruteforce(&[0, 0, 0], &[0, 0, 0], 1).unwrap(), 0.0);
    }

    #[test]
    fn err_invariant_under_relabeling() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let n = rng.random_range(2..7);
            let len = rng.random_range(1..30);
            let truth: Vec<usize> = (0..len).map(|_| rng.random_range(0..n)).collect();
            let pred: Vec<usize> = (0..len).map(|_| rng.random_range(0..n)).collect();
            let mut perm: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                perm.swap(i, rng.random_range(0..=i));
            }
            let base = clustering_error(&truth, &pred, n).unwrap();
            let pred_p: Vec<usize> = pred.iter().map(|&l| perm[l]).collect();
            let truth_p: Vec<usize> = truth.iter().map(|&l| perm[l]).collect();
            assert_eq!(clustering_error(&truth, &pred_p, n).unwrap(), base);
            assert_eq!(clustering_error(&truth_p, &pred, n).unwrap(), base);
        }
    }

    #[test]
    fn spr_examples() {
        let truth = [0, 0, 1, 1];
        let inside = DMatrix::from_row_slice(4, 4, &[
            0., 0.5, 0., 0.,
            -1., 0., 0., 0.,
            0., 0., 0., 2.,
            0., 0., 0.3, 0.,
        ]);
        let c = CoefficientMatrix::new(inside).unwrap();
        assert_eq!(subspace_preserving_rate(&c, &truth).unwrap(), 1.0);

        // Column 0: half in, half out. Others zero → count as 1.
        let mut half = DMatrix::zeros(4, 4);
        half[(1, 0)] = 0.4;
        half[(2, 0)] = -0.4;
        let c = CoefficientMatrix::new(half).unwrap();
        assert!((subspace_preserving_rate(&c, &truth).unwrap() - (0.5 + 3.0) / 4.0).abs() < 1e-15);
        assert_eq!(zero_columns(&c), 3);
    }

    #[test]
    fn spr_matches_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..20 {
            let c: DMatrix<f64> = DMatrix::from_fn(8, 8, |i, j| if i == j { 0.0 } else { rng.random_range(-1.0..1.0) });
            let truth: Vec<usize> = (0..8).map(|_| rng.random_range(0..3)).collect();
            let mut sum = 0.0;
            for j in 0..8 {
                let mut num = 0.0;
                let mut den = 0.0;
                for i in 0..8 {
                    let w = if truth[i] == truth[j] { 1.0 } else { 0.0 };
                    num += w * c[(i, j)].abs();
                    den += c[(i, j)].abs();
                }
                sum += num / den;
            }
            let got = subspace_preserving_rate(&CoefficientMatrix::new(c).unwrap(), &truth).unwrap();
            assert!((got - sum / 8.0).abs() < 1e-12);
        }
    }

    #[test]
    fn connectivity_examples() {
        let pair = AffinityMatrix::new(DMatrix::from_row_slice(2, 2, &[0., 1., 1., 0.])).unwrap();
        let (conn, per) = connectivity(&pair, &[0, 0]).unwrap();
        assert!((conn - 2.0).abs() < 1e-12);
        assert_eq!(per.len(), 1);

        // Class 0 = {0,1,2,3} split into two components; class 1 = {4} singleton.
        let mut a = DMatrix::zeros(5, 5);
        for (i, j) in [(0, 1), (2, 3)] {
            a[(i, j)] = 1.0;
            a[(j, i)] = 1.0;
        }
        let (_, per) = connectivity(&AffinityMatrix::new(a).unwrap(), &[0, 0, 0, 0, 1]).unwrap();
        assert_eq!(per, vec![0.0, 0.0]);
    }

    #[test]
    fn connectivity_matches_dense_eigensolver() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let n = 6;
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let v = rng.random_range(0.1..1.0);
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        let d: Vec<f64> = (0..n).map(|j| a.column(j).sum()).collect();
        let l = DMatrix::from_fn(n, n, |i, j| {
            let delta = if i == j { 1.0 } else { 0.0 };
            delta - a[(i, j)] / (d[i] * d[j]).sqrt()
        });
        let mut ev: Vec<f64> = l.symmetric_eigenvalues().iter().cloned().collect();
        ev.sort_by(f64::total_cmp);
        let got = algebraic_connectivity(&a).unwrap();
        assert!((got - ev[1]).abs() < 1e-9);
        assert!(got > 0.0);
    }

    #[test]
    fn evaluate_reports_all_fields() {
        let truth = [0, 0, 1, 1];
        let c = DMatrix::from_row_slice(4, 4, &[
            0., 1., 0., 0.,
            1., 0., 0., 0.,
            0., 0., 0., 1.,
            0., 0., 1., 0.,
        ]);
        let r = evaluate(&truth, &[1, 1, 0, 0], Some(&CoefficientMatrix::new(c).unwrap())).unwrap();
        assert_eq!(r.err, 0.0);
        assert_eq!(r.spr, Some(1.0));
        assert_eq!(r.per_class_conn.len(), 2);
        assert_eq!(r.zero_columns, 0);
    }
}
