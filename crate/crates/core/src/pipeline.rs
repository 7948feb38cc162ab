//! Alternating driver: sparse self-expression with structure feedback, then
//! spectral clustering, repeated until the segmentation settles.

use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::admm::{compute_scale, AdmmParams, AdmmResult, AdmmSolver, NoiseModel, threshold_weights};
use crate::error::{Error, Result};
use crate::spectral::{cluster_with, KMeansOptions};
use crate::types::{
    structure_from_hard, structure_from_soft, subspace_structured_norm, CoefficientMatrix, Constraint,
    DataMatrix, HardSegmentation, LinkKind, SideInfoMatrix, SoftEmbedding, StructureMatrix,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Θ from the k-means indicator; entries in {0, 1}.
    Hard,
    /// Θ from the row-normalized spectral embedding; entries in [0, 2].
    Soft,
}

impl Mode {
    pub fn default_alpha(self) -> f64 {
        match self {
            Mode::Hard => 0.1,
            Mode::Soft => 1.0,
        }
    }
}

/// How the ℓ1 and structure weights evolve over outer iterations `T = 1, 2, …`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Schedule {
    /// `‖C‖₁ + α‖C‖_Θ`
    Fixed,
    /// `‖C‖₁ + αν^{T−1}‖C‖_Θ`
    GrowAlpha,
    /// `ν^{1−T}‖C‖₁ + αν^{T−1}‖C‖_Θ`
    GrowAlphaShrinkL1,
}

/// Returns `(w1, α_eff)` for outer iteration `t ≥ 1`.
pub fn schedule_weights(schedule: Schedule, alpha: f64, nu: f64, t: usize) -> (f64, f64) {
    let growth = nu.powi(t.saturating_sub(1) as i32);
    match schedule {
        Schedule::Fixed => (1.0, alpha),
        Schedule::GrowAlpha => (1.0, alpha * growth),
        Schedule::GrowAlphaShrinkL1 => (1.0 / growth, alpha * growth),
    }
}

/// Outer stopping tolerances; `None` disables a rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopCriteria {
    /// Relative ℓ1 change of Θ.
    pub theta: Option<f64>,
    /// Relative ℓ1 change of C.
    pub coeff: Option<f64>,
    /// Decrease of ‖C‖_Θ.
    pub norm: Option<f64>,
    /// Decrease of the k-means cost.
    pub kmeans: Option<f64>,
}

impl StopCriteria {
    /// Θ rule at 1e−3; the C rule only under a fixed schedule, where it is meaningful.
    pub fn defaults_for(schedule: Schedule) -> Self {
        Self {
            theta: Some(1e-3),
            coeff: (schedule == Schedule::Fixed).then_some(1e-3),
            norm: None,
            kmeans: None,
        }
    }

    pub fn none() -> Self {
        Self {
            theta: None,
            coeff: None,
            norm: None,
            kmeans: None,
        }
    }
}

/// Data-independent ADMM settings; λ and μ0 are derived from the data scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmmSettings {
    pub rho: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub noise_model: NoiseModel,
}

impl Default for AdmmSettings {
    fn default() -> Self {
        Self {
            rho: 1.1,
            tol: 1e-6,
            max_iters: 200,
            noise_model: NoiseModel::L1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct S3cConfig {
    pub mode: Mode,
    pub lambda0: f64,
    pub alpha: f64,
    pub schedule: Schedule,
    pub nu: f64,
    pub t_max: usize,
    pub stop: StopCriteria,
    pub n_clusters: usize,
    pub seed: u64,
    pub kmeans_restarts: usize,
    pub admm: AdmmSettings,
    /// Keep full C and Θ matrices in every [`IterationRecord`].
    pub record_snapshots: bool,
}

pub const DEFAULT_LAMBDA0: f64 = 20.0;

impl S3cConfig {
    pub fn new(mode: Mode, n_clusters: usize) -> Self {
        let schedule = Schedule::GrowAlphaShrinkL1;
        Self {
            mode,
            lambda0: DEFAULT_LAMBDA0,
            alpha: mode.default_alpha(),
            schedule,
            nu: 1.2,
            t_max: 10,
            stop: StopCriteria::defaults_for(schedule),
            n_clusters,
            seed: 0,
            kmeans_restarts: 20,
            admm: AdmmSettings::default(),
            record_snapshots: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(m.to_string()));
        if !(self.lambda0 > 0.0 && self.lambda0.is_finite()) {
            return bad("λ0 must be positive");
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad("α must be nonnegative");
        }
        if !(self.nu > 1.0 && self.nu.is_finite()) {
            return bad("ν must exceed 1");
        }
        if self.t_max == 0 {
            return bad("T_max must be at least 1");
        }
        if self.n_clusters < 2 {
            return bad("cluster count must be at least 2");
        }
        if self.kmeans_restarts == 0 {
            return bad("k-means needs at least one restart");
        }
        let tols = [self.stop.theta, self.stop.coeff, self.stop.norm, self.stop.kmeans];
        if tols.iter().flatten().any(|&t| !(t > 0.0)) {
            return bad("stopping tolerances must be positive");
        }
        AdmmParams {
            rho: self.admm.rho,
            tol: self.admm.tol,
            max_iters: self.admm.max_iters,
            ..AdmmParams::new(1.0, 1.0)
        }
        .validate()
    }

    fn kmeans_options(&self) -> KMeansOptions {
        KMeansOptions {
            restarts: self.kmeans_restarts,
            seed: self.seed,
            ..KMeansOptions::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    ThetaConverged,
    CConverged,
    NormConverged,
    KmeansConverged,
    MaxIters,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshots {
    pub c: DMatrix<f64>,
    pub theta: StructureMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub t: usize,
    pub w1: f64,
    pub alpha_eff: f64,
    /// ‖C_T‖_Θ with Θ from this iteration's clustering.
    pub structured_norm: f64,
    pub kmeans_cost: f64,
    /// 0 when the weights were unchanged and the previous solution was reused.
    pub admm_iters: usize,
    pub admm_converged: bool,
    pub admm_residual: f64,
    /// `‖Θ_{T−1} − Θ_T‖₁ / ‖Θ_{T−1}‖₁`; absent at T = 1.
    pub rel_change_theta: Option<f64>,
    /// `‖C_{T−1} − C_T‖₁ / ‖C_{T−1}‖₁`; absent at T = 1.
    pub rel_change_c: Option<f64>,
    /// Labels from this iteration's clustering; zero-based in memory,
    /// one-based when serialized like every other label file.
    #[serde(with = "one_based")]
    pub labels: Vec<usize>,
    pub c_hash: u64,
    pub theta_hash: u64,
    #[serde(skip)]
    pub snapshots: Option<Snapshots>,
}

#[derive(Debug, Clone)]
pub struct ClusterResult {
    pub labels: HardSegmentation,
    pub coefficients: CoefficientMatrix,
    pub error: DMatrix<f64>,
    pub embedding: SoftEmbedding,
    pub theta: StructureMatrix,
    pub history: Vec<IterationRecord>,
    pub stop_reason: StopReason,
}

/// Failure inside the alternating loop, with the iterations completed so far.
#[derive(Debug, thiserror::Error)]
#[error("{error} (after {} completed outer iterations)", history.len())]
pub struct PipelineError {
    #[source]
    pub error: Error,
    pub history: Vec<IterationRecord>,
}

impl From<Error> for PipelineError {
    fn from(error: Error) -> Self {
        Self {
            error,
            history: Vec::new(),
        }
    }
}

impl From<PipelineError> for Error {
    fn from(e: PipelineError) -> Self {
        e.error
    }
}

mod one_based {
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(labels: &[usize], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(labels.iter().map(|l| l + 1))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<usize>, D::Error> {
        Vec::<usize>::deserialize(d)?
            .into_iter()
            .map(|l| l.checked_sub(1).ok_or_else(|| D::Error::custom("labels are one-based")))
            .collect()
    }
}

/// FNV-1a over the bit patterns of the entries.
pub fn matrix_hash(m: &DMatrix<f64>) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in m.iter() {
        for b in v.to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

fn l1(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v.abs()).sum()
}

fn relative_l1_change(prev: &DMatrix<f64>, next: &DMatrix<f64>) -> Option<f64> {
    let den = l1(prev);
    let num = l1(&(prev - next));
    if den > 0.0 {
        Some(num / den)
    } else if num == 0.0 {
        Some(0.0)
    } else {
        None
    }
}

/// Builds Ψ from pairwise constraints on `n` points (zero-based indices).
/// Repeated identical constraints collapse; conflicting ones are an error.
pub fn encode_side_info(constraints: &[Constraint], n: usize) -> Result<SideInfoMatrix> {
    let mut values = DMatrix::from_element(n, n, 1.0);
    let mut seen: HashMap<(usize, usize), LinkKind> = HashMap::new();
    let mut kept = Vec::with_capacity(constraints.len());
    for c in constraints {
        if c.i >= n || c.j >= n {
            return Err(Error::InvalidInput(format!(
                "constraint ({}, {}) outside 1..={n}",
                c.i + 1,
                c.j + 1
            )));
        }
        if c.i == c.j {
            return Err(Error::InvalidInput(format!("constraint links point {} to itself", c.i + 1)));
        }
        match seen.get(&c.pair()) {
            Some(&k) if k != c.kind => {
                let (i, j) = c.pair();
                return Err(Error::InconsistentSideInfo { i: i + 1, j: j + 1 });
            }
            Some(_) => continue,
            None => {
                seen.insert(c.pair(), c.kind);
                kept.push(*c);
            }
        }
        let w = match c.kind {
            LinkKind::Must => (-1.0f64).exp(),
            LinkKind::Cannot => 1.0f64.exp(),
        };
        values[(c.i, c.j)] = w;
        values[(c.j, c.i)] = w;
    }
    Ok(SideInfoMatrix::from_parts(values, kept))
}

/// Plain sparse subspace clustering: one solve with Θ = 0, one clustering.
pub fn run_ssc(x: &DataMatrix, cfg: &S3cConfig) -> Result<ClusterResult, PipelineError> {
    let cfg = S3cConfig {
        mode: Mode::Hard,
        t_max: 1,
        ..cfg.clone()
    };
    run_s3c(x, &cfg, None)
}

/// Alternates weighted sparse self-expression and spectral clustering.
/// Iteration 1 uses Θ = 0 and is therefore plain SSC (with Ψ when given).
pub fn run_s3c(
    x: &DataMatrix,
    cfg: &S3cConfig,
    side: Option<&SideInfoMatrix>,
) -> Result<ClusterResult, PipelineError> {
    cfg.validate()?;
    let n = x.num_points();
    if cfg.n_clusters > n {
        return Err(Error::InvalidInput(format!(
            "{} clusters requested for {n} points",
            cfg.n_clusters
        ))
        .into());
    }
    let ones;
    let psi = match side {
        Some(s) if s.len() != n => {
            return Err(Error::shape(format!("{n}×{n} side information"), s.len()).into())
        }
        Some(s) => s,
        None => {
            ones = SideInfoMatrix::ones(n);
            &ones
        }
    };

    let scale = compute_scale(x)?;
    let base = AdmmParams {
        rho: cfg.admm.rho,
        tol: cfg.admm.tol,
        max_iters: cfg.admm.max_iters,
        noise_model: cfg.admm.noise_model,
        ..AdmmParams::from_scale(cfg.lambda0, scale)
    };
    let solver = AdmmSolver::new(x)?;
    let kopts = cfg.kmeans_options();

    let mut history: Vec<IterationRecord> = Vec::new();
    let fail = |error: Error, history: Vec<IterationRecord>| PipelineError { error, history };

    let mut theta = StructureMatrix::zeros(n);
    let mut previous: Option<(DMatrix<f64>, AdmmResult)> = None;
    let mut outcome = None;

    for t in 1..=cfg.t_max {
        let (w1, alpha_eff) = schedule_weights(cfg.schedule, cfg.alpha, cfg.nu, t);
        let weights = match threshold_weights(&theta, psi, w1, alpha_eff) {
            Ok(w) => w,
            Err(e) => return Err(fail(e, history)),
        };
        let (solution, admm_iters) = match previous {
            // Same weights, same convex problem: keep its solution.
            Some((ref w, ref r)) if *w == weights => (r.clone(), 0),
            _ => {
                let params = AdmmParams { w1, alpha_eff, ..base };
                let warm = previous.as_ref().map(|(_, r)| &r.state);
                match solver.solve_weighted(&weights, &params, warm) {
                    Ok(r) => {
                        let used = r.iterations_used;
                        (r, used)
                    }
                    Err(e) => return Err(fail(e, history)),
                }
            }
        };

        let clustering = match cluster_with(&solution.c, cfg.n_clusters, &kopts) {
            Ok(c) if c.degenerate => return Err(fail(Error::DegenerateAffinity, history)),
            Ok(c) => c,
            Err(e) => return Err(fail(e, history)),
        };
        let next_theta = match cfg.mode {
            Mode::Hard => structure_from_hard(&clustering.labels),
            Mode::Soft => structure_from_soft(&clustering.embedding),
        };
        let structured_norm = subspace_structured_norm(&solution.c, &next_theta)
            .expect("Θ and C share the point count");

        let prev_record = history.last();
        let rel_change_theta = prev_record.and(relative_l1_change(theta.values(), next_theta.values()));
        let rel_change_c = previous
            .as_ref()
            .and_then(|(_, r)| relative_l1_change(r.c.values(), solution.c.values()));

        let record = IterationRecord {
            t,
            w1,
            alpha_eff,
            structured_norm,
            kmeans_cost: clustering.kmeans_cost,
            admm_iters,
            admm_converged: solution.converged,
            admm_residual: solution.final_residual,
            rel_change_theta,
            rel_change_c,
            labels: clustering.labels.labels().to_vec(),
            c_hash: matrix_hash(solution.c.values()),
            theta_hash: matrix_hash(next_theta.values()),
            snapshots: cfg.record_snapshots.then(|| Snapshots {
                c: solution.c.values().clone(),
                theta: next_theta.clone(),
            }),
        };

        let stop = prev_record.and_then(|prev| {
            let below = |v: Option<f64>, tol: Option<f64>| matches!((v, tol), (Some(v), Some(tol)) if v < tol);
            if below(record.rel_change_theta, cfg.stop.theta) {
                Some(StopReason::ThetaConverged)
            } else if below(record.rel_change_c, cfg.stop.coeff) {
                Some(StopReason::CConverged)
            } else if below(Some(prev.structured_norm - record.structured_norm), cfg.stop.norm) {
                Some(StopReason::NormConverged)
            } else if below(Some(prev.kmeans_cost - record.kmeans_cost), cfg.stop.kmeans) {
                Some(StopReason::KmeansConverged)
            } else {
                None
            }
        });

        history.push(record);
        theta = next_theta;
        let reason = stop.unwrap_or(StopReason::MaxIters);
        if stop.is_some() || t == cfg.t_max {
            outcome = Some((solution, clustering, reason));
            break;
        }
        previous = Some((weights, solution));
    }

    let (solution, clustering, stop_reason) = outcome.expect("t_max ≥ 1 guarantees an outcome");
    Ok(ClusterResult {
        labels: clustering.labels,
        coefficients: solution.c,
        error: solution.e,
        embedding: clustering.embedding,
        theta,
        history,
        stop_reason,
    })
}
