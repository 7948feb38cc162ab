//! Flat run configuration shared by the CLI, the bench harness and the C API.
//!
//! Every key is optional on input; [`RunConfig::materialize`] fills derived
//! defaults so that the persisted snapshot states every value used.
//! Stopping tolerances use `0` for "rule disabled".

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::admm::NoiseModel;
use crate::bench::Method;
use crate::error::{Error, Result};
use crate::pipeline::{AdmmSettings, Mode, S3cConfig, Schedule, StopCriteria, DEFAULT_LAMBDA0};
use crate::synth::SynthSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodKind {
    Ssc,
    S3c,
    Cs3c,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub method: MethodKind,
    pub mode: Mode,
    pub lambda0: f64,
    pub alpha_hard: f64,
    pub alpha_soft: f64,
    pub schedule: Schedule,
    pub nu: f64,
    pub t_max: usize,
    /// Relative change of Θ.
    pub stop_eps1: Option<f64>,
    /// Relative change of C; defaults on only under the fixed schedule.
    pub stop_eps2: Option<f64>,
    /// Decrease of the structured norm.
    pub stop_eps3: Option<f64>,
    /// Decrease of the k-means cost.
    pub stop_eps4: Option<f64>,
    /// Taken from the truth labels or the synthetic spec when absent.
    pub n_clusters: Option<usize>,
    pub seed: u64,
    pub kmeans_restarts: usize,
    pub rho: f64,
    pub admm_tol: f64,
    pub admm_max_iters: usize,
    pub noise_model: NoiseModel,
    /// Scale data columns to unit ℓ2 norm before clustering.
    pub normalize: bool,

    pub ambient_dim: usize,
    pub subspace_dim: usize,
    pub n_subspaces: usize,
    pub points_per_subspace: usize,
    pub corruption: f64,
    pub noise_factor: f64,

    pub trials: usize,
    pub levels: Vec<f64>,
    pub methods: Vec<Method>,
    pub side_fractions: Vec<f64>,
    /// Corruption level of the synthetic data used by side-information sweeps.
    pub side_corruption: f64,
    /// Worker threads for sweeps; 0 uses all cores.
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let synth = SynthSpec::default();
        Self {
            method: MethodKind::S3c,
            mode: Mode::Hard,
            lambda0: DEFAULT_LAMBDA0,
            alpha_hard: Mode::Hard.default_alpha(),
            alpha_soft: Mode::Soft.default_alpha(),
            schedule: Schedule::GrowAlphaShrinkL1,
            nu: 1.2,
            t_max: 10,
            stop_eps1: None,
            stop_eps2: None,
            stop_eps3: None,
            stop_eps4: None,
            n_clusters: None,
            seed: 0,
            kmeans_restarts: 20,
            rho: AdmmSettings::default().rho,
            admm_tol: AdmmSettings::default().tol,
            admm_max_iters: AdmmSettings::default().max_iters,
            noise_model: NoiseModel::L1,
            normalize: true,
            ambient_dim: synth.ambient_dim,
            subspace_dim: synth.subspace_dim,
            n_subspaces: synth.n_subspaces,
            points_per_subspace: synth.points_per_subspace,
            corruption: synth.corruption,
            noise_factor: synth.noise_factor,
            trials: 20,
            levels: (0..10).map(|k| k as f64 / 10.0).collect(),
            methods: vec![Method::Ssc, Method::S3cHard, Method::S3cSoft],
            side_fractions: vec![0.0, 0.05, 0.10, 0.15],
            side_corruption: 0.2,
            threads: 0,
        }
    }
}

fn tolerance(v: Option<f64>) -> Option<f64> {
    v.filter(|&t| t != 0.0)
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let mut cfg: RunConfig = serde_json::from_str(text)?;
        cfg.materialize();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            column: Some(e.column()),
            message: e.to_string(),
        })?;
        cfg.materialize();
        Ok(cfg)
    }

    /// Fills schedule-dependent stopping defaults. Idempotent.
    pub fn materialize(&mut self) {
        let d = StopCriteria::defaults_for(self.schedule);
        self.stop_eps1.get_or_insert(d.theta.unwrap_or(0.0));
        self.stop_eps2.get_or_insert(d.coeff.unwrap_or(0.0));
        self.stop_eps3.get_or_insert(d.norm.unwrap_or(0.0));
        self.stop_eps4.get_or_insert(d.kmeans.unwrap_or(0.0));
    }

    pub fn alpha_for(&self, mode: Mode) -> f64 {
        match mode {
            Mode::Hard => self.alpha_hard,
            Mode::Soft => self.alpha_soft,
        }
    }

    pub fn synth_spec(&self, corruption: f64, seed: u64) -> SynthSpec {
        SynthSpec {
            ambient_dim: self.ambient_dim,
            subspace_dim: self.subspace_dim,
            n_subspaces: self.n_subspaces,
            points_per_subspace: self.points_per_subspace,
            corruption,
            noise_factor: self.noise_factor,
            seed,
        }
    }

    pub fn stop_criteria(&self) -> StopCriteria {
        let mut cfg = self.clone();
        cfg.materialize();
        StopCriteria {
            theta: tolerance(cfg.stop_eps1),
            coeff: tolerance(cfg.stop_eps2),
            norm: tolerance(cfg.stop_eps3),
            kmeans: tolerance(cfg.stop_eps4),
        }
    }

    /// Pipeline configuration for `mode` with `n_clusters` clusters.
    pub fn s3c_config(&self, mode: Mode, n_clusters: usize) -> S3cConfig {
        S3cConfig {
            mode,
            lambda0: self.lambda0,
            alpha: self.alpha_for(mode),
            schedule: self.schedule,
            nu: self.nu,
            t_max: self.t_max,
            stop: self.stop_criteria(),
            n_clusters,
            seed: self.seed,
            kmeans_restarts: self.kmeans_restarts,
            admm: AdmmSettings {
                rho: self.rho,
                tol: self.admm_tol,
                max_iters: self.admm_max_iters,
                noise_model: self.noise_model,
            },
            record_snapshots: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        for (name, v) in [
            ("stop_eps1", self.stop_eps1),
            ("stop_eps2", self.stop_eps2),
            ("stop_eps3", self.stop_eps3),
            ("stop_eps4", self.stop_eps4),
        ] {
            if let Some(v) = v {
                if !(v >= 0.0 && v.is_finite()) {
                    return bad(format!("{name} must be a nonnegative number (0 disables), got {v}"));
                }
            }
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        for &p in self.levels.iter().chain(&self.side_fractions).chain([&self.corruption, &self.side_corruption]) {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("fraction {p} outside [0, 1]"));
            }
        }
        self.synth_spec(self.corruption, self.seed).validate()?;
        self.s3c_config(self.mode, self.n_clusters.unwrap_or(2).max(2)).validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_materializes_defaults() {
        let cfg = RunConfig::from_json("{}").unwrap();
        assert_eq!(cfg.stop_eps1, Some(1e-3));
        assert_eq!(cfg.stop_eps2, Some(0.0));
        assert_eq!(cfg.stop_criteria(), StopCriteria::defaults_for(Schedule::GrowAlphaShrinkL1));
        assert_eq!(cfg.levels.len(), 10);
        cfg.validate().unwrap();

        let fixed = RunConfig::from_json(r#"{"schedule": "fixed"}"#).unwrap();
        assert_eq!(fixed.stop_eps2, Some(1e-3));
        let off = RunConfig::from_json(r#"{"schedule": "fixed", "stop_eps2": 0}"#).unwrap();
        assert_eq!(off.stop_criteria().coeff, None);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_json(r#"{"lambda": 3}"#).is_err());
        assert!(RunConfig::from_json(r#"{"mode": "fuzzy"}"#).is_err());
    }

    #[test]
    fn snapshot_round_trips() {
        let cfg = RunConfig::from_json(r#"{"lambda0": 0.08, "mode": "soft", "methods": ["ssc", "cs3c-soft"]}"#).unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(RunConfig::from_json(&text).unwrap(), cfg);
        let s = cfg.s3c_config(Mode::Soft, 4);
        assert_eq!((s.alpha, s.lambda0, s.n_clusters), (1.0, 0.08, 4));
    }

    #[test]
    fn validation_catches_bad_values() {
        assert!(RunConfig { trials: 0, ..RunConfig::default() }.validate().is_err());
        assert!(RunConfig { levels: vec![1.2], ..RunConfig::default() }.validate().is_err());
        assert!(RunConfig { stop_eps3: Some(-1.0), ..RunConfig::default() }.validate().is_err());
        assert!(RunConfig { nu: 0.9, ..RunConfig::default() }.validate().is_err());
    }
}
