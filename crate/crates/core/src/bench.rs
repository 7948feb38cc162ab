//! Seeded multi-trial sweeps: methods × corruption levels on synthetic data,
//! and side-information fractions for the constrained variant.
//!
//! Each (level, trial) cell builds one dataset and runs every method on it.
//! Every [`TrialRecord`] carries a snapshot sufficient to replay it.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::io;
use crate::metrics::evaluate;
use crate::pipeline::{encode_side_info, run_s3c, run_ssc, Mode, S3cConfig, StopReason};
use crate::synth::{generate, sample_side_info, SynthSpec};
use crate::types::DataMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Ssc,
    S3cHard,
    S3cSoft,
    Cs3cHard,
    Cs3cSoft,
}

impl Method {
    pub fn mode(self) -> Mode {
        match self {
            Method::Ssc | Method::S3cHard | Method::Cs3cHard => Mode::Hard,
            Method::S3cSoft | Method::Cs3cSoft => Mode::Soft,
        }
    }

    pub fn uses_side_info(self) -> bool {
        matches!(self, Method::Cs3cHard | Method::Cs3cSoft)
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Ssc => "ssc",
            Method::S3cHard => "s3c-hard",
            Method::S3cSoft => "s3c-soft",
            Method::Cs3cHard => "cs3c-hard",
            Method::Cs3cSoft => "cs3c-soft",
        }
    }
}

/// Where a trial's data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetSource {
    Synthetic(SynthSpec),
    Files { data: PathBuf, truth: PathBuf },
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub data: DataMatrix,
    pub truth: Vec<usize>,
    pub n_clusters: usize,
}

impl DatasetSource {
    pub fn load(&self, normalize: bool) -> Result<Dataset> {
        match self {
            DatasetSource::Synthetic(spec) => {
                let ds = generate(spec)?;
                Ok(Dataset {
                    data: ds.data(normalize)?,
                    truth: ds.truth,
                    n_clusters: spec.n_subspaces,
                })
            }
            DatasetSource::Files { data, truth } => {
                let x = io::load_matrix(data, io::Delimiter::for_path(data))?;
                let truth = io::load_labels(truth)?;
                if truth.len() != x.ncols() {
                    return Err(Error::shape(format!("{} labels", x.ncols()), truth.len()));
                }
                let n_clusters = truth.iter().max().map_or(0, |m| m + 1);
                Ok(Dataset {
                    data: DataMatrix::new(x, normalize)?,
                    truth,
                    n_clusters,
                })
            }
        }
    }
}

/// Everything needed to rerun one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSnapshot {
    pub dataset: DatasetSource,
    pub normalize: bool,
    pub config: S3cConfig,
    pub side_fraction: f64,
    pub side_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    pub err: f64,
    pub spr: Option<f64>,
    pub conn: Option<f64>,
    pub outer_iters: usize,
    pub admm_iters: usize,
    pub stop_reason: StopReason,
    pub constraints: usize,
    /// Structure matrices inspected, and how many broke their range,
    /// symmetry or zero-diagonal invariants.
    pub theta_checked: usize,
    pub theta_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub method: Method,
    /// Corruption level, or side-information fraction in side-information sweeps.
    pub level: f64,
    pub trial: usize,
    pub seed: u64,
    pub snapshot: TrialSnapshot,
    pub metrics: Option<TrialMetrics>,
    pub failure: Option<String>,
    pub wall_time_secs: f64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for a (level, trial) cell; stable under reordering of the level list.
pub fn derive_seed(base: u64, level: f64, trial: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(base) ^ level.to_bits()) ^ trial as u64)
}

/// Runs one method on an already loaded dataset.
pub fn execute(method: Method, snapshot: &TrialSnapshot, ds: &Dataset) -> Result<TrialMetrics> {
    let mut cfg = snapshot.config.clone();
    cfg.record_snapshots = true;
    let constraints = if method.uses_side_info() {
        sample_side_info(&ds.truth, snapshot.side_fraction, snapshot.side_seed)?
    } else {
        Vec::new()
    };
    let result = if method == Method::Ssc {
        run_ssc(&ds.data, &cfg)
    } else {
        let psi = method
            .uses_side_info()
            .then(|| encode_side_info(&constraints, ds.data.num_points()))
            .transpose()?;
        run_s3c(&ds.data, &cfg, psi.as_ref())
    }?;

    let thetas: Vec<_> = result
        .history
        .iter()
        .filter_map(|r| r.snapshots.as_ref().map(|s| &s.theta))
        .collect();
    let violations = thetas.iter().filter(|t| t.check_invariants().is_err()).count();
    let report = evaluate(&ds.truth, result.labels.labels(), Some(&result.coefficients))?;
    Ok(TrialMetrics {
        err: report.err,
        spr: report.spr,
        conn: report.conn,
        outer_iters: result.history.len(),
        admm_iters: result.history.iter().map(|r| r.admm_iters).sum(),
        stop_reason: result.stop_reason,
        constraints: constraints.len(),
        theta_checked: thetas.len(),
        theta_violations: violations,
    })
}

/// Reruns a recorded trial from its snapshot alone.
pub fn replay(record: &TrialRecord) -> Result<TrialMetrics> {
    let ds = record.snapshot.dataset.load(record.snapshot.normalize)?;
    execute(record.method, &record.snapshot, &ds)
}

struct Cell {
    level: f64,
    trial: usize,
    seed: u64,
    dataset: DatasetSource,
    side_fraction: f64,
    side_seed: u64,
}

fn run_cell(cell: &Cell, methods: &[Method], cfg: &RunConfig, loaded: Option<&Dataset>) -> Vec<TrialRecord> {
    let owned;
    let ds = match loaded {
        Some(ds) => Ok(ds),
        None => {
            owned = cell.dataset.load(cfg.normalize);
            owned.as_ref().map_err(|e| e.to_string())
        }
    };
    methods
        .iter()
        .map(|&method| {
            let n_clusters = ds.as_ref().map_or(cfg.n_subspaces, |d| d.n_clusters);
            let mut config = cfg.s3c_config(method.mode(), cfg.n_clusters.unwrap_or(n_clusters));
            config.seed = cell.seed;
            let snapshot = TrialSnapshot {
                dataset: cell.dataset.clone(),
                normalize: cfg.normalize,
                config,
                side_fraction: cell.side_fraction,
                side_seed: cell.side_seed,
            };
            let start = Instant::now();
            let outcome = match &ds {
                Ok(ds) => execute(method, &snapshot, ds).map_err(|e| e.to_string()),
                Err(e) => Err(e.clone()),
            };
            let wall_time_secs = start.elapsed().as_secs_f64();
            let (metrics, failure) = match outcome {
                Ok(m) => (Some(m), None),
                Err(e) => (None, Some(e)),
            };
            TrialRecord {
                method,
                level: cell.level,
                trial: cell.trial,
                seed: cell.seed,
                snapshot,
                metrics,
                failure,
                wall_time_secs,
            }
        })
        .collect()
}

fn run_cells(cells: &[Cell], methods: &[Method], cfg: &RunConfig, loaded: Option<&Dataset>) -> Result<Vec<TrialRecord>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
    let mut records: Vec<TrialRecord> = pool.install(|| {
        cells
            .par_iter()
            .flat_map_iter(|cell| run_cell(cell, methods, cfg, loaded))
            .collect()
    });
    records.sort_by(|a, b| {
        a.level
            .total_cmp(&b.level)
            .then(a.trial.cmp(&b.trial))
            .then(a.method.cmp(&b.method))
    });
    Ok(records)
}

/// Methods × corruption levels × trials on synthetic data, seeded from `cfg.seed`.
pub fn run_table1(cfg: &RunConfig) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    if cfg.methods.is_empty() {
        return Err(Error::InvalidInput("no methods selected".into()));
    }
    let cells: Vec<Cell> = cfg
        .levels
        .iter()
        .flat_map(|&level| (0..cfg.trials).map(move |trial| (level, trial)))
        .map(|(level, trial)| {
            let seed = derive_seed(cfg.seed, level, trial);
            Cell {
                level,
                trial,
                seed,
                dataset: DatasetSource::Synthetic(cfg.synth_spec(level, seed)),
                side_fraction: 0.0,
                side_seed: seed,
            }
        })
        .collect();
    run_cells(&cells, &cfg.methods, cfg, None)
}

/// Constrained hard and soft runs over `cfg.side_fractions`. Every fraction
/// of a given trial sees the same dataset; only the constraint sample varies.
/// `data = None` uses synthetic data at `cfg.side_corruption`.
pub fn run_sideinfo_sweep(cfg: &RunConfig, data: Option<(&Path, &Path)>) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let methods = [Method::Cs3cHard, Method::Cs3cSoft];
    let fixed = data.map(|(d, t)| DatasetSource::Files {
        data: d.to_path_buf(),
        truth: t.to_path_buf(),
    });
    let loaded = fixed.as_ref().map(|src| src.load(cfg.normalize)).transpose()?;
    let cells: Vec<Cell> = (0..cfg.trials)
        .flat_map(|trial| cfg.side_fractions.iter().map(move |&f| (f, trial)))
        .map(|(fraction, trial)| {
            let seed = derive_seed(cfg.seed, -1.0, trial);
            let dataset = fixed
                .clone()
                .unwrap_or_else(|| DatasetSource::Synthetic(cfg.synth_spec(cfg.side_corruption, seed)));
            Cell {
                level: fraction,
                trial,
                seed,
                dataset,
                side_fraction: fraction,
                side_seed: derive_seed(seed, fraction, trial),
            }
        })
        .collect();
    run_cells(&cells, &methods, cfg, loaded.as_ref())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub method: Method,
    pub level: f64,
    pub mean: f64,
    pub median: f64,
    /// Sample standard deviation (n − 1); 0 for a single trial.
    pub std: f64,
    pub trials: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub methods: Vec<Method>,
    pub levels: Vec<f64>,
    pub cells: Vec<CellSummary>,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn level_label(level: f64) -> String {
    if level == 0.0 {
        "0".into()
    } else {
        let pct = level * 100.0;
        if (pct - pct.round()).abs() < 1e-9 {
            format!("{}%", pct.round())
        } else {
            format!("{pct}%")
        }
    }
}

impl SweepSummary {
    /// ERR statistics per (method, level); failed trials are counted, not averaged.
    pub fn from_records(records: &[TrialRecord]) -> Self {
        let mut methods: Vec<Method> = records.iter().map(|r| r.method).collect();
        methods.sort();
        methods.dedup();
        let mut levels: Vec<f64> = records.iter().map(|r| r.level).collect();
        levels.sort_by(f64::total_cmp);
        levels.dedup_by(|a, b| a.to_bits() == b.to_bits());

        let mut cells = Vec::new();
        for &method in &methods {
            for &level in &levels {
                let rows: Vec<&TrialRecord> = records
                    .iter()
                    .filter(|r| r.method == method && r.level.to_bits() == level.to_bits())
                    .collect();
                if rows.is_empty() {
                    continue;
                }
                let mut errs: Vec<f64> = rows.iter().filter_map(|r| r.metrics.as_ref().map(|m| m.err)).collect();
                errs.sort_by(f64::total_cmp);
                let n = errs.len();
                let mean = if n == 0 { f64::NAN } else { errs.iter().sum::<f64>() / n as f64 };
                let std = if n < 2 {
                    0.0
                } else {
                    (errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
                };
                cells.push(CellSummary {
                    method,
                    level,
                    mean,
                    median: median(&errs),
                    std,
                    trials: n,
                    failures: rows.len() - n,
                });
            }
        }
        Self { methods, levels, cells }
    }

    pub fn cell(&self, method: Method, level: f64) -> Option<&CellSummary> {
        self.cells
            .iter()
            .find(|c| c.method == method && c.level.to_bits() == level.to_bits())
    }

    /// Methods as rows, levels as columns, mean ERR in percent.
    pub fn to_csv(&self) -> String {
        self.table(|c| format!("{:.2}", 100.0 * c.mean))
    }

    /// Like [`to_csv`](Self::to_csv) with `mean±std` cells.
    pub fn to_csv_with_std(&self) -> String {
        self.table(|c| format!("{:.2}±{:.2}", 100.0 * c.mean, 100.0 * c.std))
    }

    fn table(&self, cell: impl Fn(&CellSummary) -> String) -> String {
        let mut out = String::from("method");
        for &l in &self.levels {
            out.push(',');
            out.push_str(&level_label(l));
        }
        out.push('\n');
        for &m in &self.methods {
            out.push_str(m.name());
            for &l in &self.levels {
                out.push(',');
                if let Some(c) = self.cell(m, l) {
                    out.push_str(&cell(c));
                }
            }
            out.push('\n');
        }
        out
    }
}

pub fn write_records(path: &Path, records: &[TrialRecord]) -> Result<()> {
    let mut out = String::new();
    for r in records {
        writeln!(out, "{}", serde_json::to_string(r)?).expect("writing to a String");
    }
    io::write(path, &out)
}

pub fn read_records(path: &Path) -> Result<Vec<TrialRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                column: Some(e.column()),
                message: e.to_string(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> RunConfig {
        RunConfig {
            ambient_dim: 12,
            subspace_dim: 2,
            n_subspaces: 3,
            points_per_subspace: 8,
            trials: 2,
            levels: vec![0.0, 0.1],
            kmeans_restarts: 3,
            threads: 1,
            ..RunConfig::default()
        }
    }

    #[test]
    fn level_labels_match_table_header() {
        let labels: Vec<String> = (0..10).map(|k| level_label(k as f64 / 10.0)).collect();
        assert_eq!(labels.join(" "), "0 10% 20% 30% 40% 50% 60% 70% 80% 90%");
        assert_eq!(level_label(0.05), "5%");
    }

    #[test]
    fn seeds_depend_on_every_component() {
        let s = derive_seed(1, 0.1, 0);
        assert_ne!(s, derive_seed(2, 0.1, 0));
        assert_ne!(s, derive_seed(1, 0.2, 0));
        assert_ne!(s, derive_seed(1, 0.1, 1));
        assert_eq!(s, derive_seed(1, 0.1, 0));
    }

    #[test]
    fn single_trial_summary_is_that_trial() {
        let cfg = RunConfig {
            trials: 1,
            levels: vec![0.0],
            methods: vec![Method::Ssc],
            ..tiny()
        };
        let records = run_table1(&cfg).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].failure, None);
        let summary = SweepSummary::from_records(&records);
        let err = records[0].metrics.as_ref().unwrap().err;
        assert_eq!(summary.cell(Method::Ssc, 0.0).unwrap().mean, err);
        assert_eq!(summary.cell(Method::Ssc, 0.0).unwrap().std, 0.0);
    }

    #[test]
    fn cells_are_paired_and_sorted() {
        let records = run_table1(&tiny()).unwrap();
        assert_eq!(records.len(), 2 * 2 * 3);
        for chunk in records.chunks(3) {
            let specs: Vec<_> = chunk.iter().map(|r| &r.snapshot.dataset).collect();
            assert!(specs.iter().all(|s| *s == specs[0]));
            let methods: Vec<_> = chunk.iter().map(|r| r.method).collect();
            assert_eq!(methods, vec![Method::Ssc, Method::S3cHard, Method::S3cSoft]);
        }
        assert!(records.iter().all(|r| r.failure.is_none()));
    }

    #[test]
    fn summary_statistics() {
        let mut records = run_table1(&RunConfig {
            levels: vec![0.1],
            trials: 3,
            methods: vec![Method::Ssc],
            ..tiny()
        })
        .unwrap();
        let errs = [0.1, 0.4, 0.2];
        for (r, e) in records.iter_mut().zip(errs) {
            r.metrics.as_mut().unwrap().err = e;
        }
        records[2].metrics = None;
        records[2].failure = Some("boom".into());
        let c = SweepSummary::from_records(&records).cells[0].clone();
        assert_eq!((c.trials, c.failures), (2, 1));
        assert!((c.mean - 0.25).abs() < 1e-15);
        assert!((c.median - 0.25).abs() < 1e-15);
        assert!((c.std - (0.045f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn records_round_trip_and_replay() {
        let records = run_table1(&RunConfig {
            levels: vec![0.1],
            trials: 1,
            ..tiny()
        })
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.jsonl");
        write_records(&path, &records).unwrap();
        let back = read_records(&path).unwrap();
        assert_eq!(back, records);
        for r in &back {
            assert_eq!(replay(r).unwrap(), *r.metrics.as_ref().unwrap());
        }
    }

    #[test]
    fn zero_fraction_side_info_is_plain_s3c() {
        let cfg = RunConfig {
            side_fractions: vec![0.0],
            trials: 1,
            side_corruption: 0.1,
            ..tiny()
        };
        let records = run_sideinfo_sweep(&cfg, None).unwrap();
        assert_eq!(records.len(), 2);
        let hard = &records[0];
        assert_eq!(hard.method, Method::Cs3cHard);
        assert_eq!(hard.metrics.as_ref().unwrap().constraints, 0);
        let mut plain = hard.clone();
        plain.method = Method::S3cHard;
        assert_eq!(replay(&plain).unwrap(), *hard.metrics.as_ref().unwrap());
    }

    #[test]
    fn summary_csv_shape() {
        let records = run_table1(&tiny()).unwrap();
        let csv = SweepSummary::from_records(&records).to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "method,0,10%");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("ssc,"));
    }
}
