//! `s3c` command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use crate::admm::NoiseModel;
use crate::bench::{self, SweepSummary};
use crate::config::{MethodKind, RunConfig};
use crate::error::{Error, Result};
use crate::io::{self, Delimiter};
use crate::metrics::evaluate;
use crate::pipeline::{encode_side_info, run_s3c, run_ssc, Mode, Schedule, StopCriteria};
use crate::synth::generate;
use crate::types::{CoefficientMatrix, DataMatrix};

fn kebab<T: DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "s3c", version, about = "Structured sparse subspace clustering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic union-of-subspaces dataset.
    Synth {
        #[arg(long, alias = "config")]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        corruption: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Cluster the columns of a data matrix.
    Cluster {
        #[arg(long)]
        data: PathBuf,
        /// Ground-truth labels; enables metrics.json.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Pairwise constraints, one `i,j,must|cannot` per line, 1-based.
        #[arg(long)]
        constraints: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_parser = kebab::<MethodKind>)]
        method: Option<MethodKind>,
        #[arg(long)]
        n_clusters: Option<usize>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Multi-trial sweeps.
    Bench {
        #[command(subcommand)]
        command: BenchCommand,
    },
    /// Print ERR (and SPR/CONN with --coeffs) as JSON.
    Eval {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        coeffs: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
enum BenchCommand {
    /// Methods × corruption levels on synthetic data.
    Table1 {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Constrained runs over side-information fractions.
    Sideinfo {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
        /// Use this data matrix (with --truth) instead of synthetic data.
        #[arg(long, requires = "truth")]
        data: Option<PathBuf>,
        #[arg(long, requires = "data")]
        truth: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Rerun recorded trials and compare metrics bit for bit.
    Replay {
        #[arg(long)]
        records: PathBuf,
        /// Zero-based line index; all records when absent.
        #[arg(long)]
        index: Option<usize>,
    },
}

#[derive(Debug, Args)]
struct Overrides {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    no_normalize: bool,
    /// Structure weight for the selected mode (both modes in sweeps).
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    lambda0: Option<f64>,
    #[arg(long, value_parser = kebab::<Mode>)]
    mode: Option<Mode>,
    #[arg(long, value_parser = kebab::<Schedule>)]
    schedule: Option<Schedule>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    tmax: Option<usize>,
    #[arg(long, value_parser = kebab::<NoiseModel>)]
    noise_model: Option<NoiseModel>,
    #[arg(long)]
    stop_eps1: Option<f64>,
    #[arg(long)]
    stop_eps2: Option<f64>,
    #[arg(long)]
    stop_eps3: Option<f64>,
    #[arg(long)]
    stop_eps4: Option<f64>,
}

impl Overrides {
    fn apply(&self, cfg: &mut RunConfig, alpha_both: bool) {
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.threads {
            cfg.threads = v;
        }
        if self.no_normalize {
            cfg.normalize = false;
        }
        if let Some(v) = self.mode {
            cfg.mode = v;
        }
        if let Some(v) = self.alpha {
            if alpha_both || cfg.mode == Mode::Hard {
                cfg.alpha_hard = v;
            }
            if alpha_both || cfg.mode == Mode::Soft {
                cfg.alpha_soft = v;
            }
        }
        if let Some(v) = self.lambda0 {
            cfg.lambda0 = v;
        }
        if let Some(v) = self.schedule {
            if v != cfg.schedule {
                // Let the schedule-dependent default be re-derived.
                if cfg.stop_eps2 == Some(StopCriteria::defaults_for(cfg.schedule).coeff.unwrap_or(0.0)) {
                    cfg.stop_eps2 = None;
                }
                cfg.schedule = v;
            }
        }
        if let Some(v) = self.nu {
            cfg.nu = v;
        }
        if let Some(v) = self.tmax {
            cfg.t_max = v;
        }
        if let Some(v) = self.noise_model {
            cfg.noise_model = v;
        }
        for (slot, v) in [
            (&mut cfg.stop_eps1, self.stop_eps1),
            (&mut cfg.stop_eps2, self.stop_eps2),
            (&mut cfg.stop_eps3, self.stop_eps3),
            (&mut cfg.stop_eps4, self.stop_eps4),
        ] {
            if v.is_some() {
                *slot = v;
            }
        }
        cfg.materialize();
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::from_json("{}").expect("empty config parses")),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_snapshot(dir: &Path, cfg: &RunConfig) -> Result<()> {
    io::write_json(&dir.join("config.json"), cfg)
}

fn cmd_synth(spec: Option<&Path>, out: &Path, corruption: Option<f64>, seed: Option<u64>) -> Result<()> {
    let mut cfg = load_config(spec)?;
    if let Some(p) = corruption {
        cfg.corruption = p;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let ds = generate(&cfg.synth_spec(cfg.corruption, cfg.seed))?;
    create_dir(out)?;
    io::save_matrix(&out.join("X.csv"), &ds.values, Delimiter::Csv)?;
    io::save_labels(&out.join("labels.csv"), &ds.truth)?;
    io::save_mask(&out.join("mask.csv"), &ds.corrupted_mask)?;
    write_snapshot(out, &cfg)
}

struct ClusterArgs<'a> {
    data: &'a Path,
    truth: Option<&'a Path>,
    constraints: Option<&'a Path>,
    config: Option<&'a Path>,
    out: &'a Path,
    method: Option<MethodKind>,
    n_clusters: Option<usize>,
    overrides: &'a Overrides,
}

fn cmd_cluster(a: ClusterArgs<'_>) -> Result<()> {
    let mut cfg = load_config(a.config)?;
    a.overrides.apply(&mut cfg, false);
    if let Some(m) = a.method {
        cfg.method = m;
    }
    let raw = io::load_matrix(a.data, Delimiter::for_path(a.data))?;
    let x = DataMatrix::new(raw, cfg.normalize)?;
    let n = x.num_points();
    let truth = a.truth.map(io::load_labels).transpose()?;
    if let Some(t) = &truth {
        if t.len() != n {
            return Err(Error::shape(format!("{n} truth labels"), t.len()));
        }
    }
    if let Some(k) = a.n_clusters {
        cfg.n_clusters = Some(k);
    }
    let n_clusters = match (cfg.n_clusters, &truth) {
        (Some(k), _) => k,
        (None, Some(t)) => t.iter().max().map_or(0, |m| m + 1),
        (None, None) => {
            return Err(Error::InvalidInput(
                "cluster count unknown: pass --n-clusters, set n_clusters, or give --truth".into(),
            ))
        }
    };
    cfg.n_clusters = Some(n_clusters);
    cfg.validate()?;

    let constraints = a.constraints.map(|p| io::load_constraints(p, Some(n))).transpose()?;
    if constraints.is_some() && cfg.method != MethodKind::Cs3c {
        return Err(Error::InvalidInput("--constraints requires method cs3c".into()));
    }
    let s3c_cfg = cfg.s3c_config(cfg.mode, n_clusters);
    let result = match cfg.method {
        MethodKind::Ssc => run_ssc(&x, &s3c_cfg),
        MethodKind::S3c => run_s3c(&x, &s3c_cfg, None),
        MethodKind::Cs3c => {
            let psi = encode_side_info(constraints.as_deref().unwrap_or(&[]), n)?;
            run_s3c(&x, &s3c_cfg, Some(&psi))
        }
    };

    create_dir(a.out)?;
    write_snapshot(a.out, &cfg)?;
    let result = match result {
        Ok(r) => r,
        Err(e) => {
            io::write_json(&a.out.join("history.json"), &e.history)?;
            return Err(e.error);
        }
    };
    io::save_labels(&a.out.join("labels.csv"), result.labels.labels())?;
    io::save_matrix(&a.out.join("C.csv"), result.coefficients.values(), Delimiter::Csv)?;
    io::save_matrix(&a.out.join("E.csv"), &result.error, Delimiter::Csv)?;
    io::write_json(&a.out.join("history.json"), &result.history)?;
    if let Some(t) = &truth {
        let report = evaluate(t, result.labels.labels(), Some(&result.coefficients))?;
        io::write_json(&a.out.join("metrics.json"), &report)?;
    }
    Ok(())
}

fn write_sweep(out: &Path, cfg: &RunConfig, records: &[bench::TrialRecord], with_std: bool) -> Result<()> {
    create_dir(out)?;
    write_snapshot(out, cfg)?;
    bench::write_records(&out.join("records.jsonl"), records)?;
    let summary = SweepSummary::from_records(records);
    let csv = if with_std {
        summary.to_csv_with_std()
    } else {
        summary.to_csv()
    };
    io::write(&out.join("summary.csv"), &csv)?;
    io::write_json(&out.join("summary.json"), &summary)?;
    let failures: Vec<_> = records.iter().filter(|r| r.failure.is_some()).collect();
    for r in &failures {
        eprintln!(
            "trial failed: method {} level {} trial {}: {}",
            r.method.name(),
            r.level,
            r.trial,
            r.failure.as_deref().unwrap_or_default()
        );
    }
    print!("{csv}");
    Ok(())
}

fn cmd_replay(records: &Path, index: Option<usize>) -> Result<bool> {
    let all = bench::read_records(records)?;
    let chosen: Vec<(usize, &bench::TrialRecord)> = match index {
        Some(i) => vec![(i, all.get(i).ok_or_else(|| Error::InvalidInput(format!("no record {i}")))?)],
        None => all.iter().enumerate().collect(),
    };
    let mut identical = true;
    for (i, r) in chosen {
        let again = bench::replay(r).ok();
        let same = again.as_ref() == r.metrics.as_ref();
        identical &= same;
        println!(
            "{}",
            serde_json::json!({ "index": i, "method": r.method, "level": r.level, "trial": r.trial, "identical": same })
        );
    }
    Ok(identical)
}

fn cmd_eval(truth: &Path, pred: &Path, coeffs: Option<&Path>) -> Result<()> {
    let t = io::load_labels(truth)?;
    let p = io::load_labels(pred)?;
    let c = coeffs
        .map(|path| io::load_matrix(path, Delimiter::for_path(path)).and_then(CoefficientMatrix::new))
        .transpose()?;
    let report = evaluate(&t, &p, c.as_ref())?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Synth {
            spec,
            out,
            corruption,
            seed,
        } => cmd_synth(spec.as_deref(), &out, corruption, seed)?,
        Command::Cluster {
            data,
            truth,
            constraints,
            config,
            out,
            method,
            n_clusters,
            overrides,
        } => cmd_cluster(ClusterArgs {
            data: &data,
            truth: truth.as_deref(),
            constraints: constraints.as_deref(),
            config: config.as_deref(),
            out: &out,
            method,
            n_clusters,
            overrides: &overrides,
        })?,
        Command::Bench { command } => match command {
            BenchCommand::Table1 {
                config,
                out,
                trials,
                overrides,
            } => {
                let mut cfg = load_config(config.as_deref())?;
                overrides.apply(&mut cfg, true);
                if let Some(t) = trials {
                    cfg.trials = t;
                }
                let records = bench::run_table1(&cfg)?;
                write_sweep(&out, &cfg, &records, false)?;
            }
            BenchCommand::Sideinfo {
                config,
                out,
                trials,
                data,
                truth,
                overrides,
            } => {
                let mut cfg = load_config(config.as_deref())?;
                overrides.apply(&mut cfg, true);
                if let Some(t) = trials {
                    cfg.trials = t;
                }
                let files = data.as_deref().zip(truth.as_deref());
                let records = bench::run_sideinfo_sweep(&cfg, files)?;
                write_sweep(&out, &cfg, &records, true)?;
            }
            BenchCommand::Replay { records, index } => {
                if !cmd_replay(&records, index)? {
                    eprintln!("error: replayed metrics differ from the recorded ones");
                    return Ok(3);
                }
            }
        },
        Command::Eval { truth, pred, coeffs } => cmd_eval(&truth, &pred, coeffs.as_deref())?,
    }
    Ok(0)
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Diagnostics go to standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
