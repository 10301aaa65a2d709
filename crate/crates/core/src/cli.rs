//! Subcommand implementations behind the `qmonitor` binary.

use std::fs;
use std::path::{Path, PathBuf};

use crate::config::load_config;
use crate::ensemble::{run_ensemble, run_pipeline, run_sweep, summarise, RuleSelection};
use crate::error::{ConfigError, Error, Result};
use crate::measurement::records_to_csv;
use crate::model::{MeasurementModel, SimConfig};
use crate::output::{ledger_csv, omega_stats_csv, sweep_csv, OutputSet, RunManifest};

pub const DEFAULT_LAMBDAS: [f64; 5] = [1e2, 1e3, 1e4, 1e5, 1e6];

/// Options shared by every subcommand.
#[derive(Debug, Clone)]
pub struct CommonOptions {
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub rule: RuleSelection,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
}

/// Reads, applies the seed override, validates. Warnings are returned for
/// the caller to print.
pub fn resolve_config(path: Option<&Path>, seed: Option<u64>) -> Result<(SimConfig, Vec<String>)> {
    let text = match path {
        Some(p) => fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
        None => String::new(),
    };
    let (mut cfg, warnings) = load_config(&text)?;
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    Ok((cfg, warnings))
}

pub fn parse_lambdas(list: &str) -> Result<Vec<f64>, ConfigError> {
    let values: Vec<f64> = list
        .split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>().map_err(|e| ConfigError::Invalid {
                key: "lambdas",
                reason: format!("`{s}`: {e}"),
            })
        })
        .collect::<Result<_, _>>()?;
    if values.is_empty() {
        return Err(ConfigError::invalid("lambdas", "list is empty"));
    }
    if let Some(bad) = values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(ConfigError::invalid(
            "lambdas",
            format!("every quality factor must be positive and finite, got {bad}"),
        ));
    }
    Ok(values)
}

/// One trajectory (index 0): truth, measurement record, reconstructed tracks
/// and its ledger.
pub fn cmd_simulate(cfg: &SimConfig, opts: &CommonOptions) -> Result<RunManifest> {
    let run = run_pipeline(cfg, 0, opts.rule)?;
    let mut out = OutputSet::create(&opts.out)?;
    out.write("true_trajectory.csv", &run.truth.to_csv())?;
    out.write("measurement_record.csv", &records_to_csv(&run.records))?;
    for track in &run.tracks {
        out.write(&format!("measured_trajectory_{}.csv", track.rule), &track.to_csv())?;
    }
    let summary = summarise(&run, &cfg.omega_track(), cfg.protocol.omega0);
    out.write("ledger.csv", &ledger_csv(&[summary]))?;
    out.finish("simulate", cfg)
}

pub fn cmd_ensemble(cfg: &SimConfig, n_trajectories: usize, opts: &CommonOptions) -> Result<RunManifest> {
    if n_trajectories == 0 {
        return Err(ConfigError::invalid("n", "need at least one trajectory").into());
    }
    let ens = run_ensemble(cfg, n_trajectories, opts.rule, opts.workers)?;
    let mut out = OutputSet::create(&opts.out)?;
    out.write("ledger.csv", &ledger_csv(&ens.summaries))?;
    for stats in &ens.omega_stats {
        out.write(&format!("ensemble_omega_{}.csv", stats.rule), &omega_stats_csv(stats))?;
    }
    out.write_json("ft_summary.json", &ens.ft)?;
    let mut resolved = cfg.clone();
    resolved.n_trajectories = n_trajectories;
    out.finish("ensemble", &resolved)
}

pub fn cmd_sweep(
    cfg: &SimConfig,
    lambdas: &[f64],
    n_trajectories: usize,
    opts: &CommonOptions,
) -> Result<RunManifest> {
    if n_trajectories == 0 {
        return Err(ConfigError::invalid("n", "need at least one trajectory").into());
    }
    let measurements: Vec<MeasurementModel> = lambdas
        .iter()
        .map(|&lambda_q| MeasurementModel {
            lambda_q,
            perfect: cfg.meas.perfect,
        })
        .collect();
    let points = run_sweep(cfg, &measurements, n_trajectories, opts.rule, opts.workers)?;
    let rows: Vec<_> = points.iter().map(|p| p.ft).collect();
    let mut out = OutputSet::create(&opts.out)?;
    out.write("sweep.csv", &sweep_csv(&rows))?;
    out.write_json("sweep.json", &rows)?;
    let mut resolved = cfg.clone();
    resolved.n_trajectories = n_trajectories;
    out.finish("sweep", &resolved)
}

/// Process exit code for an error: 2 for configuration problems, 3 for I/O.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => 2,
        Error::Io { .. } | Error::Json(_) => 3,
        Error::Measurement(_) | Error::Thermo(_) => 1,
    }
}
