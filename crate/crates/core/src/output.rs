//! Output files and the run manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::render_config;
use crate::ensemble::{FtSummary, OmegaStatistics, TrajectorySummary};
use crate::error::{Error, Result};
use crate::model::SimConfig;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OutputDigest {
    /// Path relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub artifact_version: String,
    pub master_seed: u64,
    /// Resolved configuration in config-file syntax.
    pub config_echo: String,
    pub outputs: Vec<OutputDigest>,
}

/// Writes files into one directory and records their digests.
#[derive(Debug)]
pub struct OutputSet {
    dir: PathBuf,
    outputs: Vec<OutputDigest>,
}

impl OutputSet {
    pub fn create(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(OutputSet {
            dir,
            outputs: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        self.outputs.push(OutputDigest {
            path: name.to_string(),
            sha256: hex::encode(Sha256::digest(contents.as_bytes())),
            bytes: contents.len(),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, &text)
    }

    /// Writes `manifest.json` listing everything written so far.
    pub fn finish(self, command: &str, cfg: &SimConfig) -> Result<RunManifest> {
        let manifest = RunManifest {
            command: command.to_string(),
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            master_seed: cfg.master_seed,
            config_echo: render_config(cfg),
            outputs: self.outputs,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        let path = self.dir.join(MANIFEST_FILE);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(manifest)
    }
}

fn opt(x: Option<f64>) -> String {
    match x {
        Some(v) => v.to_string(),
        None => "NaN".to_string(),
    }
}

pub const LEDGER_HEADER: &str = "trajectory_index,heat,work,dU,entropy_exact,entropy_measured";

pub fn ledger_csv(rows: &[TrajectorySummary]) -> String {
    let mut out = String::from(LEDGER_HEADER);
    out.push('\n');
    for s in rows {
        let l = &s.ledger;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            s.trajectory_index,
            l.heat,
            l.work,
            l.du,
            opt(l.entropy_exact),
            opt(l.entropy_measured)
        );
    }
    out
}

pub fn omega_stats_csv(stats: &OmegaStatistics) -> String {
    let mut out = String::from("t,omega_exact,omega_m_mean,omega_m_stderr\n");
    for k in 0..stats.times.len() {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            stats.times[k], stats.omega_exact[k], stats.mean[k], stats.std_error[k]
        );
    }
    out
}

pub const SWEEP_HEADER: &str = "lambda_q,n_trajectories,ft_mean_exact,ft_stderr_exact,ft_mean_measured,ft_stderr_measured,mean_abs_entropy_error,mean_abs_omega_error";

pub fn sweep_csv(rows: &[FtSummary]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.lambda_q,
            r.n_trajectories,
            opt(r.ft_mean_exact),
            opt(r.ft_stderr_exact),
            opt(r.ft_mean_measured),
            opt(r.ft_stderr_measured),
            opt(r.mean_abs_entropy_error),
            r.mean_abs_omega_error
        );
    }
    out
}
