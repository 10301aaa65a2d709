//! Flat `key = value` configuration files.
//!
//! ```text
//! # one drive cycle at the default splitting
//! gamma = 0.5
//! lambda_q = 100
//! initial_state = thermal
//! ```
//!
//! Blank lines and `#` comments are ignored. Every key is optional; missing
//! keys take the values of [`SimConfig::default`]. When `dt` is absent it is
//! chosen so that `n_steps` covers exactly one drive cycle.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::ConfigError;
use crate::model::{InitialCondition, SimConfig};

pub const KEYS: &[&str] = &[
    "omega0",
    "big_omega",
    "modulation_depth",
    "epsilon",
    "gamma",
    "beta",
    "lambda_q",
    "perfect",
    "dt",
    "n_steps",
    "initial_state",
    "master_seed",
    "n_trajectories",
    "max_jump_prob",
    "max_phase_step",
    "max_increment_ratio",
];

fn parse_value<T: FromStr>(line: usize, key: &str, raw: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    raw.parse::<T>().map_err(|e| ConfigError::InvalidValue {
        line,
        key: key.to_string(),
        reason: e.to_string(),
    })
}

fn parse_bool(line: usize, key: &str, raw: &str) -> Result<bool, ConfigError> {
    match raw {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(ConfigError::InvalidValue {
            line,
            key: key.to_string(),
            reason: format!("expected true/false, got `{raw}`"),
        }),
    }
}

/// Parses configuration text without validating physical constraints.
pub fn parse_config(text: &str) -> Result<SimConfig, ConfigError> {
    let mut cfg = SimConfig::default();
    let mut seen = HashSet::new();
    let mut dt = None;

    for (i, raw_line) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw_line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(ConfigError::Syntax {
                line,
                text: content.to_string(),
            });
        };
        let key = key.trim();
        let value = value.trim();
        if !KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey {
                line,
                key: key.to_string(),
            });
        }
        if !seen.insert(key.to_string()) {
            return Err(ConfigError::DuplicateKey {
                line,
                key: key.to_string(),
            });
        }
        match key {
            "omega0" => cfg.protocol.omega0 = parse_value(line, key, value)?,
            "big_omega" => cfg.protocol.big_omega = parse_value(line, key, value)?,
            "modulation_depth" => cfg.protocol.modulation_depth = parse_value(line, key, value)?,
            "epsilon" => cfg.protocol.epsilon = parse_value(line, key, value)?,
            "gamma" => cfg.bath.gamma = parse_value(line, key, value)?,
            "beta" => cfg.bath.beta = parse_value(line, key, value)?,
            "lambda_q" => cfg.meas.lambda_q = parse_value(line, key, value)?,
            "perfect" => cfg.meas.perfect = parse_bool(line, key, value)?,
            "dt" => dt = Some(parse_value(line, key, value)?),
            "n_steps" => cfg.n_steps = parse_value(line, key, value)?,
            "initial_state" => {
                cfg.initial_state =
                    InitialCondition::parse(value).ok_or_else(|| ConfigError::InvalidValue {
                        line,
                        key: key.to_string(),
                        reason: format!("expected g, e or thermal, got `{value}`"),
                    })?
            }
            "master_seed" => cfg.master_seed = parse_value(line, key, value)?,
            "n_trajectories" => cfg.n_trajectories = parse_value(line, key, value)?,
            "max_jump_prob" => cfg.limits.max_jump_prob = parse_value(line, key, value)?,
            "max_phase_step" => cfg.limits.max_phase_step = parse_value(line, key, value)?,
            "max_increment_ratio" => {
                cfg.limits.max_increment_ratio = parse_value(line, key, value)?
            }
            _ => unreachable!("key list and match arms out of sync"),
        }
    }

    cfg.dt = match dt {
        Some(dt) => dt,
        None => {
            if cfg.n_steps == 0 || !cfg.protocol.period().is_finite() {
                return Err(ConfigError::invalid(
                    "dt",
                    "must be given explicitly when big_omega = 0 or n_steps = 0",
                ));
            }
            SimConfig::one_cycle_dt(&cfg.protocol, cfg.n_steps)
        }
    };
    Ok(cfg)
}

/// Parses and validates; returns the config together with any warnings.
pub fn load_config(text: &str) -> Result<(SimConfig, Vec<String>), ConfigError> {
    let cfg = parse_config(text)?;
    let warnings = cfg.validate()?;
    Ok((cfg, warnings))
}

/// Renders every key of a resolved configuration. The output parses back to
/// an identical `SimConfig`.
pub fn render_config(cfg: &SimConfig) -> String {
    let mut out = String::new();
    let mut put = |k: &str, v: String| {
        let _ = writeln!(out, "{k} = {v}");
    };
    put("omega0", cfg.protocol.omega0.to_string());
    put("big_omega", cfg.protocol.big_omega.to_string());
    put("modulation_depth", cfg.protocol.modulation_depth.to_string());
    put("epsilon", cfg.protocol.epsilon.to_string());
    put("gamma", cfg.bath.gamma.to_string());
    put("beta", cfg.bath.beta.to_string());
    put("lambda_q", cfg.meas.lambda_q.to_string());
    put("perfect", cfg.meas.perfect.to_string());
    put("dt", cfg.dt.to_string());
    put("n_steps", cfg.n_steps.to_string());
    put("initial_state", cfg.initial_state.symbol().to_string());
    put("master_seed", cfg.master_seed.to_string());
    put("n_trajectories", cfg.n_trajectories.to_string());
    put("max_jump_prob", cfg.limits.max_jump_prob.to_string());
    put("max_phase_step", cfg.limits.max_phase_step.to_string());
    put("max_increment_ratio", cfg.limits.max_increment_ratio.to_string());
    out
}
