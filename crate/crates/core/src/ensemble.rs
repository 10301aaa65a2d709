//! Per-trajectory pipeline and ensemble reductions.
//!
//! Trajectory `i` always draws from the streams keyed by
//! `(master_seed, i)`, whatever command or worker runs it. Ensembles are
//! reduced over fixed-size index chunks whose partial results are combined in
//! index order, so every number is independent of the worker count.

use rayon::prelude::*;
use serde::Serialize;

use crate::engine::{integrate_occupation, run_trajectory, OccupationTable, TrueTrajectory};
use crate::error::{Error, Result};
use crate::measurement::{measure_trajectory, MeasurementRecord};
use crate::model::{MeasurementModel, SimConfig};
use crate::reconstruction::{reconstruct_track, MeasuredTrajectory, ReconstructionRule, TrackSettings};
use crate::stats::{mean_and_stderr, CompensatedSum};
use crate::thermo::{accumulate_ledger, entropy_exact, entropy_measured, ft_estimator, ThermoLedger};

const CHUNK: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RuleSelection {
    Naive,
    Corrected,
    Both,
}

impl RuleSelection {
    pub fn rules(self) -> Vec<ReconstructionRule> {
        match self {
            RuleSelection::Naive => vec![ReconstructionRule::Naive],
            RuleSelection::Corrected => vec![ReconstructionRule::Corrected],
            RuleSelection::Both => vec![ReconstructionRule::Naive, ReconstructionRule::Corrected],
        }
    }

    /// Rule whose track feeds the measured entropy.
    pub fn primary(self) -> ReconstructionRule {
        match self {
            RuleSelection::Corrected => ReconstructionRule::Corrected,
            RuleSelection::Naive | RuleSelection::Both => ReconstructionRule::Naive,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "naive" => Some(RuleSelection::Naive),
            "corrected" => Some(RuleSelection::Corrected),
            "both" => Some(RuleSelection::Both),
            _ => None,
        }
    }
}

/// Everything produced for one trajectory.
#[derive(Debug, Clone)]
pub struct TrajectoryRun {
    pub truth: TrueTrajectory,
    pub records: Vec<MeasurementRecord>,
    pub tracks: Vec<MeasuredTrajectory>,
    pub ledger: ThermoLedger,
}

impl TrajectoryRun {
    pub fn track(&self, rule: ReconstructionRule) -> Option<&MeasuredTrajectory> {
        self.tracks.iter().find(|t| t.rule == rule)
    }
}

/// Measures, reconstructs and books an already simulated trajectory.
/// `occ` is the exact occupation table for `truth.config`.
pub fn analyse_trajectory(
    truth: TrueTrajectory,
    meas: &MeasurementModel,
    selection: RuleSelection,
    occ: &OccupationTable,
) -> Result<TrajectoryRun> {
    let cfg = &truth.config;
    let records = measure_trajectory(&truth, meas);
    let settings = TrackSettings::for_trajectory(&truth);
    let tracks: Vec<MeasuredTrajectory> = selection
        .rules()
        .into_iter()
        .map(|rule| reconstruct_track(&records, &settings, rule))
        .collect();
    let mut ledger = accumulate_ledger(&truth);
    ledger.entropy_exact = Some(entropy_exact(&truth, occ, &cfg.bath)?);
    let primary = tracks
        .iter()
        .find(|t| t.rule == selection.primary())
        .expect("primary rule is always reconstructed");
    // A misdetected jump can land on a state the reconstructed rates make
    // unreachable; that trajectory simply has no measured entropy.
    ledger.entropy_measured = entropy_measured(primary, &cfg.bath, cfg.dt, occ.p_excited[0]).ok();
    Ok(TrajectoryRun {
        truth,
        records,
        tracks,
        ledger,
    })
}

/// Full pipeline for one trajectory index using `cfg.meas`.
pub fn run_pipeline(cfg: &SimConfig, index: u64, selection: RuleSelection) -> Result<TrajectoryRun> {
    let occ = integrate_occupation(cfg);
    analyse_trajectory(run_trajectory(cfg, index), &cfg.meas, selection, &occ)
}

fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::io("<thread pool>", std::io::Error::other(e)))?;
            Ok(pool.install(f))
        }
    }
}

/// Compact per-trajectory result kept by ensembles.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectorySummary {
    pub trajectory_index: u64,
    pub ledger: ThermoLedger,
    pub true_jumps: usize,
    pub detected_jumps: usize,
    /// `(rule, mean over grid of |omega_m - omega| / omega0)`.
    pub omega_errors: Vec<(ReconstructionRule, f64)>,
    pub clamp_events: usize,
}

impl TrajectorySummary {
    pub fn omega_error(&self, rule: ReconstructionRule) -> Option<f64> {
        self.omega_errors.iter().find(|(r, _)| *r == rule).map(|(_, e)| *e)
    }
}

pub fn summarise(run: &TrajectoryRun, exact_omega: &[f64], omega0: f64) -> TrajectorySummary {
    TrajectorySummary {
        trajectory_index: run.truth.trajectory_index,
        ledger: run.ledger,
        true_jumps: run.truth.jump_count(),
        detected_jumps: run.records.iter().filter(|r| r.label.is_jump()).count(),
        omega_errors: run
            .tracks
            .iter()
            .map(|t| (t.rule, t.mean_abs_error(exact_omega) / omega0))
            .collect(),
        clamp_events: run.tracks.iter().map(|t| t.clamp_events.len()).sum(),
    }
}

/// Pointwise mean and standard error of `omega_m(t)` over an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OmegaStatistics {
    pub rule: ReconstructionRule,
    pub times: Vec<f64>,
    pub omega_exact: Vec<f64>,
    pub mean: Vec<f64>,
    /// NaN for a single trajectory.
    pub std_error: Vec<f64>,
}

#[derive(Debug, Clone)]
struct PointwiseSums {
    n: usize,
    sum: Vec<CompensatedSum>,
    sum_sq: Vec<CompensatedSum>,
}

impl PointwiseSums {
    fn new(len: usize) -> Self {
        PointwiseSums {
            n: 0,
            sum: vec![CompensatedSum::new(); len],
            sum_sq: vec![CompensatedSum::new(); len],
        }
    }

    fn add_track(&mut self, xs: &[f64]) {
        self.n += 1;
        for (k, &x) in xs.iter().enumerate() {
            self.sum[k].add(x);
            self.sum_sq[k].add(x * x);
        }
    }

    fn merge(&mut self, other: &PointwiseSums) {
        self.n += other.n;
        for k in 0..self.sum.len() {
            self.sum[k].add(other.sum[k].value());
            self.sum_sq[k].add(other.sum_sq[k].value());
        }
    }

    fn finish(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.n as f64;
        let mut mean = Vec::with_capacity(self.sum.len());
        let mut se = Vec::with_capacity(self.sum.len());
        for k in 0..self.sum.len() {
            let m = self.sum[k].value() / n;
            mean.push(m);
            if self.n < 2 {
                se.push(f64::NAN);
            } else {
                let var = ((self.sum_sq[k].value() - n * m * m) / (n - 1.0)).max(0.0);
                se.push((var / n).sqrt());
            }
        }
        (mean, se)
    }
}

/// `<exp(-dS)>` for the exact and measured entropies of one ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FtSummary {
    pub lambda_q: f64,
    pub n_trajectories: usize,
    pub ft_mean_exact: Option<f64>,
    pub ft_stderr_exact: Option<f64>,
    pub ft_mean_measured: Option<f64>,
    pub ft_stderr_measured: Option<f64>,
    /// Trajectories whose measured entropy could not be evaluated.
    pub n_measured_missing: usize,
    /// Mean of `|dS_m - dS|` over trajectories with both values.
    pub mean_abs_entropy_error: Option<f64>,
    /// Mean over trajectories of the time-averaged `|omega_m - omega| / omega0`
    /// (primary rule).
    pub mean_abs_omega_error: f64,
}

fn ft_summary(
    lambda_q: f64,
    summaries: &[TrajectorySummary],
    primary: ReconstructionRule,
) -> FtSummary {
    let exact: Vec<f64> = summaries.iter().filter_map(|s| s.ledger.entropy_exact).collect();
    let measured: Vec<f64> = summaries.iter().filter_map(|s| s.ledger.entropy_measured).collect();
    let ex = ft_estimator(&exact).ok();
    let me = ft_estimator(&measured).ok();
    let diffs: Vec<f64> = summaries
        .iter()
        .filter_map(|s| Some((s.ledger.entropy_measured? - s.ledger.entropy_exact?).abs()))
        .collect();
    let omega_errs: Vec<f64> = summaries.iter().filter_map(|s| s.omega_error(primary)).collect();
    FtSummary {
        lambda_q,
        n_trajectories: summaries.len(),
        ft_mean_exact: ex.map(|e| e.mean),
        ft_stderr_exact: ex.map(|e| e.std_error),
        ft_mean_measured: me.map(|e| e.mean),
        ft_stderr_measured: me.map(|e| e.std_error),
        n_measured_missing: summaries.len() - measured.len(),
        mean_abs_entropy_error: if diffs.is_empty() {
            None
        } else {
            Some(mean_and_stderr(&diffs).0)
        },
        mean_abs_omega_error: mean_and_stderr(&omega_errs).0,
    }
}

#[derive(Debug, Clone)]
pub struct EnsembleResult {
    pub config: SimConfig,
    pub selection: RuleSelection,
    pub summaries: Vec<TrajectorySummary>,
    pub omega_stats: Vec<OmegaStatistics>,
    pub ft: FtSummary,
}

impl EnsembleResult {
    pub fn omega_stats(&self, rule: ReconstructionRule) -> Option<&OmegaStatistics> {
        self.omega_stats.iter().find(|s| s.rule == rule)
    }
}

/// Runs trajectories `0 .. n_trajectories` with `cfg.meas`.
pub fn run_ensemble(
    cfg: &SimConfig,
    n_trajectories: usize,
    selection: RuleSelection,
    workers: Option<usize>,
) -> Result<EnsembleResult> {
    let occ = integrate_occupation(cfg);
    let exact_omega = cfg.omega_track();
    let rules = selection.rules();
    let n_points = cfg.n_steps + 1;

    type Chunk = (Vec<TrajectorySummary>, Vec<PointwiseSums>);
    let chunks: Vec<Result<Chunk>> = with_workers(workers, || {
        (0..n_trajectories)
            .step_by(CHUNK)
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|start| {
                let end = (start + CHUNK).min(n_trajectories);
                let mut summaries = Vec::with_capacity(end - start);
                let mut sums: Vec<PointwiseSums> =
                    rules.iter().map(|_| PointwiseSums::new(n_points)).collect();
                for i in start..end {
                    let truth = run_trajectory(cfg, i as u64);
                    let run = analyse_trajectory(truth, &cfg.meas, selection, &occ)?;
                    for (slot, track) in sums.iter_mut().zip(&run.tracks) {
                        slot.add_track(&track.omega_m);
                    }
                    summaries.push(summarise(&run, &exact_omega, cfg.protocol.omega0));
                }
                Ok((summaries, sums))
            })
            .collect()
    })?;

    let mut summaries = Vec::with_capacity(n_trajectories);
    let mut totals: Vec<PointwiseSums> = rules.iter().map(|_| PointwiseSums::new(n_points)).collect();
    for chunk in chunks {
        let (s, sums) = chunk?;
        summaries.extend(s);
        for (t, part) in totals.iter_mut().zip(&sums) {
            t.merge(part);
        }
    }
    let times = cfg.times();
    let omega_stats = rules
        .iter()
        .zip(&totals)
        .map(|(&rule, sums)| {
            let (mean, std_error) = sums.finish();
            OmegaStatistics {
                rule,
                times: times.clone(),
                omega_exact: exact_omega.clone(),
                mean,
                std_error,
            }
        })
        .collect();
    let ft = ft_summary(cfg.meas.lambda_q, &summaries, selection.primary());
    Ok(EnsembleResult {
        config: cfg.clone(),
        selection,
        summaries,
        omega_stats,
        ft,
    })
}

/// One sweep point.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub meas: MeasurementModel,
    pub summaries: Vec<TrajectorySummary>,
    pub ft: FtSummary,
}

/// Runs the same trajectories `0 .. n_trajectories` at every quality factor.
/// Jump histories and the standard-normal readout draws are shared across
/// quality factors; only the noise scale changes.
pub fn run_sweep(
    cfg: &SimConfig,
    measurements: &[MeasurementModel],
    n_trajectories: usize,
    selection: RuleSelection,
    workers: Option<usize>,
) -> Result<Vec<SweepPoint>> {
    let occ = integrate_occupation(cfg);
    let exact_omega = cfg.omega_track();

    // chunk -> per-measurement summaries
    let chunks: Vec<Result<Vec<Vec<TrajectorySummary>>>> = with_workers(workers, || {
        (0..n_trajectories)
            .step_by(CHUNK)
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|start| {
                let end = (start + CHUNK).min(n_trajectories);
                let mut per_meas: Vec<Vec<TrajectorySummary>> =
                    measurements.iter().map(|_| Vec::with_capacity(end - start)).collect();
                for i in start..end {
                    let truth = run_trajectory(cfg, i as u64);
                    for (slot, meas) in per_meas.iter_mut().zip(measurements) {
                        let mut local = cfg.clone();
                        local.meas = *meas;
                        let t = TrueTrajectory {
                            config: local,
                            ..truth.clone()
                        };
                        let run = analyse_trajectory(t, meas, selection, &occ)?;
                        slot.push(summarise(&run, &exact_omega, cfg.protocol.omega0));
                    }
                }
                Ok(per_meas)
            })
            .collect()
    })?;

    let mut per_meas: Vec<Vec<TrajectorySummary>> =
        measurements.iter().map(|_| Vec::with_capacity(n_trajectories)).collect();
    for chunk in chunks {
        for (all, part) in per_meas.iter_mut().zip(chunk?) {
            all.extend(part);
        }
    }
    Ok(measurements
        .iter()
        .zip(per_meas)
        .map(|(meas, summaries)| {
            let lambda = if meas.perfect { f64::INFINITY } else { meas.lambda_q };
            let ft = ft_summary(lambda, &summaries, selection.primary());
            SweepPoint {
                meas: *meas,
                summaries,
                ft,
            }
        })
        .collect())
}
