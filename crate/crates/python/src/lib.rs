//! Python bindings for `qmonitor_core`.
//!
//! ```python
//! import qmonitor
//! cfg = qmonitor.Config(gamma=0.5, lambda_q=1e4)
//! traj = qmonitor.run_trajectory(cfg, 0)
//! track = qmonitor.reconstruct(qmonitor.measure(traj), "corrected")
//! ```
//!
//! States are the strings `"g"` and `"e"`, labels are `"stay"`,
//! `"jump_up"` and `"jump_down"`.

use std::fmt::Display;

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict};

use qmonitor_core::config::{load_config, render_config, KEYS};
use qmonitor_core::engine::{self, integrate_occupation, TrueTrajectory};
use qmonitor_core::ensemble::{self, RuleSelection};
use qmonitor_core::measurement::{self, MeasurementRecord, Unitary2};
use qmonitor_core::model::{MeasurementModel, SimConfig, TwoLevelState};
use qmonitor_core::reconstruction::{self, MeasuredTrajectory, ReconstructionRule, TrackSettings};
use qmonitor_core::{thermo, Error};

fn value_error(e: impl Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn core_error(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        other => value_error(other),
    }
}

fn parse_state(s: &str) -> PyResult<TwoLevelState> {
    TwoLevelState::parse(s).ok_or_else(|| value_error(format!("unknown state `{s}`, expected g or e")))
}

fn parse_rule(s: &str) -> PyResult<ReconstructionRule> {
    match s {
        "naive" => Ok(ReconstructionRule::Naive),
        "corrected" => Ok(ReconstructionRule::Corrected),
        _ => Err(value_error(format!("unknown rule `{s}`, expected naive or corrected"))),
    }
}

fn parse_selection(s: &str) -> PyResult<RuleSelection> {
    RuleSelection::parse(s).ok_or_else(|| value_error(format!("unknown rule `{s}`, expected naive, corrected or both")))
}

fn quality(lambda_q: Option<f64>) -> MeasurementModel {
    match lambda_q {
        Some(l) => MeasurementModel::with_quality(l),
        None => MeasurementModel::perfect(),
    }
}

fn symbols(states: impl IntoIterator<Item = TwoLevelState>) -> Vec<String> {
    states.into_iter().map(|s| s.symbol().to_string()).collect()
}

/// A validated simulation configuration. Keyword arguments use the same
/// keys as the configuration file; anything omitted keeps its default.
#[pyclass(module = "qmonitor", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct Config {
    inner: SimConfig,
    warnings: Vec<String>,
}

impl Config {
    fn load(text: &str) -> PyResult<Self> {
        let (inner, warnings) = load_config(text).map_err(value_error)?;
        Ok(Config { inner, warnings })
    }
}

#[pymethods]
impl Config {
    #[new]
    #[pyo3(signature = (**kwargs))]
    fn new(kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let mut text = String::new();
        if let Some(kwargs) = kwargs {
            for (k, v) in kwargs.iter() {
                let key: String = k.extract()?;
                if !KEYS.contains(&key.as_str()) {
                    return Err(value_error(format!("unknown configuration key `{key}`")));
                }
                let value: String = if v.is_instance_of::<PyBool>() {
                    if v.extract::<bool>()? { "true" } else { "false" }.to_string()
                } else {
                    v.str()?.extract()?
                };
                text.push_str(&format!("{key} = {value}\n"));
            }
        }
        Config::load(&text)
    }

    /// Parses configuration-file text.
    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Config::load(text)
    }

    /// Every key, in a form `from_text` reads back unchanged.
    fn to_text(&self) -> String {
        render_config(&self.inner)
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.warnings.clone()
    }

    #[getter]
    fn omega0(&self) -> f64 {
        self.inner.protocol.omega0
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.bath.gamma
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.bath.beta
    }

    /// `None` for a perfect readout.
    #[getter]
    fn lambda_q(&self) -> Option<f64> {
        (!self.inner.meas.perfect).then_some(self.inner.meas.lambda_q)
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.inner.dt
    }

    #[getter]
    fn n_steps(&self) -> usize {
        self.inner.n_steps
    }

    #[getter]
    fn master_seed(&self) -> u64 {
        self.inner.master_seed
    }

    #[getter]
    fn n_trajectories(&self) -> usize {
        self.inner.n_trajectories
    }

    #[getter]
    fn initial_state(&self) -> &'static str {
        self.inner.initial_state.symbol()
    }

    fn times(&self) -> Vec<f64> {
        self.inner.times()
    }

    fn omega_track(&self) -> Vec<f64> {
        self.inner.omega_track()
    }

    /// Exact `(p_ground, p_excited)` on the time grid.
    fn occupation(&self) -> (Vec<f64>, Vec<f64>) {
        let occ = integrate_occupation(&self.inner);
        (occ.p_ground, occ.p_excited)
    }

    fn __repr__(&self) -> String {
        let lambda = match self.lambda_q() {
            Some(l) => l.to_string(),
            None => "None".to_string(),
        };
        format!(
            "Config(gamma={}, beta={}, lambda_q={lambda}, n_steps={}, dt={}, initial_state={})",
            self.inner.bath.gamma,
            self.inner.bath.beta,
            self.inner.n_steps,
            self.inner.dt,
            self.inner.initial_state
        )
    }
}

/// One simulated trajectory of the true system.
#[pyclass(module = "qmonitor", frozen)]
pub struct Trajectory {
    inner: TrueTrajectory,
}

#[pymethods]
impl Trajectory {
    #[getter]
    fn index(&self) -> u64 {
        self.inner.trajectory_index
    }

    #[getter]
    fn config(&self) -> Config {
        Config {
            inner: self.inner.config.clone(),
            warnings: Vec::new(),
        }
    }

    #[getter]
    fn initial_state(&self) -> &'static str {
        self.inner.initial_state.symbol()
    }

    #[getter]
    fn final_state(&self) -> &'static str {
        self.inner.final_state.symbol()
    }

    #[getter]
    fn jump_count(&self) -> usize {
        self.inner.jump_count()
    }

    /// State at each of the `n_steps + 1` grid points.
    fn states(&self) -> Vec<String> {
        symbols(self.inner.states())
    }

    fn omega(&self) -> Vec<f64> {
        self.inner.omega_track()
    }

    /// Exact energy change of each step.
    fn du(&self) -> Vec<f64> {
        self.inner.steps.iter().map(|s| s.du_exact).collect()
    }

    fn jumped(&self) -> Vec<bool> {
        self.inner.steps.iter().map(|s| s.jumped).collect()
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }

    fn __len__(&self) -> usize {
        self.inner.steps.len()
    }
}

/// Readout and classification of every step of a trajectory.
#[pyclass(module = "qmonitor", frozen)]
pub struct Records {
    records: Vec<MeasurementRecord>,
    settings: TrackSettings,
}

#[pymethods]
impl Records {
    fn de(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.de_measured).collect()
    }

    fn labels(&self) -> Vec<&'static str> {
        self.records.iter().map(|r| r.label.as_str()).collect()
    }

    fn believed(&self) -> Vec<String> {
        symbols(self.records.iter().map(|r| r.believed_state_after))
    }

    fn to_csv(&self) -> String {
        measurement::records_to_csv(&self.records)
    }

    fn __len__(&self) -> usize {
        self.records.len()
    }
}

/// Reconstructed splitting and energy on the time grid.
#[pyclass(module = "qmonitor", frozen)]
pub struct Track {
    inner: MeasuredTrajectory,
}

#[pymethods]
impl Track {
    #[getter]
    fn rule(&self) -> &'static str {
        self.inner.rule.as_str()
    }

    fn times(&self) -> Vec<f64> {
        self.inner.times.clone()
    }

    fn omega_m(&self) -> Vec<f64> {
        self.inner.omega_m.clone()
    }

    fn energy_m(&self) -> Vec<f64> {
        self.inner.energy_m.clone()
    }

    fn believed(&self) -> Vec<String> {
        symbols(self.inner.believed.iter().copied())
    }

    #[getter]
    fn clamp_events(&self) -> Vec<usize> {
        self.inner.clamp_events.clone()
    }

    fn mean_abs_error(&self, exact: Vec<f64>) -> PyResult<f64> {
        if exact.len() != self.inner.omega_m.len() {
            return Err(value_error(format!(
                "expected {} grid values, got {}",
                self.inner.omega_m.len(),
                exact.len()
            )));
        }
        Ok(self.inner.mean_abs_error(&exact))
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }
}

#[pyclass(module = "qmonitor", frozen, get_all)]
pub struct Ledger {
    heat: f64,
    work: f64,
    du: f64,
    residual: f64,
}

#[pyclass(module = "qmonitor", frozen, get_all)]
pub struct FtEstimate {
    mean: f64,
    std_error: f64,
    n_samples: usize,
}

#[pymethods]
impl FtEstimate {
    fn __repr__(&self) -> String {
        format!("FtEstimate(mean={}, std_error={}, n_samples={})", self.mean, self.std_error, self.n_samples)
    }
}

/// Fluctuation-theorem and reconstruction-error figures at one quality factor.
#[pyclass(module = "qmonitor", frozen, get_all, skip_from_py_object)]
#[derive(Clone)]
pub struct FtSummary {
    lambda_q: Option<f64>,
    n_trajectories: usize,
    ft_mean_exact: Option<f64>,
    ft_stderr_exact: Option<f64>,
    ft_mean_measured: Option<f64>,
    ft_stderr_measured: Option<f64>,
    n_measured_missing: usize,
    mean_abs_entropy_error: Option<f64>,
    mean_abs_omega_error: f64,
}

impl From<&ensemble::FtSummary> for FtSummary {
    fn from(f: &ensemble::FtSummary) -> Self {
        FtSummary {
            lambda_q: f.lambda_q.is_finite().then_some(f.lambda_q),
            n_trajectories: f.n_trajectories,
            ft_mean_exact: f.ft_mean_exact,
            ft_stderr_exact: f.ft_stderr_exact,
            ft_mean_measured: f.ft_mean_measured,
            ft_stderr_measured: f.ft_stderr_measured,
            n_measured_missing: f.n_measured_missing,
            mean_abs_entropy_error: f.mean_abs_entropy_error,
            mean_abs_omega_error: f.mean_abs_omega_error,
        }
    }
}

/// Ensemble result for the primary reconstruction rule.
#[pyclass(module = "qmonitor", frozen, get_all)]
pub struct Ensemble {
    ft: FtSummary,
    rule: String,
    times: Vec<f64>,
    omega_exact: Vec<f64>,
    omega_mean: Vec<f64>,
    omega_stderr: Vec<f64>,
    true_jumps: Vec<usize>,
    detected_jumps: Vec<usize>,
    entropy_exact: Vec<Option<f64>>,
    entropy_measured: Vec<Option<f64>>,
}

#[pyfunction]
fn run_trajectory(config: &Config, index: u64) -> Trajectory {
    Trajectory {
        inner: engine::run_trajectory(&config.inner, index),
    }
}

/// `du + z / lambda_q`; exact when `lambda_q` is `None`.
#[pyfunction]
#[pyo3(signature = (du, z, lambda_q=None))]
fn readout(du: f64, z: f64, lambda_q: Option<f64>) -> f64 {
    measurement::readout(du, &quality(lambda_q), z)
}

#[pyfunction]
#[pyo3(signature = (de, believed, omega, d_omega=0.0))]
fn classify(de: f64, believed: &str, omega: f64, d_omega: f64) -> PyResult<&'static str> {
    if !(omega > 0.0) {
        return Err(value_error("omega must be positive"));
    }
    Ok(measurement::classify(de, parse_state(believed)?, omega, d_omega).as_str())
}

#[pyfunction]
fn step_naive(de: f64, from_state: &str, to_state: &str, omega_m: f64) -> PyResult<f64> {
    Ok(reconstruction::step_naive(de, parse_state(from_state)?, parse_state(to_state)?, omega_m))
}

#[pyfunction]
fn step_corrected(de: f64, from_state: &str, to_state: &str, omega_m: f64) -> PyResult<f64> {
    Ok(reconstruction::step_corrected(de, parse_state(from_state)?, parse_state(to_state)?, omega_m))
}

/// Reads out and classifies every step. Uses the trajectory's own
/// measurement model unless `lambda_q` or `perfect` is given.
#[pyfunction]
#[pyo3(signature = (trajectory, lambda_q=None, perfect=false))]
fn measure(trajectory: &Trajectory, lambda_q: Option<f64>, perfect: bool) -> PyResult<Records> {
    let traj = &trajectory.inner;
    let meas = match (perfect, lambda_q) {
        (true, _) => MeasurementModel::perfect(),
        (false, Some(l)) => MeasurementModel::with_quality(l),
        (false, None) => traj.config.meas,
    };
    meas.validate().map_err(value_error)?;
    Ok(Records {
        records: measurement::measure_trajectory(traj, &meas),
        settings: TrackSettings::for_trajectory(traj),
    })
}

#[pyfunction]
#[pyo3(signature = (records, rule="naive"))]
fn reconstruct(records: &Records, rule: &str) -> PyResult<Track> {
    Ok(Track {
        inner: reconstruction::reconstruct_track(&records.records, &records.settings, parse_rule(rule)?),
    })
}

#[pyfunction]
fn ledger(trajectory: &Trajectory) -> Ledger {
    let l = thermo::accumulate_ledger(&trajectory.inner);
    Ledger {
        heat: l.heat,
        work: l.work,
        du: l.du,
        residual: l.first_law_residual(),
    }
}

/// Entropy production of the true trajectory.
#[pyfunction]
fn entropy(trajectory: &Trajectory) -> PyResult<f64> {
    let traj = &trajectory.inner;
    let occ = integrate_occupation(&traj.config);
    thermo::entropy_exact(traj, &occ, &traj.config.bath).map_err(value_error)
}

/// Entropy production inferred from a reconstructed track.
#[pyfunction]
fn entropy_measured(track: &Track, config: &Config) -> PyResult<f64> {
    let cfg = &config.inner;
    let p0 = cfg.initial_state.excited_probability(&cfg.protocol, &cfg.bath);
    thermo::entropy_measured(&track.inner, &cfg.bath, cfg.dt, p0).map_err(value_error)
}

/// Mean and standard error of `exp(-s)`.
#[pyfunction]
fn ft_estimator(entropies: Vec<f64>) -> PyResult<FtEstimate> {
    let e = thermo::ft_estimator(&entropies).map_err(value_error)?;
    Ok(FtEstimate {
        mean: e.mean,
        std_error: e.std_error,
        n_samples: e.n_samples,
    })
}

/// Outcomes `(du, probability)` of measuring energy, evolving by the 2x2
/// `evolution` (complex entries, row-major, ground first) and measuring again.
#[pyfunction]
fn two_point_distribution(
    energies_before: [f64; 2],
    energies_after: [f64; 2],
    evolution: Unitary2,
    populations: [f64; 2],
) -> PyResult<Vec<(f64, f64)>> {
    measurement::two_point_distribution(energies_before, energies_after, &evolution, populations)
        .map(|d| d.support)
        .map_err(value_error)
}

#[pyfunction]
fn misclassification_probability(lambda_q: f64, separation: f64) -> f64 {
    measurement::misclassification_probability(lambda_q, separation)
}

/// Runs trajectories `0 .. n` (default: the configured count).
#[pyfunction]
#[pyo3(signature = (config, n=None, rule="naive", workers=None))]
fn run_ensemble(
    py: Python<'_>,
    config: &Config,
    n: Option<usize>,
    rule: &str,
    workers: Option<usize>,
) -> PyResult<Ensemble> {
    let selection = parse_selection(rule)?;
    let cfg = config.inner.clone();
    let n = n.unwrap_or(cfg.n_trajectories);
    let result = py
        .detach(move || ensemble::run_ensemble(&cfg, n, selection, workers))
        .map_err(core_error)?;
    let stats = result
        .omega_stats(selection.primary())
        .expect("primary rule always has statistics");
    Ok(Ensemble {
        ft: FtSummary::from(&result.ft),
        rule: selection.primary().as_str().to_string(),
        times: stats.times.clone(),
        omega_exact: stats.omega_exact.clone(),
        omega_mean: stats.mean.clone(),
        omega_stderr: stats.std_error.clone(),
        true_jumps: result.summaries.iter().map(|s| s.true_jumps).collect(),
        detected_jumps: result.summaries.iter().map(|s| s.detected_jumps).collect(),
        entropy_exact: result.summaries.iter().map(|s| s.ledger.entropy_exact).collect(),
        entropy_measured: result.summaries.iter().map(|s| s.ledger.entropy_measured).collect(),
    })
}

/// Same trajectories at every quality factor; one summary per entry.
#[pyfunction]
#[pyo3(signature = (config, lambdas, n=None, rule="naive", workers=None))]
fn run_sweep(
    py: Python<'_>,
    config: &Config,
    lambdas: Vec<f64>,
    n: Option<usize>,
    rule: &str,
    workers: Option<usize>,
) -> PyResult<Vec<FtSummary>> {
    let selection = parse_selection(rule)?;
    let cfg = config.inner.clone();
    let n = n.unwrap_or(cfg.n_trajectories);
    let ms: Vec<MeasurementModel> = lambdas.iter().map(|&l| MeasurementModel::with_quality(l)).collect();
    for m in &ms {
        m.validate().map_err(value_error)?;
    }
    let points = py
        .detach(move || ensemble::run_sweep(&cfg, &ms, n, selection, workers))
        .map_err(core_error)?;
    Ok(points.iter().map(|p| FtSummary::from(&p.ft)).collect())
}

#[pymodule]
pub fn qmonitor(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Config>()?;
    m.add_class::<Trajectory>()?;
    m.add_class::<Records>()?;
    m.add_class::<Track>()?;
    m.add_class::<Ledger>()?;
    m.add_class::<FtEstimate>()?;
    m.add_class::<FtSummary>()?;
    m.add_class::<Ensemble>()?;
    m.add_function(wrap_pyfunction!(run_trajectory, m)?)?;
    m.add_function(wrap_pyfunction!(readout, m)?)?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(step_naive, m)?)?;
    m.add_function(wrap_pyfunction!(step_corrected, m)?)?;
    m.add_function(wrap_pyfunction!(measure, m)?)?;
    m.add_function(wrap_pyfunction!(reconstruct, m)?)?;
    m.add_function(wrap_pyfunction!(ledger, m)?)?;
    m.add_function(wrap_pyfunction!(entropy, m)?)?;
    m.add_function(wrap_pyfunction!(entropy_measured, m)?)?;
    m.add_function(wrap_pyfunction!(ft_estimator, m)?)?;
    m.add_function(wrap_pyfunction!(two_point_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(misclassification_probability, m)?)?;
    m.add_function(wrap_pyfunction!(run_ensemble, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    Ok(())
}
