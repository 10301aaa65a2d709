//! Physical model of the monitored two-level system.
//!
//! Units throughout: hbar = 1, energies in units of hbar*omega0, times in
//! units of 1/omega0, and the quality factor in units of 1/(hbar*omega0).
//! The Hamiltonian is always `omega(t)/2 * sigma_z`, so the system is only
//! ever in one of its two energy eigenstates.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TwoLevelState {
    Ground,
    Excited,
}

impl TwoLevelState {
    /// 0 for ground, 1 for excited.
    pub fn index(self) -> u8 {
        match self {
            TwoLevelState::Ground => 0,
            TwoLevelState::Excited => 1,
        }
    }

    pub fn from_index(i: u8) -> Option<Self> {
        match i {
            0 => Some(TwoLevelState::Ground),
            1 => Some(TwoLevelState::Excited),
            _ => None,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            TwoLevelState::Ground => TwoLevelState::Excited,
            TwoLevelState::Excited => TwoLevelState::Ground,
        }
    }

    /// Eigenvalue of sigma_z: +1 for excited, -1 for ground.
    pub fn sign(self) -> f64 {
        match self {
            TwoLevelState::Ground => -1.0,
            TwoLevelState::Excited => 1.0,
        }
    }

    /// Level energy `±omega/2`.
    pub fn energy(self, omega: f64) -> f64 {
        0.5 * self.sign() * omega
    }

    pub fn symbol(self) -> &'static str {
        match self {
            TwoLevelState::Ground => "g",
            TwoLevelState::Excited => "e",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "g" | "ground" => Some(TwoLevelState::Ground),
            "e" | "excited" => Some(TwoLevelState::Excited),
            _ => None,
        }
    }
}

impl fmt::Display for TwoLevelState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// How the start state of each trajectory is chosen. Either way the monitor
/// knows the start state of the trajectory it is reconstructing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitialCondition {
    Fixed(TwoLevelState),
    /// Drawn per trajectory from the equilibrium populations at `omega(0)`.
    Thermal,
}

impl InitialCondition {
    /// Probability of starting excited.
    pub fn excited_probability(self, protocol: &DriveProtocol, bath: &BathParams) -> f64 {
        match self {
            InitialCondition::Fixed(TwoLevelState::Excited) => 1.0,
            InitialCondition::Fixed(TwoLevelState::Ground) => 0.0,
            InitialCondition::Thermal => {
                let n = bath.nbar(protocol.omega_at(0.0));
                n / (2.0 * n + 1.0)
            }
        }
    }

    /// Start state for a uniform draw `u` on [0, 1).
    pub fn sample(self, protocol: &DriveProtocol, bath: &BathParams, u: f64) -> TwoLevelState {
        match self {
            InitialCondition::Fixed(s) => s,
            InitialCondition::Thermal => {
                if u < self.excited_probability(protocol, bath) {
                    TwoLevelState::Excited
                } else {
                    TwoLevelState::Ground
                }
            }
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            InitialCondition::Fixed(s) => s.symbol(),
            InitialCondition::Thermal => "thermal",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "thermal" => Some(InitialCondition::Thermal),
            _ => TwoLevelState::parse(s).map(InitialCondition::Fixed),
        }
    }
}

impl From<TwoLevelState> for InitialCondition {
    fn from(s: TwoLevelState) -> Self {
        InitialCondition::Fixed(s)
    }
}

impl fmt::Display for InitialCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Sinusoidal modulation of the level splitting,
/// `omega(t) = omega0 * (1 + depth * sin(big_omega * t))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveProtocol {
    pub omega0: f64,
    pub big_omega: f64,
    pub modulation_depth: f64,
    /// Lower bound on `omega(t) / omega0`; also the reconstruction clamp floor.
    pub epsilon: f64,
}

impl Default for DriveProtocol {
    fn default() -> Self {
        DriveProtocol {
            omega0: 1.0,
            big_omega: 0.1,
            modulation_depth: 0.5,
            epsilon: 0.25,
        }
    }
}

impl DriveProtocol {
    pub fn omega_at(&self, t: f64) -> f64 {
        self.omega0 * (1.0 + self.modulation_depth * (self.big_omega * t).sin())
    }

    pub fn min_omega(&self) -> f64 {
        self.omega0 * (1.0 - self.modulation_depth.abs())
    }

    pub fn max_omega(&self) -> f64 {
        self.omega0 * (1.0 + self.modulation_depth.abs())
    }

    /// Largest possible `|omega(t + dt) - omega(t)|`.
    pub fn max_step_increment(&self, dt: f64) -> f64 {
        self.omega0 * self.modulation_depth.abs() * self.big_omega.abs() * dt
    }

    /// Period of the drive; infinite for a static splitting.
    pub fn period(&self) -> f64 {
        if self.big_omega == 0.0 {
            f64::INFINITY
        } else {
            2.0 * PI / self.big_omega.abs()
        }
    }

    pub fn floor(&self) -> f64 {
        self.epsilon * self.omega0
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.omega0.is_finite() && self.omega0 > 0.0) {
            return Err(ConfigError::invalid("omega0", "must be positive and finite"));
        }
        if !self.big_omega.is_finite() {
            return Err(ConfigError::invalid("big_omega", "must be finite"));
        }
        if !self.modulation_depth.is_finite() {
            return Err(ConfigError::invalid("modulation_depth", "must be finite"));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(ConfigError::invalid("epsilon", "must lie in (0, 1]"));
        }
        if self.min_omega() < self.floor() {
            return Err(ConfigError::invalid(
                "modulation_depth",
                format!(
                    "omega(t) reaches {} which is below the floor epsilon*omega0 = {}",
                    self.min_omega(),
                    self.floor()
                ),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BathParams {
    pub gamma: f64,
    pub beta: f64,
}

impl Default for BathParams {
    fn default() -> Self {
        BathParams {
            gamma: 0.5,
            beta: 1.0,
        }
    }
}

impl BathParams {
    /// Bose occupation `1 / (exp(beta*omega) - 1)`. Goes to 0 (never NaN) when
    /// `beta*omega` overflows.
    pub fn nbar(&self, omega: f64) -> f64 {
        1.0 / (self.beta * omega).exp_m1()
    }

    /// Absorption rate `gamma * nbar`.
    pub fn gamma_up(&self, omega: f64) -> f64 {
        if self.gamma == 0.0 {
            return 0.0;
        }
        self.gamma * self.nbar(omega)
    }

    /// Emission rate `gamma * (nbar + 1)`.
    pub fn gamma_down(&self, omega: f64) -> f64 {
        if self.gamma == 0.0 {
            return 0.0;
        }
        self.gamma * (self.nbar(omega) + 1.0)
    }

    /// Rate of leaving `state` when the splitting is `omega`.
    pub fn rate(&self, omega: f64, state: TwoLevelState) -> f64 {
        match state {
            TwoLevelState::Ground => self.gamma_up(omega),
            TwoLevelState::Excited => self.gamma_down(omega),
        }
    }

    pub fn rate_at(&self, protocol: &DriveProtocol, t: f64, state: TwoLevelState) -> f64 {
        self.rate(protocol.omega_at(t), state)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(ConfigError::invalid("gamma", "must be finite and >= 0"));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(ConfigError::invalid("beta", "must be positive and finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementModel {
    pub lambda_q: f64,
    pub perfect: bool,
}

impl Default for MeasurementModel {
    fn default() -> Self {
        MeasurementModel {
            lambda_q: 100.0,
            perfect: false,
        }
    }
}

impl MeasurementModel {
    pub fn perfect() -> Self {
        MeasurementModel {
            lambda_q: f64::INFINITY,
            perfect: true,
        }
    }

    pub fn with_quality(lambda_q: f64) -> Self {
        MeasurementModel {
            lambda_q,
            perfect: false,
        }
    }

    /// Readout standard deviation in energy units, `1/lambda_q` (0 when perfect).
    pub fn sigma(&self) -> f64 {
        if self.perfect {
            0.0
        } else {
            1.0 / self.lambda_q
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !self.perfect && !(self.lambda_q > 0.0 && self.lambda_q.is_finite()) {
            return Err(ConfigError::invalid(
                "lambda_q",
                "must be positive and finite unless perfect = true",
            ));
        }
        Ok(())
    }
}

/// Bounds that keep the per-step model first order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationLimits {
    /// Upper bound on `dt * max jump rate`.
    pub max_jump_prob: f64,
    /// Upper bound on `dt * big_omega`.
    pub max_phase_step: f64,
    /// Upper bound on `max |d omega| / (epsilon * omega0)`.
    pub max_increment_ratio: f64,
}

impl Default for ValidationLimits {
    fn default() -> Self {
        ValidationLimits {
            max_jump_prob: 0.05,
            max_phase_step: 0.05,
            max_increment_ratio: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub protocol: DriveProtocol,
    pub bath: BathParams,
    pub meas: MeasurementModel,
    pub dt: f64,
    pub n_steps: usize,
    pub initial_state: InitialCondition,
    pub master_seed: u64,
    pub n_trajectories: usize,
    pub limits: ValidationLimits,
}

pub const DEFAULT_N_STEPS: usize = 4000;
pub const DEFAULT_SEED: u64 = 20_171_024;

impl Default for SimConfig {
    fn default() -> Self {
        let protocol = DriveProtocol::default();
        SimConfig {
            protocol,
            bath: BathParams::default(),
            meas: MeasurementModel::default(),
            dt: protocol.period() / DEFAULT_N_STEPS as f64,
            n_steps: DEFAULT_N_STEPS,
            initial_state: InitialCondition::Thermal,
            master_seed: DEFAULT_SEED,
            n_trajectories: 1000,
            limits: ValidationLimits::default(),
        }
    }
}

impl SimConfig {
    /// Time step that makes `n_steps` cover exactly one drive cycle.
    pub fn one_cycle_dt(protocol: &DriveProtocol, n_steps: usize) -> f64 {
        protocol.period() / n_steps as f64
    }

    pub fn time(&self, step: usize) -> f64 {
        step as f64 * self.dt
    }

    pub fn duration(&self) -> f64 {
        self.time(self.n_steps)
    }

    /// Grid `t_0 .. t_N` (N + 1 points).
    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|n| self.time(n)).collect()
    }

    /// Exact `omega(t_n)` on the grid (N + 1 points).
    pub fn omega_track(&self) -> Vec<f64> {
        (0..=self.n_steps)
            .map(|n| self.protocol.omega_at(self.time(n)))
            .collect()
    }

    /// Largest jump rate reachable anywhere on the drive.
    pub fn max_rate(&self) -> f64 {
        // gamma_down is decreasing in omega and always exceeds gamma_up.
        self.bath.gamma_down(self.protocol.min_omega())
    }

    /// Checks every invariant; returns warnings for non-default limits.
    pub fn validate(&self) -> Result<Vec<String>, ConfigError> {
        self.protocol.validate()?;
        self.bath.validate()?;
        self.meas.validate()?;
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(ConfigError::invalid("dt", "must be positive and finite"));
        }
        if self.n_steps == 0 {
            return Err(ConfigError::invalid("n_steps", "must be at least 1"));
        }
        if self.n_trajectories == 0 {
            return Err(ConfigError::invalid("n_trajectories", "must be at least 1"));
        }
        let lim = &self.limits;
        for (key, v) in [
            ("max_jump_prob", lim.max_jump_prob),
            ("max_phase_step", lim.max_phase_step),
            ("max_increment_ratio", lim.max_increment_ratio),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ConfigError::Invalid {
                    key,
                    reason: "must be positive and finite".into(),
                });
            }
        }

        let p_max = self.dt * self.max_rate();
        if p_max > lim.max_jump_prob {
            return Err(ConfigError::invalid(
                "dt",
                format!(
                    "dt * max jump rate = {p_max} exceeds {}; shrink dt or gamma",
                    lim.max_jump_prob
                ),
            ));
        }
        let phase = self.dt * self.protocol.big_omega.abs();
        if phase > lim.max_phase_step {
            return Err(ConfigError::invalid(
                "dt",
                format!(
                    "dt * big_omega = {phase} exceeds {}; omega(t) is not linear per step",
                    lim.max_phase_step
                ),
            ));
        }
        let ratio = self.protocol.max_step_increment(self.dt) / self.protocol.floor();
        if ratio > lim.max_increment_ratio {
            return Err(ConfigError::invalid(
                "dt",
                format!(
                    "max |d omega| / (epsilon * omega0) = {ratio} exceeds {}",
                    lim.max_increment_ratio
                ),
            ));
        }

        let mut warnings = Vec::new();
        let defaults = ValidationLimits::default();
        if lim.max_jump_prob != defaults.max_jump_prob {
            warnings.push(format!(
                "max_jump_prob overridden to {} (default {})",
                lim.max_jump_prob, defaults.max_jump_prob
            ));
        }
        if lim.max_phase_step != defaults.max_phase_step {
            warnings.push(format!(
                "max_phase_step overridden to {} (default {})",
                lim.max_phase_step, defaults.max_phase_step
            ));
        }
        if lim.max_increment_ratio != defaults.max_increment_ratio {
            warnings.push(format!(
                "max_increment_ratio overridden to {} (default {})",
                lim.max_increment_ratio, defaults.max_increment_ratio
            ));
        }
        Ok(warnings)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn unit_drive(depth: f64) -> DriveProtocol {
        DriveProtocol {
            omega0: 1.0,
            big_omega: 1.0,
            modulation_depth: depth,
            epsilon: 0.25,
        }
    }

    #[test]
    fn omega_examples() {
        let p = unit_drive(0.5);
        assert_eq!(p.omega_at(0.0), 1.0);
        assert_relative_eq!(p.omega_at(PI / 2.0), 1.5, epsilon = 1e-15);
        let flat = unit_drive(0.0);
        for t in [0.0, 0.3, 7.0, 123.4] {
            assert_eq!(flat.omega_at(t), 1.0);
        }
    }

    #[test]
    fn nbar_examples() {
        let bath = BathParams {
            gamma: 0.1,
            beta: 1.0,
        };
        assert_relative_eq!(bath.nbar(2f64.ln()), 1.0, epsilon = 1e-14);
        assert_relative_eq!(bath.nbar(1.5f64.ln()), 2.0, epsilon = 1e-13);
        for omega in [50.0, 800.0, 1e6, f64::MAX] {
            let n = bath.nbar(omega);
            assert!(n.is_finite() && n >= 0.0 && n < 1e-20, "nbar({omega}) = {n}");
        }
    }

    #[test]
    fn rate_examples() {
        let closed = BathParams {
            gamma: 0.0,
            beta: 1.0,
        };
        assert_eq!(closed.rate(1.0, TwoLevelState::Ground), 0.0);
        assert_eq!(closed.rate(1.0, TwoLevelState::Excited), 0.0);

        let bath = BathParams {
            gamma: 0.1,
            beta: 1.0,
        };
        let w = 2f64.ln();
        assert_relative_eq!(bath.rate(w, TwoLevelState::Ground), 0.1, epsilon = 1e-14);
        assert_relative_eq!(bath.rate(w, TwoLevelState::Excited), 0.2, epsilon = 1e-14);
    }

    #[test]
    fn default_config_is_valid_and_covers_one_cycle() {
        let cfg = SimConfig::default();
        let warnings = cfg.validate().unwrap();
        assert!(warnings.is_empty());
        assert_relative_eq!(cfg.duration(), cfg.protocol.period(), max_relative = 1e-12);
        assert_eq!(cfg.protocol.modulation_depth, 0.5);
        assert_eq!(cfg.protocol.omega0, 1.0);
    }

    #[test]
    fn validation_rejects_coarse_steps() {
        let mut cfg = SimConfig::default();
        cfg.dt = 0.2;
        assert!(cfg.validate().is_err());

        let mut cfg = SimConfig::default();
        cfg.bath.gamma = 10.0;
        assert!(matches!(
            cfg.validate(),
            Err(ConfigError::Invalid { key: "dt", .. })
        ));

        let mut cfg = SimConfig::default();
        cfg.protocol.modulation_depth = 0.9;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn relaxed_limits_warn() {
        let mut cfg = SimConfig::default();
        cfg.bath.gamma = 2.0;
        assert!(cfg.validate().is_err());
        cfg.limits.max_jump_prob = 0.2;
        let warnings = cfg.validate().unwrap();
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains("max_jump_prob"));
    }

    #[test]
    fn imperfect_measurement_needs_positive_lambda() {
        assert!(MeasurementModel::with_quality(0.0).validate().is_err());
        assert!(MeasurementModel::with_quality(-1.0).validate().is_err());
        assert!(MeasurementModel::perfect().validate().is_ok());
        assert_eq!(MeasurementModel::with_quality(4.0).sigma(), 0.25);
    }

    proptest! {
        #[test]
        fn detailed_balance(omega in 0.05f64..20.0, beta in 0.05f64..10.0, gamma in 1e-3f64..5.0) {
            let bath = BathParams { gamma, beta };
            let ratio = bath.gamma_down(omega) / bath.gamma_up(omega);
            let expected = (beta * omega).exp();
            prop_assert!((ratio / expected - 1.0).abs() < 1e-12, "ratio {ratio} vs {expected}");
        }

        #[test]
        fn drive_is_periodic(t in 0.0f64..100.0, big_omega in 0.01f64..2.0, k in 1u32..5) {
            let p = DriveProtocol { omega0: 1.0, big_omega, modulation_depth: 0.5, epsilon: 0.25 };
            let shifted = p.omega_at(t + k as f64 * p.period());
            prop_assert!((shifted - p.omega_at(t)).abs() < 1e-12);
            prop_assert!(p.omega_at(t) >= p.floor());
        }
    }
}
