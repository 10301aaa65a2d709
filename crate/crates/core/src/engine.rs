//! Ground-truth jump trajectories and the deterministic occupation equation.
//!
//! Each step of length `dt` flips the state with probability
//! `rate(omega(t_n), state) * dt`, evaluated at the start of the step. At most
//! one jump happens per step.

use std::fmt::Write as _;

use rand::Rng;
use serde::Serialize;

use crate::model::{BathParams, SimConfig, TwoLevelState};
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepRecord {
    pub index: usize,
    pub t_start: f64,
    pub state_before: TwoLevelState,
    pub state_after: TwoLevelState,
    pub jumped: bool,
    /// Exact internal-energy change over the step.
    pub du_exact: f64,
    pub omega_start: f64,
    pub d_omega_exact: f64,
}

/// Exact energy change for a step from `before` to `after` when the splitting
/// moves from `omega` to `omega + d_omega`.
pub fn step_energy_change(
    before: TwoLevelState,
    after: TwoLevelState,
    omega: f64,
    d_omega: f64,
) -> f64 {
    use TwoLevelState::*;
    match (before, after) {
        (Excited, Excited) => 0.5 * d_omega,
        (Ground, Ground) => -0.5 * d_omega,
        (Excited, Ground) => -omega - 0.5 * d_omega,
        (Ground, Excited) => omega + 0.5 * d_omega,
    }
}

/// Advances one step. `draw` is uniform on [0, 1); the state flips iff
/// `draw < rate * dt`.
pub fn step_trajectory(
    state: TwoLevelState,
    index: usize,
    config: &SimConfig,
    draw: f64,
) -> StepRecord {
    let t = config.time(index);
    let omega = config.protocol.omega_at(t);
    let d_omega = config.protocol.omega_at(config.time(index + 1)) - omega;
    let p = config.bath.rate(omega, state) * config.dt;
    let jumped = draw < p;
    let after = if jumped { state.flipped() } else { state };
    StepRecord {
        index,
        t_start: t,
        state_before: state,
        state_after: after,
        jumped,
        du_exact: step_energy_change(state, after, omega, d_omega),
        omega_start: omega,
        d_omega_exact: d_omega,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrueTrajectory {
    pub config: SimConfig,
    pub trajectory_index: u64,
    pub initial_state: TwoLevelState,
    pub steps: Vec<StepRecord>,
    pub final_state: TwoLevelState,
}

/// Runs `config.n_steps` steps. Depends only on `(config.master_seed, trajectory_index)`.
pub fn run_trajectory(config: &SimConfig, trajectory_index: u64) -> TrueTrajectory {
    let u: f64 = stream_rng(config.master_seed, trajectory_index, Stream::Initial).random();
    let initial_state = config.initial_state.sample(&config.protocol, &config.bath, u);
    let mut rng = stream_rng(config.master_seed, trajectory_index, Stream::Jumps);
    let mut state = initial_state;
    let mut steps = Vec::with_capacity(config.n_steps);
    for n in 0..config.n_steps {
        let draw: f64 = rng.random();
        let rec = step_trajectory(state, n, config, draw);
        state = rec.state_after;
        steps.push(rec);
    }
    TrueTrajectory {
        config: config.clone(),
        trajectory_index,
        initial_state,
        steps,
        final_state: state,
    }
}

impl TrueTrajectory {
    pub fn jump_count(&self) -> usize {
        self.steps.iter().filter(|s| s.jumped).count()
    }

    /// State at each grid point `t_0 .. t_N`.
    pub fn states(&self) -> Vec<TwoLevelState> {
        let mut out = Vec::with_capacity(self.steps.len() + 1);
        out.push(self.initial_state);
        out.extend(self.steps.iter().map(|s| s.state_after));
        out
    }

    /// Exact `omega(t_n)` on the grid, as used by the steps.
    pub fn omega_track(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.steps.iter().map(|s| s.omega_start).collect();
        match self.steps.last() {
            Some(last) => out.push(last.omega_start + last.d_omega_exact),
            None => out.push(self.config.protocol.omega_at(0.0)),
        }
        out
    }

    pub fn total_energy_change(&self) -> f64 {
        self.steps.iter().map(|s| s.du_exact).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "index,t_start,state_before,state_after,jumped,dU_exact,omega_start,d_omega_exact\n",
        );
        for s in &self.steps {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                s.index,
                s.t_start,
                s.state_before,
                s.state_after,
                s.jumped,
                s.du_exact,
                s.omega_start,
                s.d_omega_exact
            );
        }
        out
    }
}

/// Ensemble-level populations on the step grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OccupationTable {
    pub times: Vec<f64>,
    pub p_ground: Vec<f64>,
    pub p_excited: Vec<f64>,
}

impl OccupationTable {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn probability(&self, point: usize, state: TwoLevelState) -> f64 {
        match state {
            TwoLevelState::Ground => self.p_ground[point],
            TwoLevelState::Excited => self.p_excited[point],
        }
    }
}

/// Solves `dp_e/dt = gamma_up (1 - p_e) - gamma_down p_e` on the config grid
/// with the exact drive.
pub fn integrate_occupation(config: &SimConfig) -> OccupationTable {
    integrate_occupation_along(
        &config.omega_track(),
        config.dt,
        &config.bath,
        config
            .initial_state
            .excited_probability(&config.protocol, &config.bath),
    )
}

/// Same as [`integrate_occupation`] but along an arbitrary grid-sampled
/// splitting, taken linear within each step, starting from excited
/// population `initial_excited`. Classic RK4 per step.
pub fn integrate_occupation_along(
    omega_track: &[f64],
    dt: f64,
    bath: &BathParams,
    initial_excited: f64,
) -> OccupationTable {
    let n_points = omega_track.len();
    let mut times = Vec::with_capacity(n_points);
    let mut p_excited = Vec::with_capacity(n_points);
    let mut pe = initial_excited;
    let deriv = |omega: f64, pe: f64| bath.gamma_up(omega) * (1.0 - pe) - bath.gamma_down(omega) * pe;

    for (n, &w0) in omega_track.iter().enumerate() {
        times.push(n as f64 * dt);
        p_excited.push(pe);
        let Some(&w1) = omega_track.get(n + 1) else {
            break;
        };
        let wm = 0.5 * (w0 + w1);
        let k1 = deriv(w0, pe);
        let k2 = deriv(wm, pe + 0.5 * dt * k1);
        let k3 = deriv(wm, pe + 0.5 * dt * k2);
        let k4 = deriv(w1, pe + dt * k3);
        pe = (pe + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)).clamp(0.0, 1.0);
    }
    let p_ground = p_excited.iter().map(|p| 1.0 - p).collect();
    OccupationTable {
        times,
        p_ground,
        p_excited,
    }
}
