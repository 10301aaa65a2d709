//! Heat/work split, trajectory entropy production and the integral
//! fluctuation-theorem estimator.
//!
//! Entropy production is the log-ratio of forward and time-reversed path
//! probabilities for the Markov jump process. No-jump survival factors cancel
//! between the two paths, leaving one `ln(gamma_down / gamma_up) = beta*omega`
//! per jump (positive for emission) and the boundary terms
//! `ln p_0(x_0) - ln p_T(x_T)`. The reversed process starts from the forward
//! ensemble's final occupation. With a fixed start state `p_0(x_0) = 1` and the
//! first boundary term vanishes.

use serde::Serialize;

use crate::engine::{integrate_occupation_along, OccupationTable, TrueTrajectory};
use crate::error::ThermoError;
use crate::model::{BathParams, TwoLevelState};
use crate::reconstruction::MeasuredTrajectory;
use crate::stats::{mean_and_stderr, CompensatedSum};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThermoLedger {
    pub heat: f64,
    pub work: f64,
    pub du: f64,
    pub entropy_exact: Option<f64>,
    pub entropy_measured: Option<f64>,
}

impl ThermoLedger {
    /// `du - heat - work`; zero up to rounding.
    pub fn first_law_residual(&self) -> f64 {
        self.du - self.heat - self.work
    }
}

/// Books no-jump steps as work. On a jump step the photon energy `±omega(t_n)`
/// is heat and the remaining `±d omega/2` is work.
pub fn accumulate_ledger(traj: &TrueTrajectory) -> ThermoLedger {
    let mut heat = CompensatedSum::new();
    let mut work = CompensatedSum::new();
    let mut du = CompensatedSum::new();
    for s in &traj.steps {
        du.add(s.du_exact);
        if s.jumped {
            // absorption: +omega, emission: -omega
            let q = s.state_after.sign() * s.omega_start;
            heat.add(q);
            work.add(s.state_after.sign() * 0.5 * s.d_omega_exact);
        } else {
            work.add(s.du_exact);
        }
    }
    ThermoLedger {
        heat: heat.value(),
        work: work.value(),
        du: du.value(),
        entropy_exact: None,
        entropy_measured: None,
    }
}

/// Environment entropy of one jump out of `from` at splitting `omega`:
/// `+beta*omega` for emission, `-beta*omega` for absorption.
pub fn jump_entropy(bath: &BathParams, from: TwoLevelState, omega: f64) -> f64 {
    from.sign() * bath.beta * omega
}

/// Shared path formula. `jumps` yields `(state before the jump, omega at the
/// start of the jump step)`.
pub fn path_entropy(
    jumps: impl IntoIterator<Item = (TwoLevelState, f64)>,
    initial_state: TwoLevelState,
    final_state: TwoLevelState,
    occ: &OccupationTable,
    bath: &BathParams,
    n_points: usize,
) -> Result<f64, ThermoError> {
    if occ.len() != n_points {
        return Err(ThermoError::GridMismatch {
            table: occ.len(),
            needed: n_points,
        });
    }
    let last = n_points - 1;
    let mut total = CompensatedSum::new();
    for (point, state, sign) in [(0, initial_state, 1.0), (last, final_state, -1.0)] {
        let p = occ.probability(point, state);
        if !(p > 0.0) {
            return Err(ThermoError::ZeroProbability {
                step: point,
                probability: p,
            });
        }
        total.add(sign * p.ln());
    }
    for (from, omega) in jumps {
        total.add(jump_entropy(bath, from, omega));
    }
    Ok(total.value())
}

pub fn entropy_exact(
    traj: &TrueTrajectory,
    occ: &OccupationTable,
    bath: &BathParams,
) -> Result<f64, ThermoError> {
    let jumps = traj
        .steps
        .iter()
        .filter(|s| s.jumped)
        .map(|s| (s.state_before, s.omega_start));
    path_entropy(jumps, traj.initial_state, traj.final_state, occ, bath, traj.steps.len() + 1)
}

/// Same formula as [`entropy_exact`] using detected jumps, the reconstructed
/// splitting, and an occupation table driven by the reconstructed rates from
/// the known start population `initial_excited`.
pub fn entropy_measured(
    mtraj: &MeasuredTrajectory,
    bath: &BathParams,
    dt: f64,
    initial_excited: f64,
) -> Result<f64, ThermoError> {
    let initial = mtraj.believed[0];
    let occ = integrate_occupation_along(&mtraj.omega_m, dt, bath, initial_excited);
    let jumps = mtraj
        .labels
        .iter()
        .enumerate()
        .filter(|(_, l)| l.is_jump())
        .map(|(k, _)| (mtraj.believed[k], mtraj.omega_m[k]));
    path_entropy(jumps, initial, mtraj.final_state(), &occ, bath, mtraj.omega_m.len())
}

/// Estimate of `<exp(-dS)>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FtEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

pub fn ft_estimator(entropies: &[f64]) -> Result<FtEstimate, ThermoError> {
    if entropies.len() < 2 {
        return Err(ThermoError::TooFewSamples(entropies.len()));
    }
    let weights: Vec<f64> = entropies.iter().map(|s| (-s).exp()).collect();
    let (mean, std_error) = mean_and_stderr(&weights);
    Ok(FtEstimate {
        mean,
        std_error,
        n_samples: entropies.len(),
    })
}
