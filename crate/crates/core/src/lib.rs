//! Simulation and analysis of continuous energy monitoring for a sinusoidally
//! driven two-level system in contact with a thermal bath.
//!
//! The pipeline for one trajectory is:
//!
//! 1. [`engine::run_trajectory`] draws a ground-truth jump trajectory;
//! 2. [`measurement::measure_trajectory`] reads each step's energy change
//!    through a Gaussian channel of quality factor `lambda_q` and labels
//!    jumps;
//! 3. [`reconstruction::reconstruct_track`] rebuilds `omega(t)` from the
//!    record with the naive or the jump-averaged rule;
//! 4. [`thermo`] splits the energy change into heat and work and evaluates
//!    exact and measured entropy production.
//!
//! [`ensemble`] runs many trajectories deterministically in parallel.

pub mod cli;
pub mod config;
pub mod engine;
pub mod ensemble;
pub mod error;
pub mod measurement;
pub mod model;
pub mod output;
pub mod reconstruction;
pub mod rng;
pub mod stats;
pub mod thermo;

pub use engine::{integrate_occupation, run_trajectory, OccupationTable, StepRecord, TrueTrajectory};
pub use error::{ConfigError, Error, MeasurementError, ThermoError};
pub use measurement::{classify, readout, MeasurementRecord, TransitionLabel};
pub use model::{BathParams, DriveProtocol, InitialCondition, MeasurementModel, SimConfig, TwoLevelState};
pub use reconstruction::{reconstruct_track, MeasuredTrajectory, ReconstructionRule};
pub use thermo::{accumulate_ledger, entropy_exact, entropy_measured, ft_estimator, FtEstimate, ThermoLedger};
