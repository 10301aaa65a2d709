//! The ancilla readout, reduced to its induced Gaussian statistics on the
//! measured energy change, plus jump classification and the exact
//! two-point-measurement distribution used as a closed-system oracle.

use std::fmt::Write as _;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::engine::{step_energy_change, TrueTrajectory};
use crate::error::MeasurementError;
use crate::model::{MeasurementModel, TwoLevelState};
use crate::reconstruction::{ReconstructionRule, TrackSettings, Tracker};
use crate::rng::{stream_rng, Stream};
use crate::stats::{normal_cdf, normal_tail};

/// Measured energy change: the exact change plus `z / lambda_q`.
pub fn readout(du_exact: f64, meas: &MeasurementModel, z: f64) -> f64 {
    if meas.perfect {
        du_exact
    } else {
        du_exact + z / meas.lambda_q
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TransitionLabel {
    Stay,
    JumpUp,
    JumpDown,
}

impl TransitionLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            TransitionLabel::Stay => "stay",
            TransitionLabel::JumpUp => "jump_up",
            TransitionLabel::JumpDown => "jump_down",
        }
    }

    pub fn from_transition(before: TwoLevelState, after: TwoLevelState) -> Self {
        match (before, after) {
            (TwoLevelState::Ground, TwoLevelState::Excited) => TransitionLabel::JumpUp,
            (TwoLevelState::Excited, TwoLevelState::Ground) => TransitionLabel::JumpDown,
            _ => TransitionLabel::Stay,
        }
    }

    /// State after the step. A jump label flips the state it is applied to.
    pub fn apply(self, before: TwoLevelState) -> TwoLevelState {
        match self {
            TransitionLabel::Stay => before,
            TransitionLabel::JumpUp | TransitionLabel::JumpDown => before.flipped(),
        }
    }

    pub fn is_jump(self) -> bool {
        self != TransitionLabel::Stay
    }

    /// Label under the relabelling g <-> e.
    pub fn mirrored(self) -> Self {
        match self {
            TransitionLabel::Stay => TransitionLabel::Stay,
            TransitionLabel::JumpUp => TransitionLabel::JumpDown,
            TransitionLabel::JumpDown => TransitionLabel::JumpUp,
        }
    }
}

/// Maximum-likelihood choice between "stay" and "jump" given the believed
/// state. Both hypotheses have the same readout variance, so this is a
/// nearest-mean test; ties go to `Stay`.
pub fn classify(
    de_measured: f64,
    believed: TwoLevelState,
    omega_believed: f64,
    d_omega_believed: f64,
) -> TransitionLabel {
    let stay_mean = step_energy_change(believed, believed, omega_believed, d_omega_believed);
    let jump_mean = step_energy_change(believed, believed.flipped(), omega_believed, d_omega_believed);
    if (de_measured - jump_mean).abs() < (de_measured - stay_mean).abs() {
        TransitionLabel::from_transition(believed, believed.flipped())
    } else {
        TransitionLabel::Stay
    }
}

/// Probability that the midpoint rule picks the wrong hypothesis when the two
/// means are `separation` apart.
pub fn misclassification_probability(lambda_q: f64, separation: f64) -> f64 {
    normal_tail(lambda_q * separation.abs() / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeasurementRecord {
    pub index: usize,
    pub de_measured: f64,
    pub label: TransitionLabel,
    pub believed_state_after: TwoLevelState,
}

/// Measures every step of `traj` and classifies it.
///
/// The observer's belief about `omega` and its last increment comes from a
/// corrected-rule reconstruction run alongside the classifier. A naive
/// tracker flips its accumulated error at every jump, and once that error
/// is a sizeable fraction of `omega` the classifier starts mislabelling. Readout noise is
/// drawn from the trajectory's own readout stream, one standard normal per
/// step, so records for different quality factors share the same draws.
pub fn measure_trajectory(traj: &TrueTrajectory, meas: &MeasurementModel) -> Vec<MeasurementRecord> {
    let mut rng = stream_rng(traj.config.master_seed, traj.trajectory_index, Stream::Readout);
    let settings = TrackSettings::for_trajectory(traj);
    let draws = traj.steps.iter().map(|_| rng.sample::<f64, _>(StandardNormal));
    measure_with_draws(traj, meas, &settings, draws)
}

/// [`measure_trajectory`] with explicit standard-normal draws.
pub fn measure_with_draws(
    traj: &TrueTrajectory,
    meas: &MeasurementModel,
    settings: &TrackSettings,
    draws: impl IntoIterator<Item = f64>,
) -> Vec<MeasurementRecord> {
    let mut tracker = Tracker::new(ReconstructionRule::Corrected, settings);
    traj.steps
        .iter()
        .zip(draws)
        .map(|(step, z)| {
            let de = readout(step.du_exact, meas, z);
            let label = classify(de, tracker.believed, tracker.omega_m, tracker.last_increment);
            let after = label.apply(tracker.believed);
            tracker.advance(de, after);
            MeasurementRecord {
                index: step.index,
                de_measured: de,
                label,
                believed_state_after: after,
            }
        })
        .collect()
}

pub fn records_to_csv(records: &[MeasurementRecord]) -> String {
    let mut out = String::from("index,dE_measured,label,believed_state_after\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.index,
            r.de_measured,
            r.label.as_str(),
            r.believed_state_after
        );
    }
    out
}

/// Discrete distribution of energy changes, sorted by value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteEnergyDistribution {
    pub support: Vec<(f64, f64)>,
}

impl DiscreteEnergyDistribution {
    pub fn total_probability(&self) -> f64 {
        self.support.iter().map(|(_, p)| p).sum()
    }

    pub fn probability_of(&self, du: f64) -> f64 {
        self.support
            .iter()
            .filter(|(v, _)| (v - du).abs() <= 1e-12 * (1.0 + du.abs()))
            .map(|(_, p)| p)
            .sum()
    }

    /// Inverse-CDF sample for `u` uniform on [0, 1).
    pub fn sample(&self, u: f64) -> f64 {
        let mut acc = 0.0;
        for &(v, p) in &self.support {
            acc += p;
            if u < acc {
                return v;
            }
        }
        self.support.last().map(|&(v, _)| v).unwrap_or(0.0)
    }
}

pub type Unitary2 = [[Complex64; 2]; 2];

pub const UNITARY_TOLERANCE: f64 = 1e-10;

/// Two-point-measurement distribution of `Delta U`: measure energy, evolve by
/// `evolution`, measure again. Index 0 is ground, 1 excited, and both
/// Hamiltonians are diagonal in that basis.
pub fn two_point_distribution(
    energies_before: [f64; 2],
    energies_after: [f64; 2],
    evolution: &Unitary2,
    initial_populations: [f64; 2],
) -> Result<DiscreteEnergyDistribution, MeasurementError> {
    let u = evolution;
    let mut deviation: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let dot = u[0][i].conj() * u[0][j] + u[1][i].conj() * u[1][j];
            let target = if i == j { 1.0 } else { 0.0 };
            deviation = deviation.max((dot - target).norm());
        }
    }
    if !(deviation <= UNITARY_TOLERANCE) {
        return Err(MeasurementError::NonUnitary { deviation });
    }
    let [p0, p1] = initial_populations;
    if !(p0 >= 0.0 && p1 >= 0.0 && (p0 + p1 - 1.0).abs() <= 1e-10) {
        return Err(MeasurementError::BadPopulations(p0, p1));
    }

    let mut support: Vec<(f64, f64)> = Vec::with_capacity(4);
    for (n, &pn) in initial_populations.iter().enumerate() {
        for m in 0..2 {
            let p = pn * u[m][n].norm_sqr();
            if p == 0.0 {
                continue;
            }
            let du = energies_after[m] - energies_before[n];
            match support
                .iter_mut()
                .find(|(v, _)| (*v - du).abs() <= 1e-12 * (1.0 + du.abs()))
            {
                Some(entry) => entry.1 += p,
                None => support.push((du, p)),
            }
        }
    }
    support.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(DiscreteEnergyDistribution { support })
}

/// The discrete distribution convolved with the readout Gaussian
/// (standard deviation `1/lambda_q` in energy).
#[derive(Debug, Clone, PartialEq)]
pub struct SmearedDensity {
    pub dist: DiscreteEnergyDistribution,
    pub sigma: f64,
}

pub fn smeared_density(
    dist: &DiscreteEnergyDistribution,
    meas: &MeasurementModel,
) -> Result<SmearedDensity, MeasurementError> {
    if meas.perfect || !(meas.lambda_q > 0.0 && meas.lambda_q.is_finite()) {
        return Err(MeasurementError::BadQualityFactor(meas.lambda_q));
    }
    Ok(SmearedDensity {
        dist: dist.clone(),
        sigma: meas.sigma(),
    })
}

impl SmearedDensity {
    pub fn pdf(&self, e: f64) -> f64 {
        let norm = 1.0 / (self.sigma * (2.0 * std::f64::consts::PI).sqrt());
        self.dist
            .support
            .iter()
            .map(|&(v, p)| {
                let z = (e - v) / self.sigma;
                p * norm * (-0.5 * z * z).exp()
            })
            .sum()
    }

    pub fn cdf(&self, e: f64) -> f64 {
        self.dist
            .support
            .iter()
            .map(|&(v, p)| p * normal_cdf((e - v) / self.sigma))
            .sum()
    }

    /// Density in the ancilla coordinate `x = lambda_q * E` (unit variance).
    pub fn pdf_in_pointer(&self, x: f64) -> f64 {
        self.pdf(x * self.sigma) * self.sigma
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::run_trajectory;
    use crate::model::SimConfig;
    use crate::stats::{ks_critical_value, ks_statistic, mean_and_stderr};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use TwoLevelState::{Excited, Ground};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    const IDENTITY: Unitary2 = [
        [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
        [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
    ];

    #[test]
    fn readout_examples() {
        assert_eq!(readout(0.3, &MeasurementModel::perfect(), 2.5), 0.3);
        assert_eq!(readout(0.0, &MeasurementModel::with_quality(1.0), 1.0), 1.0);
    }

    #[test]
    fn readout_ensemble_statistics() {
        // Lambda = 10 / dE0 with dE0 = 1.
        let de0 = 1.0;
        let meas = MeasurementModel::with_quality(10.0 / de0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| readout(de0, &meas, rng.sample(StandardNormal)))
            .collect();
        let (mean, _) = mean_and_stderr(&xs);
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
        assert!((mean - de0).abs() < 3.0 * 0.1 / (n as f64).sqrt());
        assert!((sd / (0.1 * de0) - 1.0).abs() < 0.05);
    }

    #[test]
    fn readout_error_passes_ks() {
        let meas = MeasurementModel::with_quality(7.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        let mut errs: Vec<f64> = (0..n)
            .map(|_| readout(0.4, &meas, rng.sample(StandardNormal)) - 0.4)
            .collect();
        let d = ks_statistic(&mut errs, |e| normal_cdf(e * 7.0));
        assert!(d < ks_critical_value(n, 0.01), "D = {d}");
    }

    #[test]
    fn classify_examples() {
        let w = 1.2;
        assert_eq!(classify(-w, Excited, w, 0.0), TransitionLabel::JumpDown);
        assert_eq!(classify(0.0, Excited, w, 0.0), TransitionLabel::Stay);
        assert_eq!(classify(w / 4.0, Ground, w, 0.0), TransitionLabel::Stay);
        assert_eq!(classify(0.51 * w, Ground, w, 0.0), TransitionLabel::JumpUp);
        assert_eq!(classify(0.49 * w, Ground, w, 0.0), TransitionLabel::Stay);
    }

    #[test]
    fn misclassification_rate_matches_tail() {
        // Excited, static splitting: means 0 (stay) and -omega (jump).
        let (w, lambda) = (1.0, 3.0);
        let meas = MeasurementModel::with_quality(lambda);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 100_000;
        let wrong = (0..n)
            .filter(|_| {
                let de = readout(0.0, &meas, rng.sample(StandardNormal));
                classify(de, Excited, w, 0.0) != TransitionLabel::Stay
            })
            .count() as f64;
        let p = misclassification_probability(lambda, w);
        let sigma = (p * (1.0 - p) * n as f64).sqrt();
        assert!((wrong - p * n as f64).abs() < 3.0 * sigma, "{wrong} vs {}", p * n as f64);
    }

    #[test]
    fn measurement_pipeline_labels_match_truth_at_high_quality() {
        let cfg = SimConfig::default();
        let traj = run_trajectory(&cfg, 3);
        let recs = measure_trajectory(&traj, &MeasurementModel::with_quality(1000.0));
        assert_eq!(recs.len(), traj.steps.len());
        for (r, s) in recs.iter().zip(&traj.steps) {
            assert_eq!(r.label, TransitionLabel::from_transition(s.state_before, s.state_after));
            assert_eq!(r.believed_state_after, s.state_after);
        }
        let csv = records_to_csv(&recs);
        assert!(csv.starts_with("index,dE_measured,label,believed_state_after\n0,"));
    }

    #[test]
    fn two_point_identity() {
        let d = two_point_distribution([-0.5, 0.5], [-0.5, 0.5], &IDENTITY, [0.3, 0.7]).unwrap();
        assert_eq!(d.support, vec![(0.0, 1.0)]);
    }

    #[test]
    fn two_point_spin_flip() {
        let w = 1.0;
        let flip = [[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]];
        let d = two_point_distribution([-w / 2.0, w / 2.0], [-w / 2.0, w / 2.0], &flip, [1.0, 0.0])
            .unwrap();
        assert_eq!(d.support, vec![(w, 1.0)]);
    }

    #[test]
    fn two_point_mixer() {
        // Direct evaluation: from g, |<g|V|g>|^2 = |<e|V|g>|^2 = 1/2.
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mixer = [[c(h, 0.0), c(h, 0.0)], [c(h, 0.0), c(-h, 0.0)]];
        let d = two_point_distribution([-0.5, 0.5], [-0.5, 0.5], &mixer, [1.0, 0.0]).unwrap();
        assert_eq!(d.support.len(), 2);
        assert!((d.probability_of(0.0) - 0.5).abs() < 1e-15);
        assert!((d.probability_of(1.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn two_point_rejects_bad_input() {
        let bad = [[c(1.0, 0.0), c(0.1, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]];
        assert!(matches!(
            two_point_distribution([0.0, 1.0], [0.0, 1.0], &bad, [1.0, 0.0]),
            Err(MeasurementError::NonUnitary { .. })
        ));
        assert!(matches!(
            two_point_distribution([0.0, 1.0], [0.0, 1.0], &IDENTITY, [0.6, 0.6]),
            Err(MeasurementError::BadPopulations(..))
        ));
    }

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn smeared_density_normalised_and_shaped() {
        let point = DiscreteEnergyDistribution {
            support: vec![(0.0, 1.0)],
        };
        let sd = smeared_density(&point, &MeasurementModel::with_quality(1.0)).unwrap();
        assert!((sd.pdf(0.0) - 1.0 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-15);
        assert!((simpson(|e| sd.pdf(e), -12.0, 12.0, 4000) - 1.0).abs() < 1e-6);

        // Lambda = 10/dE0: peak at dE0 with width dE0/10, negligible at 0.
        let de0 = 2.0;
        let shifted = DiscreteEnergyDistribution {
            support: vec![(de0, 1.0)],
        };
        let sd = smeared_density(&shifted, &MeasurementModel::with_quality(10.0 / de0)).unwrap();
        assert!((simpson(|e| sd.pdf(e), -2.0, 6.0, 8000) - 1.0).abs() < 1e-6);
        assert!(sd.pdf(0.0) < 1e-20 * sd.pdf(de0));
        assert!((sd.cdf(de0) - 0.5).abs() < 1e-12);

        // Lambda = 0.1/dE0 with a 50/50 mixture at 0 and dE0: one mode only.
        let mix = DiscreteEnergyDistribution {
            support: vec![(0.0, 0.5), (de0, 0.5)],
        };
        let sd = smeared_density(&mix, &MeasurementModel::with_quality(0.1 / de0)).unwrap();
        let xs: Vec<f64> = (0..4001).map(|i| -80.0 + i as f64 * 0.04).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| sd.pdf(x)).collect();
        let maxima = ys
            .windows(3)
            .filter(|w| w[1] > w[0] && w[1] > w[2])
            .count();
        assert_eq!(maxima, 1);
        assert!((simpson(|e| sd.pdf(e), -200.0, 200.0, 20_000) - 1.0).abs() < 1e-6);

        assert!(smeared_density(&mix, &MeasurementModel::perfect()).is_err());
    }

    proptest! {
        #[test]
        fn classify_is_scale_consistent(
            de in -3.0f64..3.0,
            omega in 0.1f64..3.0,
            d_omega in -0.01f64..0.01,
            scale in 0.01f64..100.0,
            excited in any::<bool>(),
        ) {
            let s = if excited { Excited } else { Ground };
            let a = classify(de, s, omega, d_omega);
            let b = classify(de * scale, s, omega * scale, d_omega * scale);
            // Skip points within rounding distance of the threshold.
            let mid = 0.5 * (step_energy_change(s, s, omega, d_omega)
                + step_energy_change(s, s.flipped(), omega, d_omega));
            prop_assume!((de - mid).abs() > 1e-9);
            prop_assert_eq!(a, b);
        }

        #[test]
        fn two_point_is_normalised(theta in 0.0f64..6.3, phi in 0.0f64..6.3, p0 in 0.0f64..1.0, w1 in 0.2f64..2.0) {
            let (s, co) = theta.sin_cos();
            let e = Complex64::from_polar(1.0, phi);
            let u = [[c(co, 0.0), -e.conj() * s], [e * s, c(co, 0.0)]];
            let d = two_point_distribution([-0.5, 0.5], [-w1 / 2.0, w1 / 2.0], &u, [p0, 1.0 - p0]).unwrap();
            prop_assert!((d.total_probability() - 1.0).abs() < 1e-12);
            prop_assert!(d.support.len() <= 4);
            prop_assert!(d.support.iter().all(|&(_, p)| p >= 0.0));
        }
    }
}
