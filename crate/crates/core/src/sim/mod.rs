//! Simulated open-sky pseudorange epochs along smooth receiver trajectories.

mod constellation;
mod trajectory;

pub use constellation::{
    nominal_constellation, propagate, propagate_all, visible_satellites, SatelliteOrbit,
    SatelliteState, GPS_INCLINATION, GPS_SEMI_MAJOR_AXIS, MU_EARTH,
};
pub use trajectory::{simulate_trajectory, TrajectoryConfig, TrajectorySample};

use rand::seq::index;
use rand::Rng as _;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_range, Parallelism};
use crate::geodesy::EcefPosition;
use crate::rng::{Rng, SeedStream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimNoiseConfig {
    /// Standard deviation of the zero-mean Gaussian ranging noise (m).
    pub gaussian_sigma: f64,
    pub bias_enabled: bool,
    /// Interval the per-satellite positive bias is drawn from (m).
    pub bias_range: [f64; 2],
    /// Poisson rate for the number of biased satellites in an epoch.
    pub bias_count_rate: f64,
    /// Radians.
    pub elevation_mask: f64,
    /// Common receiver clock offset added to every pseudorange (m).
    pub receiver_clock_bias: f64,
}

impl Default for SimNoiseConfig {
    fn default() -> Self {
        Self {
            gaussian_sigma: 6.0,
            bias_enabled: false,
            bias_range: [50.0, 200.0],
            bias_count_rate: 1.0,
            elevation_mask: 5f64.to_radians(),
            receiver_clock_bias: 0.0,
        }
    }
}

impl SimNoiseConfig {
    pub fn noiseless() -> Self {
        Self {
            gaussian_sigma: 0.0,
            bias_enabled: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gaussian_sigma >= 0.0) {
            return Err(Error::Config("gaussian_sigma must be >= 0".into()));
        }
        if !(self.bias_range[0] <= self.bias_range[1]) {
            return Err(Error::Config("bias_range low must not exceed high".into()));
        }
        if !(self.bias_count_rate >= 0.0) {
            return Err(Error::Config("bias_count_rate must be >= 0".into()));
        }
        if !(self.elevation_mask >= 0.0 && self.elevation_mask < std::f64::consts::FRAC_PI_2) {
            return Err(Error::Config("elevation_mask must be in [0, pi/2)".into()));
        }
        if !self.receiver_clock_bias.is_finite() {
            return Err(Error::Config("receiver_clock_bias must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PseudorangeMeasurement {
    pub sat_id: u32,
    pub pseudorange: f64,
    pub sat_position: EcefPosition,
    /// Simulation metadata; never an input to estimators.
    pub is_biased: bool,
    pub injected_bias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementEpoch {
    pub epoch_id: u64,
    pub time: f64,
    pub measurements: Vec<PseudorangeMeasurement>,
    pub truth_position: Option<EcefPosition>,
    pub trace_id: String,
}

impl MeasurementEpoch {
    pub fn len(&self) -> usize {
        self.measurements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measurements.is_empty()
    }

    pub fn truth(&self) -> Result<EcefPosition> {
        self.truth_position.ok_or(Error::MissingGroundTruth {
            epoch_id: self.epoch_id,
        })
    }

    /// Checks `M >= 1` and unique satellite ids.
    pub fn validate(&self) -> Result<()> {
        if self.measurements.is_empty() {
            return Err(Error::Empty("epoch without measurements"));
        }
        let mut ids: Vec<u32> = self.measurements.iter().map(|m| m.sat_id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Schema {
                line: 0,
                message: format!("duplicate sat_id in epoch {}", self.epoch_id),
            });
        }
        Ok(())
    }
}

/// Uncapped Poisson draw for the number of biased satellites.
pub fn draw_bias_count(rng: &mut Rng, rate: f64) -> u64 {
    if rate <= 0.0 {
        return 0;
    }
    match Poisson::new(rate) {
        Ok(p) => p.sample(rng) as u64,
        Err(_) => u64::MAX,
    }
}

/// Simulates one epoch at `truth` from the satellites above `noise.elevation_mask`.
///
/// The returned epoch has `epoch_id = 0`, `time = 0` and an empty trace id; callers
/// fill those in.
pub fn simulate_epoch(
    truth: EcefPosition,
    sats: &[SatelliteState],
    noise: &SimNoiseConfig,
    rng: &mut Rng,
) -> Result<MeasurementEpoch> {
    let visible = visible_satellites(sats, truth, noise.elevation_mask);
    if visible.is_empty() {
        return Err(Error::NoVisibleSatellites);
    }
    let gauss = Normal::new(0.0, noise.gaussian_sigma)
        .map_err(|e| Error::Config(format!("gaussian_sigma: {e}")))?;

    let mut measurements: Vec<PseudorangeMeasurement> = visible
        .iter()
        .map(|s| {
            let eps = if noise.gaussian_sigma > 0.0 {
                gauss.sample(rng)
            } else {
                0.0
            };
            PseudorangeMeasurement {
                sat_id: s.sat_id,
                pseudorange: s.position.distance(truth) + noise.receiver_clock_bias + eps,
                sat_position: s.position,
                is_biased: false,
                injected_bias: 0.0,
            }
        })
        .collect();

    if noise.bias_enabled {
        let m = measurements.len();
        let count = draw_bias_count(rng, noise.bias_count_rate).min(m as u64) as usize;
        let [lo, hi] = noise.bias_range;
        for i in index::sample(rng, m, count).into_iter() {
            let bias = if hi > lo { rng.random_range(lo..=hi) } else { lo };
            let meas = &mut measurements[i];
            meas.pseudorange += bias;
            meas.is_biased = true;
            meas.injected_bias = bias;
        }
    }

    Ok(MeasurementEpoch {
        epoch_id: 0,
        time: 0.0,
        measurements,
        truth_position: Some(truth),
        trace_id: String::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstellationConfig {
    pub n_planes: usize,
    pub sats_per_plane: usize,
}

impl Default for ConstellationConfig {
    fn default() -> Self {
        Self {
            n_planes: 6,
            sats_per_plane: 4,
        }
    }
}

impl ConstellationConfig {
    pub fn build(&self) -> Vec<SatelliteOrbit> {
        nominal_constellation(self.n_planes, self.sats_per_plane)
    }
}

/// Shape of a simulated dataset: `n_traces` independent trajectories whose start
/// times are spread uniformly over `start_time_span` seconds of constellation time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub n_traces: usize,
    pub trajectory: TrajectoryConfig,
    pub start_time_span: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            n_traces: 20,
            trajectory: TrajectoryConfig::default(),
            start_time_span: 86_400.0,
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_traces == 0 {
            return Err(Error::Config("n_traces must be >= 1".into()));
        }
        if !(self.start_time_span >= 0.0) {
            return Err(Error::Config("start_time_span must be >= 0".into()));
        }
        self.trajectory.validate()
    }

    pub fn epoch_count(&self) -> usize {
        self.n_traces * self.trajectory.sample_count()
    }
}

pub fn trace_name(index: usize) -> String {
    format!("sim-{index:04}")
}

/// One epoch per trajectory sample, ids assigned sequentially across traces.
/// Each epoch draws from its own stream derived from `(seed, epoch_id)`.
pub fn simulate_dataset(
    cfg: &DatasetConfig,
    noise: &SimNoiseConfig,
    constellation: &[SatelliteOrbit],
    seed: u64,
    mode: Parallelism,
) -> Result<Vec<MeasurementEpoch>> {
    cfg.validate()?;
    noise.validate()?;
    let root = SeedStream::new(seed);
    let origin = cfg.trajectory.origin();
    let per_trace = cfg.trajectory.sample_count();

    let traces: Vec<(f64, Vec<TrajectorySample>)> = map_range(mode, cfg.n_traces, |tr| {
        let mut rng = root.rng_for("trace-start", tr as u64);
        let start = if cfg.start_time_span > 0.0 {
            rng.random_range(0.0..cfg.start_time_span)
        } else {
            0.0
        };
        let samples = trajectory::simulate_trajectory_with(
            &cfg.trajectory,
            origin,
            root.child("trajectory", tr as u64),
        );
        (start, samples)
    });

    let epochs = map_range(mode, cfg.n_traces * per_trace, |i| {
        let (tr, k) = (i / per_trace, i % per_trace);
        let (start, samples) = &traces[tr];
        let sample = &samples[k];
        let time = start + sample.time;
        let states = propagate_all(constellation, time);
        let mut rng = root.rng_for("epoch", i as u64);
        let mut epoch = simulate_epoch(sample.truth_position, &states, noise, &mut rng)?;
        epoch.epoch_id = i as u64;
        epoch.time = time;
        epoch.trace_id = trace_name(tr);
        Ok(epoch)
    });
    epochs.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesy::{geodetic_to_ecef, GeodeticPosition};

    fn rx() -> EcefPosition {
        geodetic_to_ecef(GeodeticPosition::from_degrees(37.4, -122.1, 0.0))
    }

    #[test]
    fn noiseless_forward_model() {
        let states = propagate_all(&nominal_constellation(6, 4), 1234.0);
        let mut rng = SeedStream::new(1).rng();
        let e = simulate_epoch(rx(), &states, &SimNoiseConfig::noiseless(), &mut rng).unwrap();
        for m in &e.measurements {
            assert!((m.pseudorange - m.sat_position.distance(rx())).abs() < 1e-6);
            assert!(m.pseudorange > 1.8e7 && m.pseudorange < 3.0e7);
        }
    }

    #[test]
    fn bias_cap_at_m() {
        let states = propagate_all(&nominal_constellation(6, 4), 50.0);
        let noise = SimNoiseConfig {
            gaussian_sigma: 0.0,
            bias_enabled: true,
            bias_count_rate: 1e6,
            ..SimNoiseConfig::default()
        };
        let mut rng = SeedStream::new(2).rng();
        let e = simulate_epoch(rx(), &states, &noise, &mut rng).unwrap();
        for m in &e.measurements {
            assert!(m.is_biased);
            assert!((50.0..=200.0).contains(&m.injected_bias));
            let geometric = m.sat_position.distance(rx());
            assert!((m.pseudorange - geometric - m.injected_bias).abs() < 1e-6);
        }
    }

    #[test]
    fn no_visible_satellites() {
        let states = vec![SatelliteState {
            sat_id: 1,
            position: -rx() * 4.0,
        }];
        let mut rng = SeedStream::new(3).rng();
        assert!(matches!(
            simulate_epoch(rx(), &states, &SimNoiseConfig::default(), &mut rng),
            Err(Error::NoVisibleSatellites)
        ));
    }

    #[test]
    fn noise_validation() {
        let bad = SimNoiseConfig {
            gaussian_sigma: -1.0,
            ..SimNoiseConfig::default()
        };
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
        let bad = SimNoiseConfig {
            bias_range: [10.0, 5.0],
            ..SimNoiseConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
