//! Iterative weighted least squares for position and receiver clock bias.

use nalgebra::{Matrix4, SymmetricEigen, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesy::{elevation_azimuth_in, los_and_range, ned_rotation_at, EcefPosition};
use crate::sim::{MeasurementEpoch, PseudorangeMeasurement};

/// Normal matrices worse conditioned than this are rejected.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightScheme {
    Uniform,
    /// `w = sin^2(elevation)`.
    Sin2Elevation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WlsConfig {
    /// Radians.
    pub elevation_mask: f64,
    pub weight_scheme: WeightScheme,
    pub max_iters: usize,
    /// Convergence threshold on the Gauss-Newton step (m).
    pub tol: f64,
    /// Starting point; the geocenter when absent.
    pub initial_guess: Option<EcefPosition>,
}

impl Default for WlsConfig {
    fn default() -> Self {
        Self {
            elevation_mask: 10f64.to_radians(),
            weight_scheme: WeightScheme::Sin2Elevation,
            max_iters: 20,
            tol: 1e-8,
            initial_guess: None,
        }
    }
}

impl WlsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::Config("wls tol must be > 0".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("wls max_iters must be >= 1".into()));
        }
        if !self.elevation_mask.is_finite() {
            return Err(Error::Config("wls elevation_mask must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WlsSolution {
    pub position: EcefPosition,
    /// Receiver clock bias expressed in meters.
    pub clock_bias: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Euclidean norm of the post-fit residuals of the measurements used (m).
    pub residual_norm: f64,
    pub used: usize,
}

/// Measurements at or above `mask` as seen from `at`, with their elevations.
pub fn masked_measurements(
    epoch: &MeasurementEpoch,
    at: EcefPosition,
    mask: f64,
) -> Result<Vec<(PseudorangeMeasurement, f64)>> {
    let rot = ned_rotation_at(at)?;
    let mut out = Vec::with_capacity(epoch.measurements.len());
    for m in &epoch.measurements {
        let (el, _) = elevation_azimuth_in(&rot, m.sat_position, at)?;
        if el >= mask {
            out.push((*m, el));
        }
    }
    Ok(out)
}

fn weight(scheme: WeightScheme, elevation: Option<f64>) -> f64 {
    match (scheme, elevation) {
        (WeightScheme::Sin2Elevation, Some(el)) => el.sin().powi(2),
        _ => 1.0,
    }
}

pub fn wls_solve(epoch: &MeasurementEpoch, cfg: &WlsConfig) -> Result<WlsSolution> {
    cfg.validate()?;
    // a fixed processing order makes the result independent of input order
    let mut sorted = epoch.measurements.clone();
    sorted.sort_by(|a, b| {
        a.sat_id
            .cmp(&b.sat_id)
            .then(a.pseudorange.total_cmp(&b.pseudorange))
    });

    let mut p = cfg.initial_guess.unwrap_or_default();
    let mut clock = 0.0;
    let mut converged = false;
    let mut iterations = 0;
    let mut used = Vec::new();

    for _ in 0..cfg.max_iters {
        iterations += 1;
        // masking needs a meaningful local horizon; near the geocenter there is none
        used = match ned_rotation_at(p) {
            Ok(rot) if p.is_receiver_class() => {
                let mut v = Vec::with_capacity(sorted.len());
                for m in &sorted {
                    let (el, _) = elevation_azimuth_in(&rot, m.sat_position, p)?;
                    if el >= cfg.elevation_mask {
                        v.push((*m, Some(el)));
                    }
                }
                v
            }
            _ => sorted.iter().map(|m| (*m, None)).collect(),
        };
        if used.len() < 4 {
            return Err(Error::InsufficientMeasurements {
                available: used.len(),
            });
        }

        let mut n = Matrix4::<f64>::zeros();
        let mut g = Vector4::<f64>::zeros();
        for (m, el) in &used {
            let (los, range) = los_and_range(m.sat_position, p)?;
            let h = Vector4::new(-los.x, -los.y, -los.z, 1.0);
            let r = m.pseudorange - (range + clock);
            let w = weight(cfg.weight_scheme, *el);
            n += h * h.transpose() * w;
            g += h * (w * r);
        }

        let eig = SymmetricEigen::new(n).eigenvalues;
        let (lo, hi) = eig
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(*v), hi.max(v.abs())));
        let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if !(condition <= MAX_CONDITION) {
            return Err(Error::SingularGeometry { condition });
        }
        let dx = n
            .cholesky()
            .ok_or(Error::SingularGeometry {
                condition: f64::INFINITY,
            })?
            .solve(&g);
        p = p + EcefPosition::new(dx[0], dx[1], dx[2]);
        clock += dx[3];
        if dx.norm() < cfg.tol {
            converged = true;
            break;
        }
    }

    let mut sq = 0.0;
    for (m, _) in &used {
        let r = m.pseudorange - (m.sat_position.distance(p) + clock);
        sq += r * r;
    }
    if !converged {
        log::debug!("wls did not converge for epoch {} in {iterations} iterations", epoch.epoch_id);
    }
    Ok(WlsSolution {
        position: p,
        clock_bias: clock,
        iterations,
        converged,
        residual_norm: sq.sqrt(),
        used: used.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesy::{geodetic_to_ecef, GeodeticPosition};
    use crate::sim::{nominal_constellation, propagate_all, simulate_epoch, SimNoiseConfig};
    use crate::rng::SeedStream;

    fn noiseless_epoch(offset: f64) -> MeasurementEpoch {
        let truth = geodetic_to_ecef(GeodeticPosition::from_degrees(37.4, -122.1, 30.0));
        let sats = propagate_all(&nominal_constellation(6, 4), 1234.0);
        let mut noise = SimNoiseConfig::noiseless();
        noise.receiver_clock_bias = offset;
        let mut e = simulate_epoch(truth, &sats, &noise, &mut SeedStream::new(1).rng()).unwrap();
        e.truth_position = Some(truth);
        e
    }

    #[test]
    fn noiseless_epoch_is_exact() {
        let e = noiseless_epoch(0.0);
        assert!(e.len() >= 4);
        let s = wls_solve(&e, &WlsConfig::default()).unwrap();
        assert!(s.position.distance(e.truth_position.unwrap()) < 1e-6);
        assert!(s.clock_bias.abs() < 1e-6);
    }

    #[test]
    fn common_offset_goes_to_clock() {
        let mut e = noiseless_epoch(0.0);
        for m in &mut e.measurements {
            m.pseudorange += 37.5;
        }
        let s = wls_solve(&e, &WlsConfig::default()).unwrap();
        assert!(s.position.distance(e.truth_position.unwrap()) < 1e-6);
        assert!((s.clock_bias - 37.5).abs() < 1e-6);
    }

    #[test]
    fn three_measurements_rejected() {
        let mut e = noiseless_epoch(0.0);
        e.measurements.truncate(3);
        assert!(matches!(
            wls_solve(&e, &WlsConfig::default()),
            Err(Error::InsufficientMeasurements { available: 3 })
        ));
    }

    #[test]
    fn uniform_weights_also_exact() {
        let e = noiseless_epoch(0.0);
        let cfg = WlsConfig {
            weight_scheme: WeightScheme::Uniform,
            ..WlsConfig::default()
        };
        let s = wls_solve(&e, &cfg).unwrap();
        assert!(s.position.distance(e.truth_position.unwrap()) < 1e-6);
    }
}
