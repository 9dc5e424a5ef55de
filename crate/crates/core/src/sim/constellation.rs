//! Circular-orbit GPS-like constellation.
//!
//! Orbits are propagated in a frame that does not rotate with the Earth, so a
//! satellite returns to the same ECEF point after one orbital period.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::geodesy::{elevation_azimuth_in, ned_rotation_at, EcefPosition};

/// Earth gravitational parameter (m^3/s^2).
pub const MU_EARTH: f64 = 3.986_004_418e14;
/// Nominal GPS semi-major axis (m).
pub const GPS_SEMI_MAJOR_AXIS: f64 = 26_559_700.0;
/// Nominal GPS inclination (rad).
pub const GPS_INCLINATION: f64 = 55.0 * std::f64::consts::PI / 180.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SatelliteOrbit {
    pub sat_id: u32,
    pub semi_major_axis: f64,
    pub inclination: f64,
    pub raan: f64,
    pub mean_anomaly_at_epoch: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SatelliteState {
    pub sat_id: u32,
    pub position: EcefPosition,
}

impl SatelliteOrbit {
    pub fn mean_motion(&self) -> f64 {
        (MU_EARTH / self.semi_major_axis.powi(3)).sqrt()
    }

    pub fn period(&self) -> f64 {
        TAU / self.mean_motion()
    }
}

/// Walker-style constellation: `n_planes` evenly spaced RAANs, `sats_per_plane`
/// evenly spaced anomalies, and a per-plane phase offset of `2pi / (n_planes * sats_per_plane)`.
/// Satellite ids start at 1.
pub fn nominal_constellation(n_planes: usize, sats_per_plane: usize) -> Vec<SatelliteOrbit> {
    let total = (n_planes * sats_per_plane) as f64;
    let mut out = Vec::with_capacity(n_planes * sats_per_plane);
    for p in 0..n_planes {
        let raan = TAU * p as f64 / n_planes as f64;
        let phase = TAU * p as f64 / total;
        for s in 0..sats_per_plane {
            let anomaly = (TAU * s as f64 / sats_per_plane as f64 + phase).rem_euclid(TAU);
            out.push(SatelliteOrbit {
                sat_id: (p * sats_per_plane + s + 1) as u32,
                semi_major_axis: GPS_SEMI_MAJOR_AXIS,
                inclination: GPS_INCLINATION,
                raan,
                mean_anomaly_at_epoch: anomaly,
            });
        }
    }
    out
}

pub fn propagate(orbit: &SatelliteOrbit, t: f64) -> SatelliteState {
    let a = orbit.semi_major_axis;
    let u = orbit.mean_anomaly_at_epoch + orbit.mean_motion() * t;
    let (su, cu) = u.sin_cos();
    let (si, ci) = orbit.inclination.sin_cos();
    let (sr, cr) = orbit.raan.sin_cos();
    // in-plane (a cos u, a sin u, 0), rotated by inclination about x then RAAN about z
    let x = a * cu;
    let y = a * su * ci;
    let z = a * su * si;
    SatelliteState {
        sat_id: orbit.sat_id,
        position: EcefPosition::new(x * cr - y * sr, x * sr + y * cr, z),
    }
}

pub fn propagate_all(orbits: &[SatelliteOrbit], t: f64) -> Vec<SatelliteState> {
    orbits.iter().map(|o| propagate(o, t)).collect()
}

/// Satellites at or above `mask` elevation from `rx`, ordered by `sat_id`.
pub fn visible_satellites(
    states: &[SatelliteState],
    rx: EcefPosition,
    mask: f64,
) -> Vec<SatelliteState> {
    let Ok(rot) = ned_rotation_at(rx) else {
        return Vec::new();
    };
    let mut out: Vec<SatelliteState> = states
        .iter()
        .filter(|s| {
            elevation_azimuth_in(&rot, s.position, rx)
                .map(|(el, _)| el >= mask)
                .unwrap_or(false)
        })
        .copied()
        .collect();
    out.sort_by_key(|s| s.sat_id);
    out
}
