//! Smooth horizontal receiver trajectories.
//!
//! Rest-to-rest minimum-jerk (quintic) segments connect waypoints drawn uniformly
//! from a square in the local NED plane of the origin. The plane is the tangent
//! plane, so every sample has zero down-component in the origin frame.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesy::{geodetic_to_ecef, ned_rotation, EcefPosition, GeodeticPosition, NedVector};
use crate::rng::SeedStream;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub time: f64,
    pub truth_position: EcefPosition,
    pub truth_velocity: EcefPosition,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrajectoryConfig {
    /// Seconds covered by one trace; samples include both endpoints.
    pub duration: f64,
    pub dt: f64,
    pub origin_lat_deg: f64,
    pub origin_lon_deg: f64,
    pub origin_height: f64,
    /// Speed bound (m/s).
    pub v_max: f64,
    /// Half-width of the horizontal waypoint box (m).
    pub half_width: f64,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self {
            duration: 99.0,
            dt: 1.0,
            origin_lat_deg: 37.4,
            origin_lon_deg: -122.1,
            origin_height: 0.0,
            v_max: 15.0,
            half_width: 500.0,
        }
    }
}

impl TrajectoryConfig {
    pub fn origin(&self) -> GeodeticPosition {
        GeodeticPosition::from_degrees(self.origin_lat_deg, self.origin_lon_deg, self.origin_height)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0) {
            return Err(Error::Config("trajectory duration must be > 0".into()));
        }
        if !(self.dt > 0.0 && self.dt <= 1.0) {
            return Err(Error::Config("trajectory dt must be in (0, 1]".into()));
        }
        if !(self.v_max > 0.0) {
            return Err(Error::Config("v_max must be > 0".into()));
        }
        if !(self.half_width > 0.0) {
            return Err(Error::Config("half_width must be > 0".into()));
        }
        if !(self.origin_lat_deg.abs() <= 90.0) || !self.origin_lon_deg.is_finite() {
            return Err(Error::Config("origin out of range".into()));
        }
        Ok(())
    }

    pub fn sample_count(&self) -> usize {
        (self.duration / self.dt + 1e-9).floor() as usize + 1
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    start_time: f64,
    duration: f64,
    from: [f64; 2],
    to: [f64; 2],
}

impl Segment {
    /// Position and velocity at absolute time `t` within the segment.
    fn eval(&self, t: f64) -> ([f64; 2], [f64; 2]) {
        let tau = ((t - self.start_time) / self.duration).clamp(0.0, 1.0);
        let t2 = tau * tau;
        let t3 = t2 * tau;
        let s = t3 * (10.0 - 15.0 * tau + 6.0 * t2);
        let ds = 30.0 * t2 * (1.0 - 2.0 * tau + t2) / self.duration;
        let d = [self.to[0] - self.from[0], self.to[1] - self.from[1]];
        (
            [self.from[0] + s * d[0], self.from[1] + s * d[1]],
            [ds * d[0], ds * d[1]],
        )
    }
}

/// Peak speed of a rest-to-rest quintic over distance `d` and duration `T` is `1.875 d / T`.
const MIN_JERK_PEAK: f64 = 1.875;

pub fn simulate_trajectory(
    duration: f64,
    dt: f64,
    origin: GeodeticPosition,
    v_max: f64,
    seed: u64,
) -> Vec<TrajectorySample> {
    let cfg = TrajectoryConfig {
        duration,
        dt,
        origin_lat_deg: origin.latitude.to_degrees(),
        origin_lon_deg: origin.longitude.to_degrees(),
        origin_height: origin.height,
        v_max,
        ..TrajectoryConfig::default()
    };
    simulate_trajectory_with(&cfg, origin, SeedStream::new(seed))
}

pub(crate) fn simulate_trajectory_with(
    cfg: &TrajectoryConfig,
    origin: GeodeticPosition,
    seeds: SeedStream,
) -> Vec<TrajectorySample> {
    let mut rng = seeds.rng();
    let w = cfg.half_width;
    let mut waypoint = || [rng.random_range(-w..=w), rng.random_range(-w..=w)];

    let mut segments = Vec::new();
    let mut from = waypoint();
    let mut t = 0.0;
    while t <= cfg.duration {
        let to = waypoint();
        let dist = (to[0] - from[0]).hypot(to[1] - from[1]);
        let shortest = (MIN_JERK_PEAK * dist / cfg.v_max) * (1.0 + 1e-9);
        let seg_duration = shortest.max(1.0);
        segments.push(Segment {
            start_time: t,
            duration: seg_duration,
            from,
            to,
        });
        t += seg_duration;
        from = to;
    }

    let origin_ecef = geodetic_to_ecef(origin);
    let rot = ned_rotation(origin);
    let mut seg_idx = 0;
    (0..cfg.sample_count())
        .map(|k| {
            let time = k as f64 * cfg.dt;
            while seg_idx + 1 < segments.len()
                && time >= segments[seg_idx].start_time + segments[seg_idx].duration
            {
                seg_idx += 1;
            }
            let (p, v) = segments[seg_idx].eval(time);
            TrajectorySample {
                time,
                truth_position: origin_ecef + rot.ned_to_ecef(NedVector::new(p[0], p[1], 0.0)),
                truth_velocity: rot.ned_to_ecef(NedVector::new(v[0], v[1], 0.0)),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesy::ned_rotation;

    fn origin() -> GeodeticPosition {
        GeodeticPosition::from_degrees(37.4, -122.1, 0.0)
    }

    #[test]
    fn inclusive_sampling() {
        assert_eq!(simulate_trajectory(10.0, 1.0, origin(), 15.0, 1).len(), 11);
        assert_eq!(simulate_trajectory(10.0, 0.5, origin(), 15.0, 1).len(), 21);
    }

    #[test]
    fn horizontal_and_bounded() {
        let o = origin();
        let rot = ned_rotation(o);
        let o_ecef = geodetic_to_ecef(o);
        let traj = simulate_trajectory(600.0, 1.0, o, 15.0, 3);
        for s in &traj {
            let ned = rot.ecef_to_ned(s.truth_position - o_ecef);
            assert!(ned.down.abs() < 1e-6);
            assert!(s.truth_velocity.norm() <= 15.0 + 1e-9);
        }
        for w in traj.windows(2) {
            assert!(w[1].truth_position.distance(w[0].truth_position) <= 15.0 * 1.0 + 1e-9);
        }
    }

    #[test]
    fn seeded() {
        let a = simulate_trajectory(50.0, 1.0, origin(), 15.0, 9);
        let b = simulate_trajectory(50.0, 1.0, origin(), 15.0, 9);
        let c = simulate_trajectory(50.0, 1.0, origin(), 15.0, 10);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
