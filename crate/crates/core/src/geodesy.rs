//! WGS-84 coordinate machinery: ECEF, geodetic and local North-East-Down frames.
//!
//! All quantities are `f64`. Positions are in meters, angles in radians.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// WGS-84 semi-major axis (m).
pub const WGS84_A: f64 = 6_378_137.0;
/// WGS-84 flattening.
pub const WGS84_F: f64 = 1.0 / 298.257_223_563;
/// WGS-84 semi-minor axis (m).
pub const WGS84_B: f64 = WGS84_A * (1.0 - WGS84_F);
/// First eccentricity squared.
pub const WGS84_E2: f64 = WGS84_F * (2.0 - WGS84_F);

/// Receiver-class positions lie in this band of geocentric radius (m).
pub const RECEIVER_RADIUS_RANGE: (f64, f64) = (6.0e6, 7.0e6);

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EcefPosition {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl EcefPosition {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dot(self, o: Self) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn distance(self, o: Self) -> f64 {
        (self - o).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn is_receiver_class(self) -> bool {
        let r = self.norm();
        r >= RECEIVER_RADIUS_RANGE.0 && r <= RECEIVER_RADIUS_RANGE.1
    }

    /// Largest absolute component.
    pub fn max_abs(self) -> f64 {
        self.x.abs().max(self.y.abs()).max(self.z.abs())
    }
}

impl Add for EcefPosition {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for EcefPosition {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for EcefPosition {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for EcefPosition {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeodeticPosition {
    /// Radians in [-pi/2, pi/2].
    pub latitude: f64,
    /// Radians in (-pi, pi].
    pub longitude: f64,
    /// Meters above the ellipsoid.
    pub height: f64,
}

impl GeodeticPosition {
    pub const fn new(latitude: f64, longitude: f64, height: f64) -> Self {
        Self {
            latitude,
            longitude,
            height,
        }
    }

    pub fn from_degrees(lat_deg: f64, lon_deg: f64, height: f64) -> Self {
        Self::new(lat_deg.to_radians(), wrap_longitude(lon_deg.to_radians()), height)
    }
}

/// North, east, down components.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NedVector {
    pub north: f64,
    pub east: f64,
    pub down: f64,
}

impl NedVector {
    pub const fn new(north: f64, east: f64, down: f64) -> Self {
        Self { north, east, down }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.north, self.east, self.down]
    }

    pub fn norm(self) -> f64 {
        (self.north * self.north + self.east * self.east + self.down * self.down).sqrt()
    }

    pub fn max_abs(self) -> f64 {
        self.north.abs().max(self.east.abs()).max(self.down.abs())
    }

    pub fn is_finite(self) -> bool {
        self.north.is_finite() && self.east.is_finite() && self.down.is_finite()
    }
}

impl Sub for NedVector {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.north - o.north, self.east - o.east, self.down - o.down)
    }
}

/// Row-major 3x3 direction-cosine matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation3 {
    pub m: [[f64; 3]; 3],
}

impl Rotation3 {
    pub fn transpose(&self) -> Rotation3 {
        let m = &self.m;
        Rotation3 {
            m: [
                [m[0][0], m[1][0], m[2][0]],
                [m[0][1], m[1][1], m[2][1]],
                [m[0][2], m[1][2], m[2][2]],
            ],
        }
    }

    pub fn apply(&self, v: [f64; 3]) -> [f64; 3] {
        let m = &self.m;
        [
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
        ]
    }

    /// ECEF free vector into this NED frame.
    pub fn ecef_to_ned(&self, v: EcefPosition) -> NedVector {
        NedVector::from_array(self.apply(v.to_array()))
    }

    /// NED free vector back to ECEF (applies the transpose).
    pub fn ned_to_ecef(&self, v: NedVector) -> EcefPosition {
        EcefPosition::from_array(self.transpose().apply(v.to_array()))
    }

    pub fn mul(&self, o: &Rotation3) -> Rotation3 {
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..3).map(|k| self.m[i][k] * o.m[k][j]).sum();
            }
        }
        Rotation3 { m: out }
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }
}

fn wrap_longitude(lon: f64) -> f64 {
    let mut l = lon.rem_euclid(TAU);
    if l > PI {
        l -= TAU;
    }
    l
}

fn prime_vertical_radius(sin_lat: f64) -> f64 {
    WGS84_A / (1.0 - WGS84_E2 * sin_lat * sin_lat).sqrt()
}

pub fn geodetic_to_ecef(g: GeodeticPosition) -> EcefPosition {
    let (sl, cl) = g.latitude.sin_cos();
    let (so, co) = g.longitude.sin_cos();
    let n = prime_vertical_radius(sl);
    EcefPosition::new(
        (n + g.height) * cl * co,
        (n + g.height) * cl * so,
        (n * (1.0 - WGS84_E2) + g.height) * sl,
    )
}

/// Inverse of [`geodetic_to_ecef`]: Bowring starting latitude, then the fixed-point
/// iteration `tan(lat) = (z + e^2 N sin(lat)) / p` until the update drops below 1e-14 rad.
pub fn ecef_to_geodetic(p: EcefPosition) -> Result<GeodeticPosition> {
    let rho = p.x.hypot(p.y);
    if (rho < 1e-3 && p.z.abs() < 1e-3) || p.norm() <= 1e5 {
        return Err(Error::NearSingular(p.to_array()));
    }
    if rho < 1e-3 {
        let lat = FRAC_PI_2.copysign(p.z);
        return Ok(GeodeticPosition::new(lat, 0.0, p.z.abs() - WGS84_B));
    }
    let lon = p.y.atan2(p.x);

    let ep2 = WGS84_E2 / (1.0 - WGS84_E2);
    let beta = (WGS84_A * p.z).atan2(WGS84_B * rho);
    let (sb, cb) = beta.sin_cos();
    let mut lat =
        (p.z + ep2 * WGS84_B * sb.powi(3)).atan2(rho - WGS84_E2 * WGS84_A * cb.powi(3));
    for _ in 0..16 {
        let n = prime_vertical_radius(lat.sin());
        let next = (p.z + WGS84_E2 * n * lat.sin()).atan2(rho);
        let delta = (next - lat).abs();
        lat = next;
        if delta < 1e-14 {
            break;
        }
    }
    let (sl, cl) = lat.sin_cos();
    let height = rho * cl + p.z * sl - WGS84_A * (1.0 - WGS84_E2 * sl * sl).sqrt();
    Ok(GeodeticPosition::new(lat, lon, height))
}

/// Rotation taking ECEF free vectors into the NED frame at `reference`.
pub fn ned_rotation(reference: GeodeticPosition) -> Rotation3 {
    let (sl, cl) = reference.latitude.sin_cos();
    let (so, co) = reference.longitude.sin_cos();
    Rotation3 {
        m: [
            [-sl * co, -sl * so, cl],
            [-so, co, 0.0],
            [-cl * co, -cl * so, -sl],
        ],
    }
}

/// NED rotation at an ECEF point.
pub fn ned_rotation_at(p: EcefPosition) -> Result<Rotation3> {
    Ok(ned_rotation(ecef_to_geodetic(p)?))
}

/// Unit line-of-sight vector from `rx` toward `sat` (ECEF) and the geometric range.
pub fn los_and_range(sat: EcefPosition, rx: EcefPosition) -> Result<(EcefPosition, f64)> {
    let d = sat - rx;
    let range = d.norm();
    if !(range >= 1.0) {
        return Err(Error::DegenerateGeometry { distance: range });
    }
    Ok((d * (1.0 / range), range))
}

/// Elevation and azimuth (radians) of `sat` as seen from `rx`; azimuth in [0, 2pi).
pub fn elevation_azimuth(sat: EcefPosition, rx: EcefPosition) -> Result<(f64, f64)> {
    let rot = ned_rotation_at(rx)?;
    elevation_azimuth_in(&rot, sat, rx)
}

/// [`elevation_azimuth`] with a precomputed NED rotation at `rx`.
pub fn elevation_azimuth_in(
    rot: &Rotation3,
    sat: EcefPosition,
    rx: EcefPosition,
) -> Result<(f64, f64)> {
    let (los, _) = los_and_range(sat, rx)?;
    let ned = rot.ecef_to_ned(los);
    let elevation = (-ned.down).clamp(-1.0, 1.0).asin();
    let mut azimuth = ned.east.atan2(ned.north);
    if azimuth < 0.0 {
        azimuth += TAU;
    }
    if azimuth >= TAU {
        azimuth -= TAU;
    }
    Ok((elevation, azimuth))
}
