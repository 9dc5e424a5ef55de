//! Fixtures shared by the integration tests.
#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::Path;

use gnss_setnet::geodesy::{ecef_to_geodetic, geodetic_to_ecef, GeodeticPosition};
use gnss_setnet::rng::SeedStream;
use gnss_setnet::sim::{nominal_constellation, propagate_all, visible_satellites};
use rand::Rng;

pub const ANDROID_HEADER: &str = "collectionName,phoneName,millisSinceGpsEpoch,svid,signalType,xSatPosM,ySatPosM,zSatPosM,rawPrM,satClkBiasM,isrbM,ionoDelayM,tropoDelayM,latDeg,lngDeg,heightAboveWgs84EllipsoidM";

/// One GPS_L1 row of the fixture with the values that went into it.
#[derive(Debug, Clone)]
pub struct FixtureRow {
    pub trace: String,
    pub millis: u64,
    pub svid: u32,
    pub raw: f64,
    pub sat_clock: f64,
    pub isrb: f64,
    pub iono: f64,
    pub tropo: f64,
}

impl FixtureRow {
    pub fn expected(&self) -> f64 {
        self.raw + self.sat_clock - self.isrb - self.iono - self.tropo
    }
}

/// Writes a derived-measurement CSV with `traces` collections of `epochs` epochs each.
/// Every epoch carries its visible GPS_L1 satellites plus GPS_L5 and GAL_E1 decoys.
/// Returns the GPS_L1 rows in file order.
pub fn write_android_fixture(path: &Path, traces: usize, epochs: usize, seed: u64) -> Vec<FixtureRow> {
    let mut rng = SeedStream::new(seed).rng();
    let orbits = nominal_constellation(6, 4);
    let mut text = String::from(ANDROID_HEADER);
    let mut rows = Vec::new();
    for t in 0..traces {
        let trace = format!("2021-04-{:02}-US-MTV-{}", t + 1, t % 3 + 1);
        let base = GeodeticPosition::from_degrees(37.4 + 0.01 * t as f64, -122.1, 10.0);
        for k in 0..epochs {
            let millis = 1_300_000_000_000u64 + (t as u64) * 10_000_000 + (k as u64) * 1000;
            let truth = geodetic_to_ecef(GeodeticPosition::new(
                base.latitude + 1e-6 * k as f64,
                base.longitude,
                base.height,
            ));
            let g = ecef_to_geodetic(truth).unwrap();
            let states = propagate_all(&orbits, (millis / 1000) as f64);
            for s in visible_satellites(&states, truth, 5f64.to_radians()) {
                let row = FixtureRow {
                    trace: trace.clone(),
                    millis,
                    svid: s.sat_id,
                    raw: s.position.distance(truth) + rng.random_range(-5000.0..5000.0),
                    sat_clock: rng.random_range(-2e5..2e5),
                    isrb: rng.random_range(-50.0..50.0),
                    iono: rng.random_range(1.0..15.0),
                    tropo: rng.random_range(2.0..25.0),
                };
                for signal in ["GPS_L1", "GPS_L5", "GAL_E1"] {
                    write!(
                        text,
                        "\n{},Pixel4,{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                        row.trace,
                        row.millis,
                        row.svid,
                        signal,
                        s.position.x,
                        s.position.y,
                        s.position.z,
                        row.raw,
                        row.sat_clock,
                        row.isrb,
                        row.iono,
                        row.tropo,
                        g.latitude.to_degrees(),
                        g.longitude.to_degrees(),
                        g.height
                    )
                    .unwrap();
                }
                rows.push(row);
            }
        }
    }
    std::fs::write(path, text).unwrap();
    rows
}
