//! Android "Derived" CSV ingestion.
//!
//! Column names come from an [`AndroidColumns`] mapping; the default is
//! `config/android_columns.json`, matching the public smartphone dataset headers.
//! Ground-truth columns are optional; rows without them yield epochs with no truth.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesy::{geodetic_to_ecef, EcefPosition, GeodeticPosition};
use crate::sim::{MeasurementEpoch, PseudorangeMeasurement};

const DEFAULT_COLUMNS: &str = include_str!("../../config/android_columns.json");

/// Plausible corrected pseudorange interval for a terrestrial GPS receiver (m).
pub const PSEUDORANGE_RANGE: (f64, f64) = (1.5e7, 5.0e7);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AndroidColumns {
    pub trace: String,
    pub phone: String,
    pub time_millis: String,
    pub sat_id: String,
    pub signal_type: String,
    pub sat_x: String,
    pub sat_y: String,
    pub sat_z: String,
    pub raw_pseudorange: String,
    pub sat_clock_bias: String,
    pub isrb: String,
    pub iono_delay: String,
    pub tropo_delay: String,
    pub truth_lat_deg: String,
    pub truth_lon_deg: String,
    pub truth_height: String,
}

impl Default for AndroidColumns {
    fn default() -> Self {
        serde_json::from_str(DEFAULT_COLUMNS).expect("bundled column mapping parses")
    }
}

impl AndroidColumns {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IngestOptions {
    pub signal_filter: String,
    /// Rows of one trace whose times differ by at most this much share an epoch (ms).
    pub time_tolerance_ms: f64,
    /// Fail on the first implausible pseudorange instead of excluding it.
    pub strict_units: bool,
    pub columns: AndroidColumns,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            signal_filter: "GPS_L1".into(),
            time_tolerance_ms: 0.0,
            strict_units: false,
            columns: AndroidColumns::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AndroidDerivedRow {
    pub trace_id: String,
    pub phone_id: String,
    pub time_millis: f64,
    pub sat_id: u32,
    pub signal_type: String,
    pub raw_pseudorange: f64,
    pub sat_clock_bias: f64,
    pub isrb: f64,
    pub iono_delay: f64,
    pub tropo_delay: f64,
    pub sat_pos: EcefPosition,
    pub ground_truth: Option<EcefPosition>,
}

impl AndroidDerivedRow {
    pub fn corrected(&self) -> f64 {
        corrected_pseudorange(
            self.raw_pseudorange,
            self.sat_clock_bias,
            self.isrb,
            self.iono_delay,
            self.tropo_delay,
        )
    }
}

/// `raw + sat_clock_bias - isrb - iono - tropo`.
pub fn corrected_pseudorange(raw: f64, sat_clock_bias: f64, isrb: f64, iono: f64, tropo: f64) -> f64 {
    raw + sat_clock_bias - isrb - iono - tropo
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IngestReport {
    pub epochs: Vec<MeasurementEpoch>,
    pub rows_read: usize,
    pub excluded_signal: usize,
    pub excluded_unit: usize,
    pub excluded_duplicate: usize,
}

struct Indices {
    required: [usize; 13],
    truth: Option<[usize; 3]>,
}

fn locate(headers: &csv::StringRecord, cols: &AndroidColumns) -> Result<Indices> {
    let find = |name: &str| headers.iter().position(|h| h.trim() == name);
    let required_names = [
        &cols.trace,
        &cols.phone,
        &cols.time_millis,
        &cols.sat_id,
        &cols.signal_type,
        &cols.sat_x,
        &cols.sat_y,
        &cols.sat_z,
        &cols.raw_pseudorange,
        &cols.sat_clock_bias,
        &cols.isrb,
        &cols.iono_delay,
        &cols.tropo_delay,
    ];
    let mut required = [0; 13];
    for (slot, name) in required.iter_mut().zip(required_names) {
        *slot = find(name).ok_or_else(|| Error::Schema {
            line: 1,
            message: format!("missing column `{name}`"),
        })?;
    }
    let truth = match (
        find(&cols.truth_lat_deg),
        find(&cols.truth_lon_deg),
        find(&cols.truth_height),
    ) {
        (Some(a), Some(b), Some(c)) => Some([a, b, c]),
        _ => None,
    };
    Ok(Indices { required, truth })
}

fn parse_row(rec: &csv::StringRecord, idx: &Indices, line: usize) -> Result<AndroidDerivedRow> {
    let field = |i: usize| rec.get(i).map(str::trim).unwrap_or("");
    let num = |i: usize| -> Result<f64> {
        let s = field(idx.required[i]);
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| Error::Schema {
                line,
                message: format!("field {} is not a finite number: `{s}`", idx.required[i] + 1),
            })
    };
    let sat_id = field(idx.required[3]).parse::<u32>().map_err(|_| Error::Schema {
        line,
        message: format!("bad satellite id `{}`", field(idx.required[3])),
    })?;
    let ground_truth = idx.truth.and_then(|[a, b, c]| {
        let lat = field(a).parse::<f64>().ok()?;
        let lon = field(b).parse::<f64>().ok()?;
        let h = field(c).parse::<f64>().ok()?;
        (lat.is_finite() && lon.is_finite() && h.is_finite())
            .then(|| geodetic_to_ecef(GeodeticPosition::from_degrees(lat, lon, h)))
    });
    Ok(AndroidDerivedRow {
        trace_id: field(idx.required[0]).to_string(),
        phone_id: field(idx.required[1]).to_string(),
        time_millis: num(2)?,
        sat_id,
        signal_type: field(idx.required[4]).to_string(),
        sat_pos: EcefPosition::new(num(5)?, num(6)?, num(7)?),
        raw_pseudorange: num(8)?,
        sat_clock_bias: num(9)?,
        isrb: num(10)?,
        iono_delay: num(11)?,
        tropo_delay: num(12)?,
        ground_truth,
    })
}

/// Reads a derived CSV, keeps `opts.signal_filter` rows, applies the pseudorange
/// corrections and groups rows into epochs per (collection, phone) trace.
pub fn ingest_android_derived(path: &Path, opts: &IngestOptions) -> Result<IngestReport> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let idx = locate(&headers, &opts.columns)?;

    let mut report = IngestReport::default();
    let mut traces: BTreeMap<String, Vec<(AndroidDerivedRow, f64)>> = BTreeMap::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        report.rows_read += 1;
        let row = parse_row(&rec, &idx, line)?;
        if row.signal_type != opts.signal_filter {
            report.excluded_signal += 1;
            continue;
        }
        let rho = row.corrected();
        if !(PSEUDORANGE_RANGE.0..=PSEUDORANGE_RANGE.1).contains(&rho) {
            if opts.strict_units {
                return Err(Error::Unit { line, value: rho });
            }
            log::warn!("line {line}: corrected pseudorange {rho} m outside the plausible range, excluded");
            report.excluded_unit += 1;
            continue;
        }
        let key = format!("{}/{}", row.trace_id, row.phone_id);
        traces.entry(key).or_default().push((row, rho));
    }

    let mut next_id = 0u64;
    for (trace_id, mut rows) in traces {
        rows.sort_by(|a, b| a.0.time_millis.total_cmp(&b.0.time_millis));
        let mut start = 0;
        while start < rows.len() {
            let t0 = rows[start].0.time_millis;
            let mut end = start;
            while end < rows.len() && rows[end].0.time_millis - t0 <= opts.time_tolerance_ms {
                end += 1;
            }
            let group = &rows[start..end];
            let mut measurements: Vec<PseudorangeMeasurement> = Vec::with_capacity(group.len());
            for (row, rho) in group {
                if measurements.iter().any(|m| m.sat_id == row.sat_id) {
                    report.excluded_duplicate += 1;
                    continue;
                }
                measurements.push(PseudorangeMeasurement {
                    sat_id: row.sat_id,
                    pseudorange: *rho,
                    sat_position: row.sat_pos,
                    is_biased: false,
                    injected_bias: 0.0,
                });
            }
            report.epochs.push(MeasurementEpoch {
                epoch_id: next_id,
                time: t0 / 1000.0,
                measurements,
                truth_position: group.iter().find_map(|(r, _)| r.ground_truth),
                trace_id: trace_id.clone(),
            });
            next_id += 1;
            start = end;
        }
    }
    if report.excluded_unit > 0 {
        log::warn!("{} rows excluded for implausible pseudoranges", report.excluded_unit);
    }
    if report.excluded_duplicate > 0 {
        log::warn!("{} duplicate satellite rows dropped", report.excluded_duplicate);
    }
    log::info!(
        "ingested {} epochs from {} rows ({} other signals)",
        report.epochs.len(),
        report.rows_read,
        report.excluded_signal
    );
    Ok(report)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Schema {
            line,
            message: format!("{other:?}"),
        },
    }
}
