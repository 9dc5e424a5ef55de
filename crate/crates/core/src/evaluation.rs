//! Positioning error metrics and report files.
//!
//! Errors are `estimate - truth` rotated into the NED frame at the truth point.
//! Report files written by [`compare_report`]:
//!
//! - `summary.csv`: `method,count,north_mae,north_std,east_mae,east_std,down_mae,down_std`
//! - `cdf_<method>_<axis>.csv`: `method,axis,error_m,fraction`
//! - `quantiles.json`: `[{ "method", "axis", "summary": QuantileSummary }, ...]`

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesy::{ned_rotation_at, EcefPosition, NedVector};
use crate::sim::MeasurementEpoch;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    North,
    East,
    Down,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::North, Axis::East, Axis::Down];

    pub fn of(self, v: NedVector) -> f64 {
        match self {
            Axis::North => v.north,
            Axis::East => v.east,
            Axis::Down => v.down,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Axis::North => "north",
            Axis::East => "east",
            Axis::Down => "down",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub epoch_id: u64,
    pub method: String,
    pub error_ned: NedVector,
}

/// Truth positions keyed by epoch id; epochs without truth are left out.
pub fn truth_map(epochs: &[MeasurementEpoch]) -> HashMap<u64, EcefPosition> {
    epochs
        .iter()
        .filter_map(|e| e.truth_position.map(|t| (e.epoch_id, t)))
        .collect()
}

pub fn compute_errors(
    estimates: &[(u64, EcefPosition)],
    truths: &HashMap<u64, EcefPosition>,
    method: &str,
) -> Result<Vec<ErrorRecord>> {
    estimates
        .iter()
        .map(|&(epoch_id, est)| {
            let truth = *truths.get(&epoch_id).ok_or(Error::MissingTruth { epoch_id })?;
            let rot = ned_rotation_at(truth)?;
            Ok(ErrorRecord {
                epoch_id,
                method: method.to_string(),
                error_ned: rot.ecef_to_ned(est - truth),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    /// Mean absolute error per axis, `[north, east, down]` (m).
    pub mae: [f64; 3],
    /// Population standard deviation of the absolute error per axis (m).
    pub std: [f64; 3],
    pub count: usize,
}

pub fn mae_stats(records: &[ErrorRecord]) -> Result<ErrorStats> {
    if records.is_empty() {
        return Err(Error::Empty("error records"));
    }
    let n = records.len() as f64;
    let mut mae = [0.0; 3];
    let mut std = [0.0; 3];
    for (k, axis) in Axis::ALL.into_iter().enumerate() {
        let mean = records.iter().map(|r| axis.of(r.error_ned).abs()).sum::<f64>() / n;
        let var = records
            .iter()
            .map(|r| (axis.of(r.error_ned).abs() - mean).powi(2))
            .sum::<f64>()
            / n;
        mae[k] = mean;
        std[k] = var.sqrt();
    }
    Ok(ErrorStats {
        mae,
        std,
        count: records.len(),
    })
}

fn sorted_abs(records: &[ErrorRecord], axis: Axis) -> Result<Vec<f64>> {
    if records.is_empty() {
        return Err(Error::Empty("error records"));
    }
    let mut v: Vec<f64> = records.iter().map(|r| axis.of(r.error_ned).abs()).collect();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Empirical CDF of the absolute error: `(k-th smallest, k / n)` for `k = 1..=n`.
pub fn cdf_curve(records: &[ErrorRecord], axis: Axis) -> Result<Vec<(f64, f64)>> {
    let v = sorted_abs(records, axis)?;
    let n = v.len() as f64;
    Ok(v.into_iter()
        .enumerate()
        .map(|(i, e)| (e, (i + 1) as f64 / n))
        .collect())
}

/// Quantile `p` of sorted data by linear interpolation between order statistics.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileSummary {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers_low: usize,
    pub outliers_high: usize,
}

impl QuantileSummary {
    pub fn outliers(&self) -> usize {
        self.outliers_low + self.outliers_high
    }
}

/// Box-plot summary of the absolute error; whiskers sit 1.5 IQR beyond the quartiles.
pub fn quantile_summary(records: &[ErrorRecord], axis: Axis) -> Result<QuantileSummary> {
    let v = sorted_abs(records, axis)?;
    Ok(summarize_sorted(&v))
}

pub fn summarize_sorted(v: &[f64]) -> QuantileSummary {
    let q1 = quantile_sorted(v, 0.25);
    let median = quantile_sorted(v, 0.5);
    let q3 = quantile_sorted(v, 0.75);
    let iqr = (q3 - q1).abs();
    let whisker_low = q1 - 1.5 * iqr;
    let whisker_high = q3 + 1.5 * iqr;
    QuantileSummary {
        q1,
        median,
        q3,
        whisker_low,
        whisker_high,
        outliers_low: v.iter().filter(|x| **x < whisker_low).count(),
        outliers_high: v.iter().filter(|x| **x > whisker_high).count(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct QuantileEntry {
    method: String,
    axis: Axis,
    summary: QuantileSummary,
}

/// Paths of the files written by [`compare_report`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReportFiles {
    pub summary: PathBuf,
    pub cdfs: Vec<PathBuf>,
    pub quantiles: PathBuf,
}

fn file_stem(method: &str) -> String {
    method
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::io(path, std::io::Error::other(format!("{other:?}"))),
    }
}

/// Writes the comparison table, CDF point files and quantile summaries for `runs` into `dir`.
pub fn compare_report(runs: &[(String, Vec<ErrorRecord>)], dir: &Path) -> Result<ReportFiles> {
    if runs.is_empty() {
        return Err(Error::Empty("report without runs"));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = ReportFiles {
        summary: dir.join("summary.csv"),
        quantiles: dir.join("quantiles.json"),
        cdfs: Vec::new(),
    };

    let mut table = csv::Writer::from_path(&files.summary).map_err(|e| csv_err(&files.summary, e))?;
    table
        .write_record([
            "method", "count", "north_mae", "north_std", "east_mae", "east_std", "down_mae", "down_std",
        ])
        .map_err(|e| csv_err(&files.summary, e))?;
    let mut quantiles = Vec::new();
    for (method, records) in runs {
        let s = mae_stats(records)?;
        let mut row = vec![method.clone(), s.count.to_string()];
        for k in 0..3 {
            row.push(s.mae[k].to_string());
            row.push(s.std[k].to_string());
        }
        table.write_record(&row).map_err(|e| csv_err(&files.summary, e))?;

        for axis in Axis::ALL {
            let path = dir.join(format!("cdf_{}_{}.csv", file_stem(method), axis.name()));
            let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
            w.write_record(["method", "axis", "error_m", "fraction"])
                .map_err(|e| csv_err(&path, e))?;
            for (err, frac) in cdf_curve(records, axis)? {
                w.write_record([method.as_str(), axis.name(), &err.to_string(), &frac.to_string()])
                    .map_err(|e| csv_err(&path, e))?;
            }
            w.flush().map_err(|e| Error::io(&path, e))?;
            files.cdfs.push(path);
            quantiles.push(QuantileEntry {
                method: method.clone(),
                axis,
                summary: quantile_summary(records, axis)?,
            });
        }
    }
    table.flush().map_err(|e| Error::io(&files.summary, e))?;
    let json = serde_json::to_string_pretty(&quantiles).expect("summaries serialize");
    std::fs::write(&files.quantiles, json).map_err(|e| Error::io(&files.quantiles, e))?;
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesy::{geodetic_to_ecef, ned_rotation, GeodeticPosition};

    fn rec(n: f64, e: f64, d: f64) -> ErrorRecord {
        ErrorRecord {
            epoch_id: 0,
            method: "m".into(),
            error_ned: NedVector::new(n, e, d),
        }
    }

    #[test]
    fn errors_in_ned_at_truth() {
        let g = GeodeticPosition::from_degrees(37.4, -122.1, 10.0);
        let truth = geodetic_to_ecef(g);
        let truths = HashMap::from([(7, truth)]);
        let north = ned_rotation(g).ned_to_ecef(NedVector::new(3.0, 0.0, 0.0));
        let r = compute_errors(&[(7, truth), (7, truth + north)], &truths, "wls").unwrap();
        assert_eq!(r[0].error_ned, NedVector::default());
        assert!((r[1].error_ned.north - 3.0).abs() < 1e-6);
        assert!(r[1].error_ned.east.abs() < 1e-6 && r[1].error_ned.down.abs() < 1e-6);
        assert!(matches!(
            compute_errors(&[(8, truth)], &truths, "wls"),
            Err(Error::MissingTruth { epoch_id: 8 })
        ));
    }

    #[test]
    fn mae_examples() {
        let s = mae_stats(&[rec(1.0, 2.0, 3.0), rec(3.0, 2.0, 1.0)]).unwrap();
        assert_eq!(s.mae, [2.0, 2.0, 2.0]);
        let s = mae_stats(&[rec(-4.0, 0.0, 0.0)]).unwrap();
        assert_eq!(s.mae, [4.0, 0.0, 0.0]);
        assert_eq!(s.std, [0.0; 3]);
        assert!(mae_stats(&[]).is_err());
    }

    #[test]
    fn quantile_examples() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        let q = summarize_sorted(&v);
        assert_eq!((q.q1, q.median, q.q3), (25.75, 50.5, 75.25));

        let mut v = vec![0.0; 99];
        v.push(1000.0);
        assert_eq!(summarize_sorted(&v).outliers(), 1);

        let q = summarize_sorted(&[2.0; 5]);
        assert_eq!((q.q1, q.median, q.q3), (2.0, 2.0, 2.0));
    }

    #[test]
    fn single_record_cdf() {
        let c = cdf_curve(&[rec(-1.5, 0.0, 0.0)], Axis::North).unwrap();
        assert_eq!(c, vec![(1.5, 1.0)]);
    }
}
