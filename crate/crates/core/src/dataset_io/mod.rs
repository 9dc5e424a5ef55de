//! Dataset persistence, Android derived-file ingestion and train/validation/test splits.
//!
//! Simulated datasets are line-delimited JSON, one [`MeasurementEpoch`] per line:
//!
//! ```text
//! {"epoch_id":0,"time":5321.2,"measurements":[{"sat_id":3,"pseudorange":2.1e7,
//!   "sat_position":{"x":..,"y":..,"z":..},"is_biased":false,"injected_bias":0.0}, ...],
//!  "truth_position":{"x":..,"y":..,"z":..},"trace_id":"sim-0000"}
//! ```

mod android;
mod split;

pub use android::{
    corrected_pseudorange, ingest_android_derived, AndroidColumns, AndroidDerivedRow,
    IngestOptions, IngestReport,
};
pub use split::{split_dataset, Granularity, Split, SplitManifest, SplitSpec};

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::sim::MeasurementEpoch;

pub fn write_dataset(epochs: &[MeasurementEpoch], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for e in epochs {
        serde_json::to_writer(&mut w, e).expect("epochs serialize");
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Blank lines are skipped; any other line must hold one epoch.
pub fn read_dataset(path: &Path) -> Result<Vec<MeasurementEpoch>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let epoch: MeasurementEpoch = serde_json::from_str(&line).map_err(|e| Error::Schema {
            line: i + 1,
            message: e.to_string(),
        })?;
        epoch.validate().map_err(|e| Error::Schema {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(epoch);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Parallelism;
    use crate::sim::{simulate_dataset, ConstellationConfig, DatasetConfig, SimNoiseConfig};

    #[test]
    fn round_trip_and_errors() {
        let mut cfg = DatasetConfig::default();
        cfg.n_traces = 2;
        cfg.trajectory.duration = 49.0;
        let noise = SimNoiseConfig {
            bias_enabled: true,
            ..SimNoiseConfig::default()
        };
        let epochs = simulate_dataset(&cfg, &noise, &ConstellationConfig::default().build(), 4, Parallelism::Sequential).unwrap();
        assert_eq!(epochs.len(), 100);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        write_dataset(&epochs, &path).unwrap();
        assert_eq!(read_dataset(&path).unwrap(), epochs);

        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        let cut = &lines[2][..lines[2].len() / 2].to_string();
        lines[2] = cut;
        std::fs::write(&path, lines.join("\n")).unwrap();
        match read_dataset(&path) {
            Err(Error::Schema { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected schema error, got {other:?}"),
        }

        std::fs::write(&path, "").unwrap();
        assert!(read_dataset(&path).unwrap().is_empty());
    }
}
