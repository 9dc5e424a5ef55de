//! Train/validation/test partitioning.
//!
//! The test split takes whole traces so no trajectory is seen in training. The
//! remaining epochs are divided between training and validation sample by sample.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeedStream;
use crate::sim::MeasurementEpoch;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    Trace,
    Sample,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
    pub seed: u64,
    /// How the test split is carved.
    pub granularity: Granularity,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_frac: 0.75,
            val_frac: 0.10,
            test_frac: 0.15,
            seed: 0,
            granularity: Granularity::Trace,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let f = [self.train_frac, self.val_frac, self.test_frac];
        if f.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::Config("split fractions must be >= 0".into()));
        }
        let sum: f64 = f.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split fractions sum to {sum}, not 1")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Split {
    pub train: Vec<MeasurementEpoch>,
    pub val: Vec<MeasurementEpoch>,
    pub test: Vec<MeasurementEpoch>,
}

/// Reproducibility record written next to split outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub spec: SplitSpec,
    pub train_traces: Vec<String>,
    pub val_traces: Vec<String>,
    pub test_traces: Vec<String>,
    pub counts: [usize; 3],
}

fn traces_of(epochs: &[MeasurementEpoch]) -> Vec<String> {
    let mut t: Vec<String> = epochs.iter().map(|e| e.trace_id.clone()).collect();
    t.sort();
    t.dedup();
    t
}

impl Split {
    pub fn manifest(&self, spec: &SplitSpec) -> SplitManifest {
        SplitManifest {
            seed: spec.seed,
            spec: *spec,
            train_traces: traces_of(&self.train),
            val_traces: traces_of(&self.val),
            test_traces: traces_of(&self.test),
            counts: [self.train.len(), self.val.len(), self.test.len()],
        }
    }
}

/// Partitions `epochs`; every input epoch lands in exactly one output, in input order.
pub fn split_dataset(epochs: &[MeasurementEpoch], spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    let seeds = SeedStream::new(spec.seed);
    let n = epochs.len();
    let mut in_test = vec![false; n];

    match spec.granularity {
        Granularity::Trace => {
            let mut traces = traces_of(epochs);
            if traces.len() < 3 {
                return Err(Error::TooFewTraces {
                    found: traces.len(),
                });
            }
            traces.shuffle(&mut seeds.rng_for("test-traces", 0));
            let size = |t: &String| epochs.iter().filter(|e| &e.trace_id == t).count();
            // shortest prefix of the shuffled traces closest to the target count
            let target = spec.test_frac * n as f64;
            let (mut best_k, mut best_gap, mut cum) = (0, target, 0usize);
            for (k, t) in traces.iter().enumerate() {
                cum += size(t);
                let gap = (cum as f64 - target).abs();
                if gap < best_gap - 1e-9 {
                    best_k = k + 1;
                    best_gap = gap;
                }
            }
            let chosen = &traces[..best_k];
            for (flag, e) in in_test.iter_mut().zip(epochs) {
                *flag = chosen.contains(&e.trace_id);
            }
        }
        Granularity::Sample => {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut seeds.rng_for("test-samples", 0));
            let k = (spec.test_frac * n as f64).round() as usize;
            for &i in &order[..k.min(n)] {
                in_test[i] = true;
            }
        }
    }

    let mut rest: Vec<usize> = (0..n).filter(|i| !in_test[*i]).collect();
    let keep = spec.train_frac + spec.val_frac;
    let n_val = if keep > 0.0 {
        ((spec.val_frac / keep) * rest.len() as f64).round() as usize
    } else {
        0
    };
    rest.shuffle(&mut seeds.rng_for("validation", 0));
    let mut in_val = vec![false; n];
    for &i in &rest[..n_val] {
        in_val[i] = true;
    }

    let mut out = Split::default();
    for (i, e) in epochs.iter().enumerate() {
        let dst = if in_test[i] {
            &mut out.test
        } else if in_val[i] {
            &mut out.val
        } else {
            &mut out.train
        };
        dst.push(e.clone());
    }
    Ok(out)
}
