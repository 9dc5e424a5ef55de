use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset_io::{IngestOptions, SplitSpec};
use crate::error::{Error, Result};
use crate::exec::Parallelism;
use crate::nn::{NetConfig, TrainConfig};
use crate::rng::SeedStream;
use crate::sim::{ConstellationConfig, DatasetConfig, SimNoiseConfig};
use crate::wls::WlsConfig;

/// Where the network's initial guess comes from at evaluation time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitSource {
    /// Uniform per-axis box of half-width `eta` around the truth.
    TruthBox,
    /// The WLS solution of the same epoch.
    Wls,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalSubset {
    Test,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluateConfig {
    pub eta: f64,
    pub init: InitSource,
    pub run_wls: bool,
    pub subset: EvalSubset,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        Self {
            eta: 15.0,
            init: InitSource::TruthBox,
            run_wls: true,
            subset: EvalSubset::Test,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub etas: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            etas: vec![5.0, 15.0, 30.0],
        }
    }
}

/// Everything a command needs, read from one JSON file. Missing keys take their
/// defaults; unknown keys are rejected.
///
/// `seed` is the only seed: the split, training and evaluation seeds are derived from
/// it by [`RunConfig::resolved`], overriding any value given in the sub-sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    /// Single-threaded execution. Results are identical either way.
    pub deterministic: bool,
    pub dataset: DatasetConfig,
    pub noise: SimNoiseConfig,
    pub constellation: ConstellationConfig,
    pub split: SplitSpec,
    pub net: NetConfig,
    pub train: TrainConfig,
    pub wls: WlsConfig,
    pub evaluate: EvaluateConfig,
    pub sweep: SweepConfig,
    pub ingest: IngestOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            deterministic: false,
            dataset: DatasetConfig::default(),
            noise: SimNoiseConfig::default(),
            constellation: ConstellationConfig::default(),
            split: SplitSpec::default(),
            net: NetConfig::default(),
            train: TrainConfig::default(),
            wls: WlsConfig::default(),
            evaluate: EvaluateConfig::default(),
            sweep: SweepConfig::default(),
            ingest: IngestOptions::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        self.noise.validate()?;
        if self.constellation.n_planes == 0 || self.constellation.sats_per_plane == 0 {
            return Err(Error::Config("constellation must have at least one satellite".into()));
        }
        self.split.validate()?;
        self.net.validate()?;
        self.train.validate()?;
        self.wls.validate()?;
        if !(self.evaluate.eta > 0.0) || !self.evaluate.eta.is_finite() {
            return Err(Error::Config("evaluate.eta must be > 0".into()));
        }
        if self.sweep.etas.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
            return Err(Error::Config("sweep etas must be > 0".into()));
        }
        if !(self.ingest.time_tolerance_ms >= 0.0) {
            return Err(Error::Config("ingest.time_tolerance_ms must be >= 0".into()));
        }
        Ok(())
    }

    /// Copy with every derived seed filled in from `seed`.
    pub fn resolved(&self) -> Self {
        let root = SeedStream::new(self.seed);
        let mut out = self.clone();
        out.split.seed = root.child("split", 0).seed();
        out.train.seed = root.child("train", 0).seed();
        out
    }

    pub fn simulation_seed(&self) -> u64 {
        SeedStream::new(self.seed).child("simulate", 0).seed()
    }

    pub fn evaluation_seed(&self) -> u64 {
        SeedStream::new(self.seed).child("evaluate", 0).seed()
    }

    pub fn mode(&self) -> Parallelism {
        if self.deterministic {
            Parallelism::Sequential
        } else {
            Parallelism::Parallel
        }
    }
}
