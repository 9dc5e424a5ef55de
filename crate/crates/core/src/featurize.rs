//! Conditioned network inputs: pseudorange residuals and NED line-of-sight vectors
//! about an initial position guess, correction labels, and geometry-based augmentation.

use std::collections::HashMap;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesy::{los_and_range, ned_rotation_at, EcefPosition, NedVector};
use crate::rng::{Rng, SeedStream};
use crate::sim::MeasurementEpoch;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Frame {
    Ecef,
    Ned,
}

/// One set element: `[residual, los_n, los_e, los_d]` in NED, or LOS in ECEF when `frame = Ecef`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureRow {
    pub residual: f64,
    pub los: [f64; 3],
}

impl FeatureRow {
    pub fn as_input(&self) -> [f64; 4] {
        [self.residual, self.los[0], self.los[1], self.los[2]]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub epoch_id: u64,
    pub p_init: EcefPosition,
    pub rows: Vec<FeatureRow>,
    pub frame: Frame,
}

impl FeatureSet {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// True correction `truth - p_init`, expressed in the NED frame at `p_init`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CorrectionLabel {
    pub delta_p: NedVector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureOptions {
    /// Subtract the per-epoch median residual from every residual.
    pub center_residuals: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentConfig {
    /// Augmented samples per epoch.
    pub k: usize,
    /// Per-axis half-width of the initialization box (m).
    pub eta: f64,
    /// `false` draws the initial guesses once and reuses them for every training epoch.
    pub regenerate_each_epoch: bool,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            k: 1,
            eta: 15.0,
            regenerate_each_epoch: true,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("augment k must be >= 1".into()));
        }
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(Error::Config("augment eta must be > 0".into()));
        }
        Ok(())
    }
}

/// Each ECEF axis drawn independently from `[truth - eta, truth + eta]`.
pub fn sample_initial_guess(truth: EcefPosition, eta: f64, rng: &mut Rng) -> EcefPosition {
    let mut axis = |c: f64| {
        if eta > 0.0 {
            c + rng.random_range(-eta..=eta)
        } else {
            c
        }
    };
    EcefPosition::new(axis(truth.x), axis(truth.y), axis(truth.z))
}

pub fn featurize_epoch(epoch: &MeasurementEpoch, p_init: EcefPosition) -> Result<FeatureSet> {
    featurize_epoch_with(epoch, p_init, FeatureOptions::default())
}

pub fn featurize_epoch_with(
    epoch: &MeasurementEpoch,
    p_init: EcefPosition,
    opts: FeatureOptions,
) -> Result<FeatureSet> {
    if epoch.measurements.is_empty() {
        return Err(Error::Empty("epoch without measurements"));
    }
    let rot = ned_rotation_at(p_init)?;
    let mut rows = epoch
        .measurements
        .iter()
        .map(|m| {
            let (los, range) = los_and_range(m.sat_position, p_init)?;
            Ok(FeatureRow {
                residual: m.pseudorange - range,
                los: rot.ecef_to_ned(los).to_array(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if opts.center_residuals {
        let med = median(rows.iter().map(|r| r.residual).collect());
        for r in &mut rows {
            r.residual -= med;
        }
    }
    Ok(FeatureSet {
        epoch_id: epoch.epoch_id,
        p_init,
        rows,
        frame: Frame::Ned,
    })
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn make_label(truth: EcefPosition, p_init: EcefPosition) -> Result<CorrectionLabel> {
    let rot = ned_rotation_at(p_init)?;
    Ok(CorrectionLabel {
        delta_p: rot.ecef_to_ned(truth - p_init),
    })
}

/// `cfg.k` independent initial guesses around the epoch's truth, featurized and labeled.
pub fn augment_epoch(
    epoch: &MeasurementEpoch,
    cfg: &AugmentConfig,
    opts: FeatureOptions,
    rng: &mut Rng,
) -> Result<Vec<(FeatureSet, CorrectionLabel)>> {
    let truth = epoch.truth()?;
    (0..cfg.k)
        .map(|_| {
            let p_init = sample_initial_guess(truth, cfg.eta, rng);
            Ok((
                featurize_epoch_with(epoch, p_init, opts)?,
                make_label(truth, p_init)?,
            ))
        })
        .collect()
}

pub type Sample = (FeatureSet, CorrectionLabel);

/// Produces the augmented samples for a training round.
///
/// Streams depend on `(seed, round, epoch_id)`; with `regenerate_each_epoch = false`
/// the round is pinned to 0 and results are cached, so every round sees the same draws.
#[derive(Debug, Clone)]
pub struct Augmenter {
    cfg: AugmentConfig,
    opts: FeatureOptions,
    seeds: SeedStream,
    cache: HashMap<u64, Vec<Sample>>,
}

impl Augmenter {
    pub fn new(cfg: AugmentConfig, opts: FeatureOptions, seed: u64) -> Self {
        Self {
            cfg,
            opts,
            seeds: SeedStream::new(seed),
            cache: HashMap::new(),
        }
    }

    pub fn config(&self) -> &AugmentConfig {
        &self.cfg
    }

    fn rng(&self, round: u64, epoch_id: u64) -> Rng {
        self.seeds.child("round", round).rng_for("epoch", epoch_id)
    }

    /// Samples without touching the cache; usable from several threads.
    pub fn generate(&self, epoch: &MeasurementEpoch, round: u64) -> Result<Vec<Sample>> {
        let round = if self.cfg.regenerate_each_epoch { round } else { 0 };
        augment_epoch(epoch, &self.cfg, self.opts, &mut self.rng(round, epoch.epoch_id))
    }

    pub fn samples(&mut self, epoch: &MeasurementEpoch, round: u64) -> Result<Vec<Sample>> {
        if self.cfg.regenerate_each_epoch {
            return self.generate(epoch, round);
        }
        if let Some(hit) = self.cache.get(&epoch.epoch_id) {
            return Ok(hit.clone());
        }
        let s = self.generate(epoch, 0)?;
        self.cache.insert(epoch.epoch_id, s.clone());
        Ok(s)
    }
}
