//! Mini-batch training with per-round re-augmentation.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_collect, Parallelism};
use crate::featurize::{AugmentConfig, Augmenter, FeatureOptions, Sample};
use crate::rng::SeedStream;
use crate::sim::MeasurementEpoch;

use super::adam::{adam_step, AdamConfig, AdamState};
use super::network::{backward_with, forward_with, mse_loss};
use super::params::{init_params, Architecture, NetConfig, NetworkParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub augment: AugmentConfig,
    pub shuffle: bool,
    pub adam: AdamConfig,
    pub features: FeatureOptions,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 64,
            epochs: 200,
            seed: 0,
            augment: AugmentConfig::default(),
            shuffle: true,
            adam: AdamConfig::default(),
            features: FeatureOptions::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        self.augment.validate()?;
        self.adam.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Sample-weighted mean of the batch losses (m²).
    pub train_loss: f64,
    /// `None` when no validation epochs were supplied.
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: NetworkParams,
    pub adam: AdamState,
    pub history: Vec<EpochRecord>,
}

/// Mean loss of `params` over pre-built samples.
pub fn sample_loss(params: &NetworkParams, samples: &[Sample], mode: Parallelism) -> Result<f64> {
    let arch = params.architecture()?;
    loss_with(&arch, params, samples, mode)
}

fn loss_with(
    arch: &Architecture,
    params: &NetworkParams,
    samples: &[Sample],
    mode: Parallelism,
) -> Result<f64> {
    let preds = map_collect(mode, samples, |(f, _)| forward_with(arch, params, f))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<_> = samples.iter().map(|(_, l)| *l).collect();
    mse_loss(&preds, &labels)
}

/// Training state advanced one round (one pass over the training epochs) at a time.
pub struct Trainer<'a> {
    arch: Architecture,
    params: NetworkParams,
    adam: AdamState,
    cfg: TrainConfig,
    mode: Parallelism,
    train: &'a [MeasurementEpoch],
    augmenter: Augmenter,
    fixed: Option<Vec<Sample>>,
    val_samples: Vec<Sample>,
    seeds: SeedStream,
    history: Vec<EpochRecord>,
}

impl<'a> Trainer<'a> {
    pub fn new(
        train: &'a [MeasurementEpoch],
        val: &[MeasurementEpoch],
        net: &NetConfig,
        cfg: &TrainConfig,
        mode: Parallelism,
    ) -> Result<Self> {
        cfg.validate()?;
        if train.is_empty() {
            return Err(Error::Empty("training set"));
        }
        for e in train.iter().chain(val) {
            e.truth()?;
        }
        let seeds = SeedStream::new(cfg.seed);
        let params = init_params(net, seeds.child("init", 0).seed())?;
        let arch = params.architecture()?;
        let adam = AdamState::new(cfg.adam, arch.param_count());

        let val_samples = validation_samples(val, cfg, mode)?;

        Ok(Self {
            arch,
            params,
            adam,
            cfg: *cfg,
            mode,
            train,
            augmenter: Augmenter::new(cfg.augment, cfg.features, seeds.child("augment", 0).seed()),
            fixed: None,
            val_samples,
            seeds,
            history: Vec::new(),
        })
    }

    pub fn params(&self) -> &NetworkParams {
        &self.params
    }

    pub fn history(&self) -> &[EpochRecord] {
        &self.history
    }

    pub fn validation_samples(&self) -> &[Sample] {
        &self.val_samples
    }

    fn round_samples(&mut self, round: u64) -> Result<Vec<Sample>> {
        if self.cfg.augment.regenerate_each_epoch {
            let aug = &self.augmenter;
            return collect_samples(self.mode, self.train, |e| aug.generate(e, round));
        }
        if self.fixed.is_none() {
            let aug = &self.augmenter;
            self.fixed = Some(collect_samples(self.mode, self.train, |e| aug.generate(e, 0))?);
        }
        Ok(self.fixed.clone().expect("filled above"))
    }

    /// The batches round `round` will train on, in order.
    pub fn batch_plan(&mut self, round: u64) -> Result<Vec<Vec<Sample>>> {
        let mut samples = self.round_samples(round)?;
        if self.cfg.shuffle {
            samples.shuffle(&mut self.seeds.rng_for("shuffle", round));
        }
        Ok(samples
            .chunks(self.cfg.batch_size)
            .map(<[Sample]>::to_vec)
            .collect())
    }

    /// Trains one round and appends its record to the history.
    pub fn run_round(&mut self) -> Result<EpochRecord> {
        let round = self.history.len();
        let batches = self.batch_plan(round as u64)?;
        let mut weighted = 0.0;
        let mut count = 0usize;
        for (b, batch) in batches.iter().enumerate() {
            let g = backward_with(&self.arch, &self.params, batch, self.mode).inspect_err(|e| {
                log::error!("training aborted in round {round}, batch {b}: {e}");
            })?;
            adam_step(&mut self.adam, &mut self.params.values, &g.values)?;
            weighted += g.loss * batch.len() as f64;
            count += batch.len();
        }
        let val_loss = if self.val_samples.is_empty() {
            None
        } else {
            Some(loss_with(&self.arch, &self.params, &self.val_samples, self.mode)?)
        };
        let rec = EpochRecord {
            epoch: round,
            train_loss: weighted / count as f64,
            val_loss,
        };
        log::info!(
            "epoch {:>4}: train {:.4} m^2, validation {}",
            round + 1,
            rec.train_loss,
            val_loss.map_or("-".into(), |v| format!("{v:.4} m^2"))
        );
        self.history.push(rec);
        Ok(rec)
    }

    pub fn finish(self) -> TrainOutcome {
        TrainOutcome {
            params: self.params,
            adam: self.adam,
            history: self.history,
        }
    }
}

fn collect_samples<F>(mode: Parallelism, epochs: &[MeasurementEpoch], f: F) -> Result<Vec<Sample>>
where
    F: Fn(&MeasurementEpoch) -> Result<Vec<Sample>> + Sync + Send,
{
    let per_epoch = map_collect(mode, epochs, f);
    let mut out = Vec::with_capacity(per_epoch.len());
    for s in per_epoch {
        out.extend(s?);
    }
    Ok(out)
}

/// The fixed validation samples a run with `cfg` scores against after every round.
/// Drawn once per run so the curve tracks the model rather than the draws.
pub fn validation_samples(
    val: &[MeasurementEpoch],
    cfg: &TrainConfig,
    mode: Parallelism,
) -> Result<Vec<Sample>> {
    let aug = Augmenter::new(
        AugmentConfig {
            regenerate_each_epoch: false,
            ..cfg.augment
        },
        cfg.features,
        SeedStream::new(cfg.seed).child("validation", 0).seed(),
    );
    collect_samples(mode, val, |e| aug.generate(e, 0))
}

/// Trains a freshly initialized network for `cfg.epochs` rounds.
pub fn train(
    train: &[MeasurementEpoch],
    val: &[MeasurementEpoch],
    net: &NetConfig,
    cfg: &TrainConfig,
    mode: Parallelism,
) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(train, val, net, cfg, mode)?;
    for _ in 0..cfg.epochs {
        trainer.run_round()?;
    }
    Ok(trainer.finish())
}
