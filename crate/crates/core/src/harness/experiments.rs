//! End-to-end recipes shared by the CLI commands and the acceptance runs.

use crate::dataset_io::{split_dataset, Split};
use crate::error::{Error, Result};
use crate::evaluation::{compute_errors, mae_stats, truth_map, ErrorRecord, ErrorStats};
use crate::exec::{map_collect, Parallelism};
use crate::featurize::{sample_initial_guess, FeatureOptions};
use crate::geodesy::EcefPosition;
use crate::nn::network::infer_with;
use crate::nn::{train, NetworkParams, TrainOutcome};
use crate::rng::SeedStream;
use crate::sim::{simulate_dataset, MeasurementEpoch};
use crate::wls::{wls_solve, WlsConfig};

use super::config::{InitSource, RunConfig};

pub const METHOD_INIT: &str = "initialization";
pub const METHOD_DNN: &str = "dnn";
pub const METHOD_WLS: &str = "wls";

/// One initial guess per epoch with truth, drawn from the box of half-width `eta`.
/// Each epoch has its own stream, so the draw does not depend on the epoch subset.
pub fn sample_inits(epochs: &[MeasurementEpoch], eta: f64, seed: u64) -> Vec<(u64, EcefPosition)> {
    let seeds = SeedStream::new(seed);
    epochs
        .iter()
        .filter_map(|e| {
            let truth = e.truth_position?;
            let mut rng = seeds.rng_for("p_init", e.epoch_id);
            Some((e.epoch_id, sample_initial_guess(truth, eta, &mut rng)))
        })
        .collect()
}

/// WLS estimates for every solvable epoch; the second value counts the failures.
pub fn wls_estimates(
    epochs: &[MeasurementEpoch],
    cfg: &WlsConfig,
    mode: Parallelism,
) -> (Vec<(u64, EcefPosition)>, usize) {
    let sols = map_collect(mode, epochs, |e| wls_solve(e, cfg).map(|s| (e.epoch_id, s.position)));
    let mut ok = Vec::with_capacity(sols.len());
    let mut failed = 0;
    for s in sols {
        match s {
            Ok(v) => ok.push(v),
            Err(_) => failed += 1,
        }
    }
    (ok, failed)
}

/// Network-corrected positions starting from `inits`.
pub fn dnn_estimates(
    params: &NetworkParams,
    epochs: &[MeasurementEpoch],
    inits: &[(u64, EcefPosition)],
    opts: FeatureOptions,
    mode: Parallelism,
) -> Result<Vec<(u64, EcefPosition)>> {
    let arch = params.architecture()?;
    let by_id: std::collections::HashMap<u64, &MeasurementEpoch> =
        epochs.iter().map(|e| (e.epoch_id, e)).collect();
    map_collect(mode, inits, |&(id, p_init)| {
        let epoch = by_id
            .get(&id)
            .ok_or(Error::MissingTruth { epoch_id: id })?;
        infer_with(&arch, params, epoch, p_init, opts).map(|p| (id, p))
    })
    .into_iter()
    .collect()
}

/// Error records of every method evaluated on one epoch set.
#[derive(Debug, Clone, Default)]
pub struct Evaluation {
    pub runs: Vec<(String, Vec<ErrorRecord>)>,
    pub wls_failed: usize,
}

impl Evaluation {
    pub fn stats(&self, method: &str) -> Option<ErrorStats> {
        self.runs
            .iter()
            .find(|(m, _)| m == method)
            .and_then(|(_, r)| mae_stats(r).ok())
    }
}

/// Scores `params` on `epochs`: the initial guesses themselves, the network's
/// corrections of them and, when enabled, the WLS baseline.
pub fn evaluate_model(
    params: &NetworkParams,
    opts: FeatureOptions,
    epochs: &[MeasurementEpoch],
    cfg: &RunConfig,
) -> Result<Evaluation> {
    let mode = cfg.mode();
    let truths = truth_map(epochs);
    let mut out = Evaluation::default();

    let (wls, failed) = if cfg.evaluate.run_wls || cfg.evaluate.init == InitSource::Wls {
        wls_estimates(epochs, &cfg.wls, mode)
    } else {
        (Vec::new(), 0)
    };
    out.wls_failed = failed;
    let inits = match cfg.evaluate.init {
        InitSource::TruthBox => sample_inits(epochs, cfg.evaluate.eta, cfg.evaluation_seed()),
        InitSource::Wls => wls
            .iter()
            .copied()
            .filter(|(id, _)| truths.contains_key(id))
            .collect(),
    };
    if inits.is_empty() {
        return Err(Error::Empty("no evaluable epochs with ground truth"));
    }
    out.runs.push((METHOD_INIT.into(), compute_errors(&inits, &truths, METHOD_INIT)?));
    let dnn = dnn_estimates(params, epochs, &inits, opts, mode)?;
    out.runs.push((METHOD_DNN.into(), compute_errors(&dnn, &truths, METHOD_DNN)?));
    if cfg.evaluate.run_wls {
        let scored: Vec<_> = wls.into_iter().filter(|(id, _)| truths.contains_key(id)).collect();
        if !scored.is_empty() {
            out.runs.push((METHOD_WLS.into(), compute_errors(&scored, &truths, METHOD_WLS)?));
        }
    }
    log::info!(
        "evaluated {} epochs with the network, {} with WLS ({} unsolvable)",
        dnn.len(),
        out.runs.iter().find(|(m, _)| m == METHOD_WLS).map_or(0, |(_, r)| r.len()),
        out.wls_failed
    );
    Ok(out)
}

/// Result of [`run_pipeline`].
pub struct PipelineResult {
    pub split: Split,
    pub outcome: TrainOutcome,
    pub evaluation: Evaluation,
}

/// Simulate, split, train and evaluate on the test split, all from `cfg`.
pub fn run_pipeline(cfg: &RunConfig) -> Result<PipelineResult> {
    cfg.validate()?;
    let cfg = cfg.resolved();
    let mode = cfg.mode();
    let constellation = cfg.constellation.build();
    let data = simulate_dataset(&cfg.dataset, &cfg.noise, &constellation, cfg.simulation_seed(), mode)?;
    let split = split_dataset(&data, &cfg.split)?;
    let outcome = train(&split.train, &split.val, &cfg.net, &cfg.train, mode)?;
    let evaluation = evaluate_model(&outcome.params, cfg.train.features, &split.test, &cfg)?;
    Ok(PipelineResult {
        split,
        outcome,
        evaluation,
    })
}

/// Desk-scale version of the Gaussian-noise simulation scenario.
pub fn desk_gaussian() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.dataset.n_traces = 200;
    cfg.dataset.trajectory.duration = 99.0;
    cfg.train.epochs = 100;
    cfg
}

/// [`desk_gaussian`] with positive biases on a Poisson number of satellites per epoch.
pub fn desk_bias() -> RunConfig {
    let mut cfg = desk_gaussian();
    cfg.noise.bias_enabled = true;
    cfg
}
