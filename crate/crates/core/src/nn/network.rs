//! Public entry points: inference on feature sets, the batch loss, and its gradient.

use crate::error::{Error, Result};
use crate::exec::{chunked_reduce, Parallelism};
use crate::featurize::{featurize_epoch_with, CorrectionLabel, FeatureOptions, FeatureSet, Frame, Sample};
use crate::geodesy::{ned_rotation_at, EcefPosition, NedVector};
use crate::sim::MeasurementEpoch;

use super::params::{Architecture, NetworkParams, INPUT_DIM};
use super::tensor::Tensor2;

/// Samples per gradient partial sum. Fixes the summation order independently of threads.
pub const GRAD_CHUNK: usize = 8;

pub fn features_to_input(features: &FeatureSet) -> Result<Tensor2> {
    if features.frame != Frame::Ned {
        return Err(Error::ShapeMismatch("network input must be in the NED frame".into()));
    }
    if features.rows.is_empty() {
        return Err(Error::ShapeMismatch("network input needs at least one row".into()));
    }
    let data = features.rows.iter().flat_map(|r| r.as_input()).collect();
    Tensor2::from_vec(features.rows.len(), INPUT_DIM, data)
}

pub fn network_forward(params: &NetworkParams, features: &FeatureSet) -> Result<NedVector> {
    let arch = params.architecture()?;
    forward_with(&arch, params, features)
}

pub(crate) fn forward_with(
    arch: &Architecture,
    params: &NetworkParams,
    features: &FeatureSet,
) -> Result<NedVector> {
    let x = features_to_input(features)?;
    arch.forward(&params.values, &x).map(NedVector::from_array)
}

/// Mean squared Euclidean error over the batch (m²).
pub fn mse_loss(preds: &[NedVector], labels: &[CorrectionLabel]) -> Result<f64> {
    if preds.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: preds.len(),
            right: labels.len(),
        });
    }
    if preds.is_empty() {
        return Err(Error::Empty("loss over an empty batch"));
    }
    let sum: f64 = preds
        .iter()
        .zip(labels)
        .map(|(p, l)| {
            let d = *p - l.delta_p;
            d.north * d.north + d.east * d.east + d.down * d.down
        })
        .sum();
    Ok(sum / preds.len() as f64)
}

/// Loss and flat gradient, laid out like [`NetworkParams::values`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub loss: f64,
    pub values: Vec<f64>,
}

struct Partial {
    sq_err: f64,
    grads: Vec<f64>,
    err: Option<Error>,
}

/// Exact gradient of [`mse_loss`] over `batch` with respect to every parameter.
///
/// Per-sample passes may run in parallel; partial sums are formed over fixed chunks of
/// [`GRAD_CHUNK`] samples and merged in batch order.
pub fn backward(params: &NetworkParams, batch: &[Sample], mode: Parallelism) -> Result<Gradients> {
    let arch = params.architecture()?;
    backward_with(&arch, params, batch, mode)
}

pub(crate) fn backward_with(
    arch: &Architecture,
    params: &NetworkParams,
    batch: &[Sample],
    mode: Parallelism,
) -> Result<Gradients> {
    if batch.is_empty() {
        return Err(Error::Empty("gradient over an empty batch"));
    }
    let n = params.values.len();
    let scale = 2.0 / batch.len() as f64;
    let p = &params.values;
    let total = chunked_reduce(
        mode,
        batch,
        GRAD_CHUNK,
        || Partial {
            sq_err: 0.0,
            grads: vec![0.0; n],
            err: None,
        },
        |acc, (features, label)| {
            if acc.err.is_some() {
                return;
            }
            let step = features_to_input(features).and_then(|x| arch.forward_cached(p, &x));
            match step {
                Ok((out, cache)) => {
                    let d = [
                        out[0] - label.delta_p.north,
                        out[1] - label.delta_p.east,
                        out[2] - label.delta_p.down,
                    ];
                    acc.sq_err += d.iter().map(|v| v * v).sum::<f64>();
                    arch.backward(p, &cache, d.map(|v| v * scale), &mut acc.grads);
                }
                Err(e) => acc.err = Some(e),
            }
        },
        |acc, other| {
            if acc.err.is_some() {
                return;
            }
            if other.err.is_some() {
                acc.err = other.err;
                return;
            }
            acc.sq_err += other.sq_err;
            for (a, b) in acc.grads.iter_mut().zip(&other.grads) {
                *a += b;
            }
        },
    )
    .expect("batch is non-empty");
    if let Some(e) = total.err {
        return Err(e);
    }
    Ok(Gradients {
        loss: total.sq_err / batch.len() as f64,
        values: total.grads,
    })
}

/// Featurizes `epoch` at `p_init`, predicts the NED correction and applies it in ECEF.
pub fn infer_position(
    params: &NetworkParams,
    epoch: &MeasurementEpoch,
    p_init: EcefPosition,
    opts: FeatureOptions,
) -> Result<EcefPosition> {
    let arch = params.architecture()?;
    infer_with(&arch, params, epoch, p_init, opts)
}

pub(crate) fn infer_with(
    arch: &Architecture,
    params: &NetworkParams,
    epoch: &MeasurementEpoch,
    p_init: EcefPosition,
    opts: FeatureOptions,
) -> Result<EcefPosition> {
    let features = featurize_epoch_with(epoch, p_init, opts)?;
    let correction = forward_with(arch, params, &features)?;
    let rot = ned_rotation_at(p_init)?;
    Ok(p_init + rot.ned_to_ecef(correction))
}
