//! Binary model checkpoints.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic          8 bytes   "GSNCKPT1"
//! header_len     u32
//! header         header_len bytes of UTF-8 JSON:
//!                  { "net": NetConfig, "features": FeatureOptions,
//!                    "tensors": [{ "name", "rows", "cols" }, ...],
//!                    "adam": null | { "config": AdamConfig, "t": u64 },
//!                    "history_len": n }
//! params         f64 x param_count, tensors in header order, each row-major
//! adam m, v      f64 x param_count each, present only when "adam" is not null
//! history        n records of { epoch u64, train_loss f64, has_val u8, val_loss f64 }
//! ```
//!
//! Floats are stored as raw bits, so `load(save(x)) == x` exactly.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featurize::FeatureOptions;

use super::adam::{AdamConfig, AdamState};
use super::params::{NetConfig, NetworkParams, TensorSpec};
use super::train::EpochRecord;

pub const MAGIC: &[u8; 8] = b"GSNCKPT1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: NetworkParams,
    pub features: FeatureOptions,
    pub adam: Option<AdamState>,
    pub history: Vec<EpochRecord>,
}

#[derive(Serialize, Deserialize)]
struct AdamHeader {
    config: AdamConfig,
    t: u64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    net: NetConfig,
    features: FeatureOptions,
    tensors: Vec<TensorSpec>,
    adam: Option<AdamHeader>,
    history_len: usize,
}

fn put_f64s(out: &mut Vec<u8>, v: &[f64]) {
    for x in v {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let arch = self.params.architecture()?;
        let n = arch.param_count();
        if let Some(a) = &self.adam {
            if a.m.len() != n || a.v.len() != n {
                return Err(Error::ShapeMismatch("Adam moments do not match the parameters".into()));
            }
        }
        let header = Header {
            net: self.params.config,
            features: self.features,
            tensors: arch.tensors().to_vec(),
            adam: self.adam.as_ref().map(|a| AdamHeader {
                config: a.config,
                t: a.t,
            }),
            history_len: self.history.len(),
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let header_len = u32::try_from(json.len())
            .map_err(|_| Error::Checkpoint("header too large".into()))?;

        let mut out = Vec::with_capacity(16 + json.len() + 24 * n);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&header_len.to_le_bytes());
        out.extend_from_slice(&json);
        put_f64s(&mut out, &self.params.values);
        if let Some(a) = &self.adam {
            put_f64s(&mut out, &a.m);
            put_f64s(&mut out, &a.v);
        }
        for r in &self.history {
            out.extend_from_slice(&(r.epoch as u64).to_le_bytes());
            out.extend_from_slice(&r.train_loss.to_le_bytes());
            out.push(u8::from(r.val_loss.is_some()));
            out.extend_from_slice(&r.val_loss.unwrap_or(0.0).to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let header_len = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes")) as usize;
        let header: Header = serde_json::from_slice(r.take(header_len)?)
            .map_err(|e| Error::Checkpoint(format!("header: {e}")))?;

        let zeros = NetworkParams::zeros(header.net)
            .map_err(|e| Error::Checkpoint(format!("network config: {e}")))?;
        let arch = zeros.architecture()?;
        let layout_matches = arch.tensors().len() == header.tensors.len()
            && arch
                .tensors()
                .iter()
                .zip(&header.tensors)
                .all(|(a, b)| a.name == b.name && a.rows == b.rows && a.cols == b.cols);
        if !layout_matches {
            return Err(Error::Checkpoint("tensor table does not match the network config".into()));
        }
        let n = arch.param_count();
        let values = r.f64s(n)?;
        let adam = match header.adam {
            Some(h) => Some(AdamState {
                config: h.config,
                m: r.f64s(n)?,
                v: r.f64s(n)?,
                t: h.t,
            }),
            None => None,
        };
        let mut history = Vec::with_capacity(header.history_len.min(1 << 20));
        for _ in 0..header.history_len {
            let epoch = u64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes")) as usize;
            let train_loss = r.f64s(1)?[0];
            let has_val = r.take(1)?[0] != 0;
            let val = r.f64s(1)?[0];
            history.push(EpochRecord {
                epoch,
                train_loss,
                val_loss: has_val.then_some(val),
            });
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Self {
            params: NetworkParams {
                config: header.net,
                values,
            },
            features: header.features,
            adam,
            history,
        })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|e| *e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint("truncated file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::Checkpoint("size overflow".into()))?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let bytes = ckpt.to_bytes()?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::params::init_params;

    fn small() -> NetConfig {
        NetConfig {
            latent_dim: 8,
            n_heads: 2,
            n_encoder_layers: 1,
            n_decoder_layers: 1,
            ffn_hidden: 4,
            n_pool_seeds: 2,
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let params = init_params(&small(), 9).unwrap();
        let n = params.values.len();
        let mut adam = AdamState::new(AdamConfig::default(), n);
        adam.m.iter_mut().enumerate().for_each(|(i, v)| *v = (i as f64).sin() * 1e-7);
        adam.v[0] = f64::MIN_POSITIVE;
        adam.t = 17;
        let ckpt = Checkpoint {
            params,
            features: FeatureOptions {
                center_residuals: true,
            },
            adam: Some(adam),
            history: vec![
                EpochRecord {
                    epoch: 0,
                    train_loss: 0.1 + 0.2,
                    val_loss: None,
                },
                EpochRecord {
                    epoch: 1,
                    train_loss: 1.0 / 3.0,
                    val_loss: Some(-0.0),
                },
            ],
        };
        let bytes = ckpt.to_bytes().unwrap();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, ckpt);
        assert_eq!(back.history[1].val_loss.unwrap().to_bits(), (-0.0f64).to_bits());
    }

    #[test]
    fn truncation_and_magic_detected() {
        let ckpt = Checkpoint {
            params: init_params(&small(), 1).unwrap(),
            features: FeatureOptions::default(),
            adam: None,
            history: vec![],
        };
        let bytes = ckpt.to_bytes().unwrap();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(Checkpoint::from_bytes(&bad), Err(Error::Checkpoint(_))));
    }
}
