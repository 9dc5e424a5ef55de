//! Parameter layout of the correction network.
//!
//! All learnable values live in one flat vector. [`Architecture`] records where
//! each named tensor sits, so gradients and optimizer moments share the layout.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeedStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetConfig {
    pub latent_dim: usize,
    pub n_heads: usize,
    pub n_encoder_layers: usize,
    pub n_decoder_layers: usize,
    pub ffn_hidden: usize,
    pub n_pool_seeds: usize,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            latent_dim: 64,
            n_heads: 4,
            n_encoder_layers: 2,
            n_decoder_layers: 2,
            ffn_hidden: 128,
            n_pool_seeds: 1,
        }
    }
}

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.latent_dim,
            self.n_heads,
            self.n_encoder_layers,
            self.n_decoder_layers,
            self.ffn_hidden,
            self.n_pool_seeds,
        ];
        if all.contains(&0) {
            return Err(Error::Config("network sizes must all be >= 1".into()));
        }
        if self.latent_dim % self.n_heads != 0 {
            return Err(Error::Config(format!(
                "latent_dim {} is not divisible by n_heads {}",
                self.latent_dim, self.n_heads
            )));
        }
        Ok(())
    }
}

/// Input row width: residual plus a 3-component line-of-sight vector.
pub const INPUT_DIM: usize = 4;
pub const OUTPUT_DIM: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorSpec {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    #[serde(skip)]
    pub offset: usize,
    #[serde(skip)]
    pub(crate) init: Init,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub(crate) enum Init {
    /// Uniform in `±sqrt(1 / fan_in)`.
    #[default]
    FanIn,
    Zeros,
    Ones,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct LinearIdx {
    pub w: usize,
    pub b: usize,
    pub fan_in: usize,
    pub fan_out: usize,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct NormIdx {
    pub gain: usize,
    pub bias: usize,
    pub dim: usize,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct AttentionIdx {
    pub q: LinearIdx,
    pub k: LinearIdx,
    pub v: LinearIdx,
    pub o: LinearIdx,
    pub heads: usize,
}

/// Post-norm transformer block: attention, add & norm, ReLU feed-forward, add & norm.
#[derive(Debug, Clone, Copy)]
pub(crate) struct BlockIdx {
    pub attn: AttentionIdx,
    pub norm1: NormIdx,
    pub ffn1: LinearIdx,
    pub ffn2: LinearIdx,
    pub norm2: NormIdx,
}

#[derive(Debug, Clone)]
pub struct Architecture {
    pub(crate) config: NetConfig,
    pub(crate) tensors: Vec<TensorSpec>,
    pub(crate) input: LinearIdx,
    pub(crate) encoders: Vec<BlockIdx>,
    pub(crate) seeds: usize,
    pub(crate) pool: BlockIdx,
    pub(crate) decoders: Vec<BlockIdx>,
    pub(crate) output: LinearIdx,
    len: usize,
}

struct Builder {
    tensors: Vec<TensorSpec>,
    len: usize,
}

impl Builder {
    fn push(&mut self, name: String, rows: usize, cols: usize, init: Init) -> usize {
        let offset = self.len;
        self.len += rows * cols;
        self.tensors.push(TensorSpec {
            name,
            rows,
            cols,
            offset,
            init,
        });
        offset
    }

    fn linear(&mut self, prefix: &str, fan_in: usize, fan_out: usize) -> LinearIdx {
        let w = self.push(format!("{prefix}.weight"), fan_in, fan_out, Init::FanIn);
        let b = self.push(format!("{prefix}.bias"), 1, fan_out, Init::Zeros);
        LinearIdx {
            w,
            b,
            fan_in,
            fan_out,
        }
    }

    fn norm(&mut self, prefix: &str, dim: usize) -> NormIdx {
        let gain = self.push(format!("{prefix}.gain"), 1, dim, Init::Ones);
        let bias = self.push(format!("{prefix}.bias"), 1, dim, Init::Zeros);
        NormIdx { gain, bias, dim }
    }

    fn block(&mut self, prefix: &str, cfg: &NetConfig) -> BlockIdx {
        let d = cfg.latent_dim;
        let attn = AttentionIdx {
            q: self.linear(&format!("{prefix}.attn.q"), d, d),
            k: self.linear(&format!("{prefix}.attn.k"), d, d),
            v: self.linear(&format!("{prefix}.attn.v"), d, d),
            o: self.linear(&format!("{prefix}.attn.o"), d, d),
            heads: cfg.n_heads,
        };
        BlockIdx {
            attn,
            norm1: self.norm(&format!("{prefix}.norm1"), d),
            ffn1: self.linear(&format!("{prefix}.ffn1"), d, cfg.ffn_hidden),
            ffn2: self.linear(&format!("{prefix}.ffn2"), cfg.ffn_hidden, d),
            norm2: self.norm(&format!("{prefix}.norm2"), d),
        }
    }
}

impl Architecture {
    pub fn new(config: NetConfig) -> Result<Self> {
        config.validate()?;
        let d = config.latent_dim;
        let mut b = Builder {
            tensors: Vec::new(),
            len: 0,
        };
        let input = b.linear("input", INPUT_DIM, d);
        let encoders = (0..config.n_encoder_layers)
            .map(|l| b.block(&format!("encoder.{l}"), &config))
            .collect();
        let seeds = b.push("pool.seeds".into(), config.n_pool_seeds, d, Init::FanIn);
        let pool = b.block("pool", &config);
        let decoders = (0..config.n_decoder_layers)
            .map(|l| b.block(&format!("decoder.{l}"), &config))
            .collect();
        let output = b.linear("output", d, OUTPUT_DIM);
        Ok(Self {
            config,
            tensors: b.tensors,
            input,
            encoders,
            seeds,
            pool,
            decoders,
            output,
            len: b.len,
        })
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn param_count(&self) -> usize {
        self.len
    }

    pub fn tensors(&self) -> &[TensorSpec] {
        &self.tensors
    }

    pub fn tensor(&self, name: &str) -> Option<&TensorSpec> {
        self.tensors.iter().find(|t| t.name == name)
    }
}

/// Learnable values of a network together with the configuration that shapes them.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub config: NetConfig,
    pub values: Vec<f64>,
}

impl NetworkParams {
    pub fn architecture(&self) -> Result<Architecture> {
        let arch = Architecture::new(self.config)?;
        if arch.param_count() != self.values.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} parameter values for an architecture of {}",
                self.values.len(),
                arch.param_count()
            )));
        }
        Ok(arch)
    }

    /// Every value zero: the network outputs a zero correction for any input.
    pub fn zeros(config: NetConfig) -> Result<Self> {
        let arch = Architecture::new(config)?;
        Ok(Self {
            config,
            values: vec![0.0; arch.param_count()],
        })
    }

    pub fn tensor(&self, name: &str) -> Option<&[f64]> {
        let arch = Architecture::new(self.config).ok()?;
        let spec = arch.tensor(name)?;
        self.values.get(spec.range())
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Weights uniform in `±sqrt(1/fan_in)`, biases zero, layer-norm gains one.
/// Pooling seeds use the latent dimension as fan-in.
pub fn init_params(config: &NetConfig, seed: u64) -> Result<NetworkParams> {
    let arch = Architecture::new(*config)?;
    let mut values = vec![0.0; arch.param_count()];
    let root = SeedStream::new(seed);
    for (i, spec) in arch.tensors().iter().enumerate() {
        let slot = &mut values[spec.range()];
        match spec.init {
            Init::Zeros => {}
            Init::Ones => slot.fill(1.0),
            Init::FanIn => {
                let fan_in = if spec.name == "pool.seeds" {
                    spec.cols
                } else {
                    spec.rows
                };
                let bound = (1.0 / fan_in as f64).sqrt();
                let mut rng = root.rng_for("tensor", i as u64);
                for v in slot.iter_mut() {
                    *v = rng.random_range(-bound..bound);
                }
            }
        }
    }
    log::info!("network initialized with {} parameters", values.len());
    Ok(NetworkParams {
        config: *config,
        values,
    })
}
