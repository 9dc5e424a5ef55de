//! Forward and reverse-mode passes of the set-transformer correction network.
//!
//! ```text
//! X (M x 4) -> linear + ReLU -> M x D
//!   -> encoder blocks (self-attention over the M rows)
//!   -> pooling block (learned seed queries attend to the M rows) -> k x D
//!   -> decoder blocks (self-attention over the k pooled rows)
//!   -> mean over the k rows -> linear -> 3 (NED correction, m)
//! ```
//!
//! Every block is post-norm: `U = LN(Xq + MHA(Xq, Xkv))`, `Y = LN(U + FFN(U))`.
//! Nothing in the pipeline mixes rows except softmax-weighted sums, so the output
//! is invariant to row order and defined for any `M >= 1`.

use crate::error::{Error, Result};

use super::params::{Architecture, AttentionIdx, BlockIdx, LinearIdx, NormIdx, OUTPUT_DIM};
use super::tensor::{
    gemm, layer_norm, layer_norm_backward, linear, linear_backward, relu_backward,
    relu_in_place, softmax_rows, NormCache, Tensor2,
};

fn w<'a>(p: &'a [f64], l: &LinearIdx) -> &'a [f64] {
    &p[l.w..l.w + l.fan_in * l.fan_out]
}

fn b<'a>(p: &'a [f64], l: &LinearIdx) -> &'a [f64] {
    &p[l.b..l.b + l.fan_out]
}

fn apply_linear(p: &[f64], l: &LinearIdx, x: &Tensor2) -> Tensor2 {
    linear(x, w(p, l), b(p, l), l.fan_out)
}

fn backward_linear(
    p: &[f64],
    l: &LinearIdx,
    x: &Tensor2,
    dy: &Tensor2,
    grads: &mut [f64],
    need_dx: bool,
) -> Option<Tensor2> {
    // the bias always sits right after its weight
    debug_assert_eq!(l.b, l.w + l.fan_in * l.fan_out);
    let (gw, rest) = grads[l.w..].split_at_mut(l.fan_in * l.fan_out);
    linear_backward(x, w(p, l), dy, gw, &mut rest[..l.fan_out], need_dx)
}

fn apply_norm(p: &[f64], n: &NormIdx, x: &Tensor2) -> (Tensor2, NormCache) {
    layer_norm(x, &p[n.gain..n.gain + n.dim], &p[n.bias..n.bias + n.dim])
}

fn backward_norm(
    p: &[f64],
    n: &NormIdx,
    cache: &NormCache,
    dy: &Tensor2,
    grads: &mut [f64],
) -> Tensor2 {
    let (gg, rest) = grads[n.gain..].split_at_mut(n.dim);
    debug_assert_eq!(n.bias, n.gain + n.dim);
    layer_norm_backward(cache, &p[n.gain..n.gain + n.dim], dy, gg, &mut rest[..n.dim])
}

fn check(t: &Tensor2, layer: &str) -> Result<()> {
    if t.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFiniteActivation {
            layer: layer.to_string(),
        })
    }
}

#[derive(Debug, Clone)]
pub(crate) struct AttentionCache {
    xq: Tensor2,
    xkv: Tensor2,
    q: Tensor2,
    k: Tensor2,
    v: Tensor2,
    probs: Vec<Tensor2>,
    concat: Tensor2,
}

/// Scaled dot-product attention of `xq` over `xkv`, `heads` heads, no masking.
fn attention_forward(
    p: &[f64],
    idx: &AttentionIdx,
    xq: &Tensor2,
    xkv: &Tensor2,
) -> (Tensor2, AttentionCache) {
    let d = idx.q.fan_out;
    let dh = d / idx.heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let (nq, m) = (xq.rows, xkv.rows);

    let q = apply_linear(p, &idx.q, xq);
    let k = apply_linear(p, &idx.k, xkv);
    let v = apply_linear(p, &idx.v, xkv);
    let mut concat = Tensor2::zeros(nq, d);
    let mut probs = Vec::with_capacity(idx.heads);
    for h in 0..idx.heads {
        let off = h * dh;
        let mut s = Tensor2::zeros(nq, m);
        gemm(nq, dh, m, scale, &q.data[off..], (d, 1), &k.data[off..], (1, d), 0.0, &mut s.data, (m, 1));
        softmax_rows(&mut s);
        gemm(nq, m, dh, 1.0, &s.data, (m, 1), &v.data[off..], (d, 1), 0.0, &mut concat.data[off..], (d, 1));
        probs.push(s);
    }
    let out = apply_linear(p, &idx.o, &concat);
    (
        out,
        AttentionCache {
            xq: xq.clone(),
            xkv: xkv.clone(),
            q,
            k,
            v,
            probs,
            concat,
        },
    )
}

/// Returns `(d xq, d xkv)`.
fn attention_backward(
    p: &[f64],
    idx: &AttentionIdx,
    c: &AttentionCache,
    dout: &Tensor2,
    grads: &mut [f64],
) -> (Tensor2, Tensor2) {
    let d = idx.q.fan_out;
    let dh = d / idx.heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let (nq, m) = (c.xq.rows, c.xkv.rows);

    let dconcat = backward_linear(p, &idx.o, &c.concat, dout, grads, true).expect("dx requested");
    let mut dq = Tensor2::zeros(nq, d);
    let mut dk = Tensor2::zeros(m, d);
    let mut dv = Tensor2::zeros(m, d);
    let mut dp = Tensor2::zeros(nq, m);
    for h in 0..idx.heads {
        let off = h * dh;
        let probs = &c.probs[h];
        gemm(nq, dh, m, 1.0, &dconcat.data[off..], (d, 1), &c.v.data[off..], (1, d), 0.0, &mut dp.data, (m, 1));
        gemm(m, nq, dh, 1.0, &probs.data, (1, m), &dconcat.data[off..], (d, 1), 0.0, &mut dv.data[off..], (d, 1));
        // softmax Jacobian, row by row
        for r in 0..nq {
            let pr = probs.row(r);
            let gr = dp.row_mut(r);
            let dot: f64 = pr.iter().zip(gr.iter()).map(|(a, b)| a * b).sum();
            for (g, pv) in gr.iter_mut().zip(pr) {
                *g = pv * (*g - dot);
            }
        }
        gemm(nq, m, dh, scale, &dp.data, (m, 1), &c.k.data[off..], (d, 1), 0.0, &mut dq.data[off..], (d, 1));
        gemm(m, nq, dh, scale, &dp.data, (1, m), &c.q.data[off..], (d, 1), 0.0, &mut dk.data[off..], (d, 1));
    }
    let dxq = backward_linear(p, &idx.q, &c.xq, &dq, grads, true).expect("dx requested");
    let mut dxkv = backward_linear(p, &idx.k, &c.xkv, &dk, grads, true).expect("dx requested");
    let dxv = backward_linear(p, &idx.v, &c.xkv, &dv, grads, true).expect("dx requested");
    dxkv.add_assign(&dxv);
    (dxq, dxkv)
}

#[derive(Debug, Clone)]
pub(crate) struct BlockCache {
    attn: AttentionCache,
    norm1: NormCache,
    u: Tensor2,
    hidden: Tensor2,
    norm2: NormCache,
}

fn block_forward(p: &[f64], idx: &BlockIdx, xq: &Tensor2, xkv: &Tensor2) -> (Tensor2, BlockCache) {
    let (a, attn) = attention_forward(p, &idx.attn, xq, xkv);
    let mut r1 = xq.clone();
    r1.add_assign(&a);
    let (u, norm1) = apply_norm(p, &idx.norm1, &r1);
    let mut hidden = apply_linear(p, &idx.ffn1, &u);
    relu_in_place(&mut hidden);
    let f = apply_linear(p, &idx.ffn2, &hidden);
    let mut r2 = u.clone();
    r2.add_assign(&f);
    let (y, norm2) = apply_norm(p, &idx.norm2, &r2);
    (
        y,
        BlockCache {
            attn,
            norm1,
            u,
            hidden,
            norm2,
        },
    )
}

fn block_backward(
    p: &[f64],
    idx: &BlockIdx,
    c: &BlockCache,
    dy: &Tensor2,
    grads: &mut [f64],
) -> (Tensor2, Tensor2) {
    let dr2 = backward_norm(p, &idx.norm2, &c.norm2, dy, grads);
    let mut dhidden =
        backward_linear(p, &idx.ffn2, &c.hidden, &dr2, grads, true).expect("dx requested");
    relu_backward(&c.hidden, &mut dhidden);
    let mut du = backward_linear(p, &idx.ffn1, &c.u, &dhidden, grads, true).expect("dx requested");
    du.add_assign(&dr2);
    let dr1 = backward_norm(p, &idx.norm1, &c.norm1, &du, grads);
    let (mut dxq, dxkv) = attention_backward(p, &idx.attn, &c.attn, &dr1, grads);
    dxq.add_assign(&dr1);
    (dxq, dxkv)
}

#[derive(Debug, Clone)]
pub(crate) struct ForwardCache {
    x: Tensor2,
    h0: Tensor2,
    encoders: Vec<BlockCache>,
    pool: BlockCache,
    decoders: Vec<BlockCache>,
    pooled: Tensor2,
}

impl Architecture {
    fn seeds(&self, p: &[f64]) -> Tensor2 {
        let (k, d) = (self.config.n_pool_seeds, self.config.latent_dim);
        Tensor2 {
            rows: k,
            cols: d,
            data: p[self.seeds..self.seeds + k * d].to_vec(),
        }
    }

    pub(crate) fn forward_cached(&self, p: &[f64], x: &Tensor2) -> Result<([f64; 3], ForwardCache)> {
        if x.cols != self.input.fan_in || x.rows == 0 {
            return Err(Error::ShapeMismatch(format!(
                "network input must be M x {} with M >= 1, got {} x {}",
                self.input.fan_in, x.rows, x.cols
            )));
        }
        if p.len() != self.param_count() {
            return Err(Error::ShapeMismatch(format!(
                "{} parameters for an architecture of {}",
                p.len(),
                self.param_count()
            )));
        }
        let mut h = apply_linear(p, &self.input, x);
        relu_in_place(&mut h);
        check(&h, "input")?;
        let h0 = h.clone();

        let mut encoders = Vec::with_capacity(self.encoders.len());
        for (l, idx) in self.encoders.iter().enumerate() {
            let (y, c) = block_forward(p, idx, &h, &h);
            check(&y, &format!("encoder.{l}"))?;
            encoders.push(c);
            h = y;
        }

        let (mut g, pool) = block_forward(p, &self.pool, &self.seeds(p), &h);
        check(&g, "pool")?;

        let mut decoders = Vec::with_capacity(self.decoders.len());
        for (l, idx) in self.decoders.iter().enumerate() {
            let (y, c) = block_forward(p, idx, &g, &g);
            check(&y, &format!("decoder.{l}"))?;
            decoders.push(c);
            g = y;
        }

        let mut pooled = Tensor2::zeros(1, g.cols);
        for r in 0..g.rows {
            for (acc, v) in pooled.data.iter_mut().zip(g.row(r)) {
                *acc += v;
            }
        }
        let inv = 1.0 / g.rows as f64;
        pooled.data.iter_mut().for_each(|v| *v *= inv);
        let out = apply_linear(p, &self.output, &pooled);
        check(&out, "output")?;

        Ok((
            [out.data[0], out.data[1], out.data[2]],
            ForwardCache {
                x: x.clone(),
                h0,
                encoders,
                pool,
                decoders,
                pooled,
            },
        ))
    }

    pub fn forward(&self, p: &[f64], x: &Tensor2) -> Result<[f64; 3]> {
        self.forward_cached(p, x).map(|(o, _)| o)
    }

    /// Accumulates into `grads` the gradient of `dout . output` for the cached pass.
    pub(crate) fn backward(&self, p: &[f64], cache: &ForwardCache, dout: [f64; 3], grads: &mut [f64]) {
        let dout = Tensor2 {
            rows: 1,
            cols: OUTPUT_DIM,
            data: dout.to_vec(),
        };
        let dpooled =
            backward_linear(p, &self.output, &cache.pooled, &dout, grads, true).expect("dx requested");
        let k = self.config.n_pool_seeds;
        let mut dg = Tensor2::zeros(k, dpooled.cols);
        for r in 0..k {
            for (o, v) in dg.row_mut(r).iter_mut().zip(&dpooled.data) {
                *o = v / k as f64;
            }
        }
        for (idx, c) in self.decoders.iter().zip(&cache.decoders).rev() {
            let (mut dq, dkv) = block_backward(p, idx, c, &dg, grads);
            dq.add_assign(&dkv);
            dg = dq;
        }
        let (dseeds, mut dh) = block_backward(p, &self.pool, &cache.pool, &dg, grads);
        for (acc, v) in grads[self.seeds..self.seeds + dseeds.data.len()]
            .iter_mut()
            .zip(&dseeds.data)
        {
            *acc += v;
        }
        for (idx, c) in self.encoders.iter().zip(&cache.encoders).rev() {
            let (mut dq, dkv) = block_backward(p, idx, c, &dh, grads);
            dq.add_assign(&dkv);
            dh = dq;
        }
        relu_backward(&cache.h0, &mut dh);
        backward_linear(p, &self.input, &cache.x, &dh, grads, false);
    }
}

/// Borrowed projection weights for a stand-alone attention evaluation.
/// Weights are `dim x dim`, stored input-major.
#[derive(Debug, Clone, Copy)]
pub struct AttentionWeights<'a> {
    pub wq: &'a [f64],
    pub bq: &'a [f64],
    pub wk: &'a [f64],
    pub bk: &'a [f64],
    pub wv: &'a [f64],
    pub bv: &'a [f64],
    pub wo: &'a [f64],
    pub bo: &'a [f64],
    pub dim: usize,
    pub heads: usize,
}

/// Multi-head scaled dot-product attention of `queries` (n_q x D) over
/// `keys_values` (M x D), followed by the output projection.
pub fn multihead_attention(
    weights: &AttentionWeights<'_>,
    queries: &Tensor2,
    keys_values: &Tensor2,
) -> Result<Tensor2> {
    let d = weights.dim;
    if weights.heads == 0 || d % weights.heads != 0 {
        return Err(Error::ShapeMismatch(format!(
            "dimension {d} not divisible by {} heads",
            weights.heads
        )));
    }
    if queries.cols != d || keys_values.cols != d || keys_values.rows == 0 {
        return Err(Error::ShapeMismatch(format!(
            "attention inputs must have {d} columns and at least one key"
        )));
    }
    let mats = [weights.wq, weights.wk, weights.wv, weights.wo];
    let biases = [weights.bq, weights.bk, weights.bv, weights.bo];
    if mats.iter().any(|m| m.len() != d * d) || biases.iter().any(|b| b.len() != d) {
        return Err(Error::ShapeMismatch("attention weight sizes".into()));
    }
    // lay the borrowed weights out as a contiguous parameter block
    let mut p = Vec::with_capacity(4 * (d * d + d));
    let lin = |m: &[f64], bias: &[f64], p: &mut Vec<f64>| {
        let w = p.len();
        p.extend_from_slice(m);
        let b = p.len();
        p.extend_from_slice(bias);
        LinearIdx {
            w,
            b,
            fan_in: d,
            fan_out: d,
        }
    };
    let idx = AttentionIdx {
        q: lin(weights.wq, weights.bq, &mut p),
        k: lin(weights.wk, weights.bk, &mut p),
        v: lin(weights.wv, weights.bv, &mut p),
        o: lin(weights.wo, weights.bo, &mut p),
        heads: weights.heads,
    };
    let (out, _) = attention_forward(&p, &idx, queries, keys_values);
    Ok(out)
}
