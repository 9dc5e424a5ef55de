//! Row-major `f64` matrices and the dense kernels the network is built from.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor2 {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tensor2 {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {rows}x{cols} tensor",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows<const N: usize>(rows: &[[f64; N]]) -> Self {
        Self {
            rows: rows.len(),
            cols: N,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn add_assign(&mut self, other: &Tensor2) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

/// `c = alpha * a * b + beta * c` over strided views. Strides are in elements.
#[allow(clippy::too_many_arguments)]
#[inline]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
    (rsc, csc): (usize, usize),
) {
    if m == 0 || n == 0 {
        return;
    }
    let last = |r: usize, c: usize, rs: usize, cs: usize| (r - 1) * rs + (c - 1) * cs;
    if k > 0 {
        assert!(last(m, k, rsa, csa) < a.len(), "gemm: lhs out of bounds");
        assert!(last(k, n, rsb, csb) < b.len(), "gemm: rhs out of bounds");
    }
    assert!(last(m, n, rsc, csc) < c.len(), "gemm: output out of bounds");
    // SAFETY: every element addressed by the strides lies inside the slices (asserted above),
    // and `c` is exclusively borrowed so it cannot alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        );
    }
}

/// `y = x w + b` with `w` stored `in x out`.
pub(crate) fn linear(x: &Tensor2, w: &[f64], b: &[f64], out: usize) -> Tensor2 {
    let mut y = Tensor2::zeros(x.rows, out);
    for r in 0..x.rows {
        y.row_mut(r).copy_from_slice(b);
    }
    gemm(x.rows, x.cols, out, 1.0, &x.data, (x.cols, 1), w, (out, 1), 1.0, &mut y.data, (out, 1));
    y
}

/// Accumulates `dw += x^T dy`, `db += colsum(dy)` and returns `dx = dy w^T`.
pub(crate) fn linear_backward(
    x: &Tensor2,
    w: &[f64],
    dy: &Tensor2,
    dw: &mut [f64],
    db: &mut [f64],
    need_dx: bool,
) -> Option<Tensor2> {
    let (inp, out) = (x.cols, dy.cols);
    gemm(inp, x.rows, out, 1.0, &x.data, (1, inp), &dy.data, (out, 1), 1.0, dw, (out, 1));
    for r in 0..dy.rows {
        for (acc, g) in db.iter_mut().zip(dy.row(r)) {
            *acc += g;
        }
    }
    need_dx.then(|| {
        let mut dx = Tensor2::zeros(dy.rows, inp);
        gemm(dy.rows, out, inp, 1.0, &dy.data, (out, 1), w, (1, out), 0.0, &mut dx.data, (inp, 1));
        dx
    })
}

pub(crate) fn relu_in_place(x: &mut Tensor2) {
    for v in &mut x.data {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Zeroes `grad` wherever the ReLU output was not positive.
pub(crate) fn relu_backward(activated: &Tensor2, grad: &mut Tensor2) {
    for (g, a) in grad.data.iter_mut().zip(&activated.data) {
        if *a <= 0.0 {
            *g = 0.0;
        }
    }
}

pub const LAYER_NORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone)]
pub(crate) struct NormCache {
    pub xhat: Tensor2,
    pub rstd: Vec<f64>,
}

pub(crate) fn layer_norm(x: &Tensor2, gain: &[f64], bias: &[f64]) -> (Tensor2, NormCache) {
    let d = x.cols;
    let mut xhat = Tensor2::zeros(x.rows, d);
    let mut y = Tensor2::zeros(x.rows, d);
    let mut rstd = Vec::with_capacity(x.rows);
    for r in 0..x.rows {
        let row = x.row(r);
        let mean = row.iter().sum::<f64>() / d as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let s = 1.0 / (var + LAYER_NORM_EPS).sqrt();
        rstd.push(s);
        let xh = xhat.row_mut(r);
        for (o, v) in xh.iter_mut().zip(row) {
            *o = (v - mean) * s;
        }
        let yr = y.row_mut(r);
        for j in 0..d {
            yr[j] = gain[j] * xhat.data[r * d + j] + bias[j];
        }
    }
    (y, NormCache { xhat, rstd })
}

pub(crate) fn layer_norm_backward(
    cache: &NormCache,
    gain: &[f64],
    dy: &Tensor2,
    dgain: &mut [f64],
    dbias: &mut [f64],
) -> Tensor2 {
    let d = dy.cols;
    let mut dx = Tensor2::zeros(dy.rows, d);
    let mut dxhat = vec![0.0; d];
    for r in 0..dy.rows {
        let g = dy.row(r);
        let xh = cache.xhat.row(r);
        for j in 0..d {
            dgain[j] += g[j] * xh[j];
            dbias[j] += g[j];
            dxhat[j] = g[j] * gain[j];
        }
        let mean_dxhat = dxhat.iter().sum::<f64>() / d as f64;
        let mean_dxhat_xhat = dxhat.iter().zip(xh).map(|(a, b)| a * b).sum::<f64>() / d as f64;
        let s = cache.rstd[r];
        for (j, o) in dx.row_mut(r).iter_mut().enumerate() {
            *o = s * (dxhat[j] - mean_dxhat - xh[j] * mean_dxhat_xhat);
        }
    }
    dx
}

/// Numerically stable softmax over each row, in place.
pub(crate) fn softmax_rows(x: &mut Tensor2) {
    for r in 0..x.rows {
        let row = x.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
}
