//! Layer primitives, losses, regularization, Adam and a finite-difference oracle.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use rand::Rng;

use crate::matrix::Matrix;
use crate::{Error, Result};

/// Whether a parameter is a weight (L2-penalized) or a bias (never penalized).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    /// Kernel-like weights; included in the L2 penalty.
    Weight,
    /// Bias vectors; excluded from the L2 penalty.
    Bias,
}

/// A trainable tensor and its accumulated gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    /// Current value.
    pub value: Matrix,
    /// Gradient accumulator, same shape as `value`.
    pub grad: Matrix,
    /// Regularization class.
    pub kind: ParamKind,
}

impl Param {
    /// Wraps a value with a zero gradient.
    pub fn new(value: Matrix, kind: ParamKind) -> Self {
        let grad = Matrix::zeros(value.rows(), value.cols());
        Param { value, grad, kind }
    }

    /// Zero-initialized weight.
    pub fn weight(rows: usize, cols: usize) -> Self {
        Self::new(Matrix::zeros(rows, cols), ParamKind::Weight)
    }

    /// Zero-initialized bias row of length `n`.
    pub fn bias(n: usize) -> Self {
        Self::new(Matrix::zeros(1, n), ParamKind::Bias)
    }

    /// Clears the gradient.
    pub fn zero_grad(&mut self) {
        self.grad.fill_zero();
    }

    /// `(rows, cols)` of the value.
    pub fn shape(&self) -> (usize, usize) {
        self.value.shape()
    }
}

/// `X W + b`, with `b` broadcast over rows.
pub fn dense_forward(x: &Matrix, w: &Param, b: &Param) -> Result<Matrix> {
    if b.value.rows() != 1 || b.value.cols() != w.value.cols() {
        return Err(Error::Dimension { op: "dense_forward(bias)", left: w.shape(), right: b.shape() });
    }
    let mut out = x.matmul(&w.value)?;
    let bias = b.value.as_slice();
    for i in 0..out.rows() {
        for (o, bj) in out.row_mut(i).iter_mut().zip(bias) {
            *o += bj;
        }
    }
    Ok(out)
}

/// Backward of [`dense_forward`]: accumulates into `w.grad`, `b.grad`; returns `dL/dX`.
pub fn dense_backward(x: &Matrix, w: &mut Param, b: &mut Param, d_out: &Matrix) -> Result<Matrix> {
    let dw = x.t_matmul(d_out)?;
    w.grad.add_scaled(&dw, 1.0)?;
    b.grad.add_scaled(&d_out.column_sums(), 1.0)?;
    d_out.matmul_t(&w.value)
}

/// Elementwise `max(0, x)`.
pub fn relu(x: &Matrix) -> Matrix {
    x.map(|v| if v > 0.0 { v } else { 0.0 })
}

/// ReLU derivative; the subgradient at 0 is 0.
#[inline]
pub fn relu_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Elementwise logistic function.
pub fn sigmoid(x: &Matrix) -> Matrix {
    x.map(sigmoid_scalar)
}

/// Row-wise softmax restricted to entries where `mask` is nonzero.
///
/// Masked entries come out exactly 0. Uses max subtraction over the admissible entries.
pub fn softmax_rows(x: &Matrix, mask: &Matrix) -> Result<Matrix> {
    if x.shape() != mask.shape() {
        return Err(Error::Dimension { op: "softmax_rows", left: x.shape(), right: mask.shape() });
    }
    let mut out = Matrix::zeros(x.rows(), x.cols());
    for i in 0..x.rows() {
        softmax_masked(x.row(i), mask.row(i), out.row_mut(i)).map_err(|_| Error::DegenerateNeighborhood { row: i })?;
    }
    Ok(out)
}

/// Single-row masked softmax; errors when no entry is admissible.
pub(crate) fn softmax_masked(x: &[f64], mask: &[f64], out: &mut [f64]) -> core::result::Result<(), ()> {
    let max = x
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m != 0.0)
        .map(|(&v, _)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(());
    }
    let mut total = 0.0;
    for ((o, &v), &m) in out.iter_mut().zip(x).zip(mask) {
        *o = if m != 0.0 { (v - max).exp() } else { 0.0 };
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
    Ok(())
}

/// Mean squared error and its gradient with respect to `pred`.
pub fn mse_loss(pred: &Matrix, target: &Matrix) -> Result<(f64, Matrix)> {
    if pred.shape() != target.shape() {
        return Err(Error::Dimension { op: "mse_loss", left: pred.shape(), right: target.shape() });
    }
    let n = pred.len() as f64;
    let mut grad = Matrix::zeros(pred.rows(), pred.cols());
    let mut loss = 0.0;
    for ((g, &p), &t) in grad.as_mut_slice().iter_mut().zip(pred.as_slice()).zip(target.as_slice()) {
        let d = p - t;
        loss += d * d;
        *g = 2.0 * d / n;
    }
    Ok((loss / n, grad))
}

/// Adds `lambda * ||W||^2` over weight parameters; accumulates `2 lambda W` into their grads.
pub fn l2_penalty<'a>(params: impl IntoIterator<Item = &'a mut Param>, lambda: f64) -> Result<f64> {
    if !(lambda >= 0.0) {
        return Err(Error::invalid("lambda", "must be non-negative"));
    }
    if lambda == 0.0 {
        return Ok(0.0);
    }
    let mut penalty = 0.0;
    for p in params {
        if p.kind != ParamKind::Weight {
            continue;
        }
        penalty += lambda * p.value.sum_squares();
        let value = p.value.clone();
        p.grad.add_scaled(&value, 2.0 * lambda)?;
    }
    Ok(penalty)
}

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    /// Step size.
    pub lr: f64,
    /// First-moment decay.
    pub beta1: f64,
    /// Second-moment decay.
    pub beta2: f64,
    /// Denominator floor.
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Per-parameter Adam moments.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    /// First moment.
    pub m: Matrix,
    /// Second (raw) moment; never negative.
    pub v: Matrix,
    /// Number of steps taken.
    pub t: u64,
}

impl AdamState {
    /// Fresh state for a parameter of the given shape.
    pub fn for_param(p: &Param) -> Self {
        let (r, c) = p.shape();
        AdamState { m: Matrix::zeros(r, c), v: Matrix::zeros(r, c), t: 0 }
    }
}

/// One bias-corrected Adam update; consumes and zeroes `param.grad`.
pub fn adam_step(cfg: &AdamConfig, state: &mut AdamState, param: &mut Param) -> Result<()> {
    if state.m.shape() != param.shape() || state.v.shape() != param.shape() {
        return Err(Error::Dimension { op: "adam_step", left: state.m.shape(), right: param.shape() });
    }
    state.t += 1;
    let t = state.t as f64;
    let c1 = 1.0 - cfg.beta1.powf(t);
    let c2 = 1.0 - cfg.beta2.powf(t);
    let values = param.value.as_mut_slice();
    let grads = param.grad.as_mut_slice();
    let ms = state.m.as_mut_slice();
    let vs = state.v.as_mut_slice();
    for i in 0..values.len() {
        let g = grads[i];
        ms[i] = cfg.beta1 * ms[i] + (1.0 - cfg.beta1) * g;
        vs[i] = cfg.beta2 * vs[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = ms[i] / c1;
        let v_hat = vs[i] / c2;
        values[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        grads[i] = 0.0;
    }
    Ok(())
}

/// Keep-mask of an inverted-dropout application.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask {
    /// 1.0 where the entry was kept, 0.0 where dropped.
    pub keep: Matrix,
    /// Drop probability.
    pub rate: f64,
}

impl DropoutMask {
    /// Scale applied to kept entries.
    pub fn scale(&self) -> f64 {
        1.0 / (1.0 - self.rate)
    }

    /// Applies the mask (with inverted scaling) to `x`, e.g. to route gradients.
    pub fn apply(&self, x: &Matrix) -> Matrix {
        let s = self.scale();
        let data = x.as_slice().iter().zip(self.keep.as_slice()).map(|(v, k)| v * k * s).collect();
        Matrix::from_vec(x.rows(), x.cols(), data).expect("mask shape")
    }
}

/// Inverted dropout. In evaluation mode, or with `rate == 0`, returns `x` and an all-ones mask.
pub fn dropout_apply<R: Rng + ?Sized>(x: &Matrix, rate: f64, training: bool, rng: &mut R) -> Result<(Matrix, DropoutMask)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::invalid("rate", "dropout rate must lie in [0, 1)"));
    }
    if !training || rate == 0.0 {
        let keep = Matrix::filled(x.rows(), x.cols(), 1.0);
        return Ok((x.clone(), DropoutMask { keep, rate: 0.0 }));
    }
    let keep_data: Vec<f64> = (0..x.len()).map(|_| if rng.random::<f64>() >= rate { 1.0 } else { 0.0 }).collect();
    let mask = DropoutMask { keep: Matrix::from_vec(x.rows(), x.cols(), keep_data)?, rate };
    Ok((mask.apply(x), mask))
}

/// Central-difference gradient of a scalar function.
pub fn finite_diff_grad(mut f: impl FnMut(&Matrix) -> f64, x: &Matrix, eps: f64) -> Matrix {
    let mut probe = x.clone();
    let mut grad = Matrix::zeros(x.rows(), x.cols());
    for k in 0..x.len() {
        let orig = probe.as_slice()[k];
        probe.as_mut_slice()[k] = orig + eps;
        let up = f(&probe);
        probe.as_mut_slice()[k] = orig - eps;
        let down = f(&probe);
        probe.as_mut_slice()[k] = orig;
        grad.as_mut_slice()[k] = (up - down) / (2.0 * eps);
    }
    grad
}
