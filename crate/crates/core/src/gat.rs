//! Graph attention estimator: two attention layers, global attention pooling and a
//! linear dense head, with a hand-written reverse pass.
//!
//! Attention layer, for node `i` and neighbor `j ∈ N(i)` (self-loop always included):
//!
//! ```text
//! u_ij  = [H_j ‖ E_ij] W          (E_ij is empty when edge attributes are ignored)
//! s_i   = u_ii
//! α_ij  = softmax_j ReLU(aᵀ [s_i ‖ u_ij])
//! out_i = ReLU(Σ_j α_ij u_ij + b)
//! ```
//!
//! Pooling collapses nodes with `Σ_i σ(H W1 + b1)_i ⊙ (H W2 + b2)_i`.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use rand::Rng;

use crate::matrix::{axpy, dot, Matrix};
use crate::nn::{self, DropoutMask, Param, ParamKind};
use crate::{Error, Result};

/// How edge attributes enter the attention layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeMode {
    /// Edge attributes are not used; plain node-feature attention.
    Ignored,
    /// The attribute vector of edge `(i, j)` is appended to node `j`'s features
    /// before the linear transform.
    Concat,
}

impl EdgeMode {
    /// Stable one-byte code used by the weight file.
    pub fn code(self) -> u8 {
        match self {
            EdgeMode::Ignored => 0,
            EdgeMode::Concat => 1,
        }
    }

    /// Inverse of [`EdgeMode::code`].
    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(EdgeMode::Ignored),
            1 => Some(EdgeMode::Concat),
            _ => None,
        }
    }
}

/// Per-edge attribute vectors of a `P`-node graph, stored as `P × P × S`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeFeatures {
    nodes: usize,
    width: usize,
    data: Vec<f64>,
}

impl EdgeFeatures {
    /// All-zero attributes.
    pub fn zeros(nodes: usize, width: usize) -> Self {
        EdgeFeatures { nodes, width, data: vec![0.0; nodes * nodes * width] }
    }

    /// Wraps a `P × P × S` row-major buffer.
    pub fn from_vec(nodes: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != nodes * nodes * width {
            return Err(Error::Length { op: "EdgeFeatures::from_vec", left: data.len(), right: nodes * nodes * width });
        }
        Ok(EdgeFeatures { nodes, width, data })
    }

    /// Number of nodes `P`.
    pub fn nodes(&self) -> usize {
        self.nodes
    }

    /// Attribute length `S`.
    pub fn width(&self) -> usize {
        self.width
    }

    /// Attributes of edge `(i, j)`.
    pub fn get(&self, i: usize, j: usize) -> &[f64] {
        let at = (i * self.nodes + j) * self.width;
        &self.data[at..at + self.width]
    }

    /// Mutable attributes of edge `(i, j)`.
    pub fn get_mut(&mut self, i: usize, j: usize) -> &mut [f64] {
        let at = (i * self.nodes + j) * self.width;
        &mut self.data[at..at + self.width]
    }

    /// Flat storage.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Borrowed view of one input graph.
#[derive(Debug, Clone, Copy)]
pub struct Graph<'a> {
    /// Node features, `P × F`.
    pub nodes: &'a Matrix,
    /// Binary adjacency, `P × P`. Self-loops are added internally.
    pub adjacency: &'a Matrix,
    /// Edge attributes, `P × P × S`.
    pub edges: &'a EdgeFeatures,
}

/// Attention neighborhood: adjacency plus self-loops.
pub fn with_self_loops(adjacency: &Matrix) -> Matrix {
    let mut m = adjacency.map(|v| if v != 0.0 { 1.0 } else { 0.0 });
    for i in 0..m.rows().min(m.cols()) {
        m[(i, i)] = 1.0;
    }
    m
}

/// Parameters of one graph attention layer.
#[derive(Debug, Clone, PartialEq)]
pub struct GalParams {
    /// Linear transform, `(F + S) × F'`.
    pub w: Param,
    /// Attention kernel, `2F' × 1`.
    pub a: Param,
    /// Bias, `1 × F'`.
    pub b: Param,
}

/// Intermediates of one attention layer forward pass.
#[derive(Debug, Clone)]
struct GalCache {
    nbr: Matrix,
    /// Concatenated inputs per pair, `P·P × (F + S)`.
    x: Matrix,
    /// Messages per pair, `P·P × F'`.
    u: Matrix,
    /// Raw scores (before ReLU) per pair.
    e: Matrix,
    alpha: Matrix,
    z: Matrix,
    input_width: usize,
}

impl GalParams {
    /// Zero-initialized layer.
    pub fn zeros(in_features: usize, edge_width: usize, out_features: usize) -> Self {
        GalParams {
            w: Param::weight(in_features + edge_width, out_features),
            a: Param::weight(2 * out_features, 1),
            b: Param::bias(out_features),
        }
    }

    /// Output width `F'`.
    pub fn out_features(&self) -> usize {
        self.w.value.cols()
    }

    fn forward_cached(&self, h: &Matrix, nbr: &Matrix, edges: Option<&EdgeFeatures>) -> Result<GalCache> {
        let p = h.rows();
        let f = h.cols();
        let s = edges.map_or(0, |e| e.width());
        let fo = self.out_features();
        if f + s != self.w.value.rows() {
            return Err(Error::Dimension { op: "gal_forward", left: (p, f + s), right: self.w.shape() });
        }
        if nbr.shape() != (p, p) {
            return Err(Error::Dimension { op: "gal_forward(adjacency)", left: h.shape(), right: nbr.shape() });
        }
        if let Some(e) = edges {
            if e.nodes() != p {
                return Err(Error::Length { op: "gal_forward(edges)", left: e.nodes(), right: p });
            }
        }
        if self.a.shape() != (2 * fo, 1) {
            return Err(Error::Dimension { op: "gal_forward(kernel)", left: (2 * fo, 1), right: self.a.shape() });
        }
        let mut x = Matrix::zeros(p * p, f + s);
        for i in 0..p {
            for j in 0..p {
                if nbr[(i, j)] == 0.0 {
                    continue;
                }
                let row = x.row_mut(i * p + j);
                row[..f].copy_from_slice(h.row(j));
                if let Some(e) = edges {
                    row[f..].copy_from_slice(e.get(i, j));
                }
            }
        }
        let u = x.matmul(&self.w.value)?;
        let (a_self, a_nbr) = self.a.value.as_slice().split_at(fo);
        let mut e = Matrix::zeros(p, p);
        let mut alpha = Matrix::zeros(p, p);
        for i in 0..p {
            let s_i = u.row(i * p + i);
            let self_term = dot(a_self, s_i);
            for j in 0..p {
                if nbr[(i, j)] != 0.0 {
                    e[(i, j)] = self_term + dot(a_nbr, u.row(i * p + j));
                }
            }
            let scores: Vec<f64> = e.row(i).iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect();
            nn::softmax_masked(&scores, nbr.row(i), alpha.row_mut(i)).map_err(|_| Error::DegenerateNeighborhood { row: i })?;
        }
        let mut z = Matrix::zeros(p, fo);
        for i in 0..p {
            let zi = z.row_mut(i);
            zi.copy_from_slice(self.b.value.as_slice());
            for j in 0..p {
                let w = alpha[(i, j)];
                if w != 0.0 {
                    axpy(w, u.row(i * p + j), zi);
                }
            }
        }
        Ok(GalCache { nbr: nbr.clone(), x, u, e, alpha, z, input_width: f })
    }

    /// Accumulates parameter gradients and returns `dL/dH`.
    fn backward(&mut self, cache: &GalCache, d_out: &Matrix) -> Result<Matrix> {
        let p = cache.alpha.rows();
        let fo = self.out_features();
        let dz = Matrix::from_vec(
            p,
            fo,
            d_out.as_slice().iter().zip(cache.z.as_slice()).map(|(&g, &z)| g * nn::relu_grad(z)).collect(),
        )?;
        self.b.grad.add_scaled(&dz.column_sums(), 1.0)?;

        let mut du = Matrix::zeros(p * p, fo);
        let (a_self, a_nbr) = self.a.value.as_slice().split_at(fo);
        let mut da = vec![0.0; 2 * fo];
        for i in 0..p {
            let dz_i = dz.row(i);
            let mut d_alpha = vec![0.0; p];
            for j in 0..p {
                if cache.nbr[(i, j)] == 0.0 {
                    continue;
                }
                d_alpha[j] = dot(dz_i, cache.u.row(i * p + j));
                axpy(cache.alpha[(i, j)], dz_i, du.row_mut(i * p + j));
            }
            let weighted: f64 = (0..p).map(|k| cache.alpha[(i, k)] * d_alpha[k]).sum();
            let mut d_self = 0.0;
            for j in 0..p {
                if cache.nbr[(i, j)] == 0.0 {
                    continue;
                }
                let d_score = cache.alpha[(i, j)] * (d_alpha[j] - weighted);
                let de = d_score * nn::relu_grad(cache.e[(i, j)]);
                if de == 0.0 {
                    continue;
                }
                d_self += de;
                axpy(de, cache.u.row(i * p + j), &mut da[fo..]);
                axpy(de, a_nbr, du.row_mut(i * p + j));
            }
            if d_self != 0.0 {
                axpy(d_self, cache.u.row(i * p + i), &mut da[..fo]);
                axpy(d_self, a_self, du.row_mut(i * p + i));
            }
        }
        axpy(1.0, &da, self.a.grad.as_mut_slice());
        self.w.grad.add_scaled(&cache.x.t_matmul(&du)?, 1.0)?;

        let dx = du.matmul_t(&self.w.value)?;
        let f = cache.input_width;
        let mut dh = Matrix::zeros(p, f);
        for i in 0..p {
            for j in 0..p {
                if cache.nbr[(i, j)] != 0.0 {
                    axpy(1.0, &dx.row(i * p + j)[..f], dh.row_mut(j));
                }
            }
        }
        Ok(dh)
    }
}

/// Attention coefficients for node features already multiplied by `W`.
///
/// `mask` is used exactly as given (no self-loops are added). Masked entries are 0 and
/// every row sums to 1.
pub fn attention_coefficients(xw: &Matrix, a: &Param, mask: &Matrix) -> Result<Matrix> {
    let p = xw.rows();
    let fo = xw.cols();
    if a.shape() != (2 * fo, 1) {
        return Err(Error::Dimension { op: "attention_coefficients", left: (2 * fo, 1), right: a.shape() });
    }
    if mask.shape() != (p, p) {
        return Err(Error::Dimension { op: "attention_coefficients(mask)", left: (p, p), right: mask.shape() });
    }
    let (a_self, a_nbr) = a.value.as_slice().split_at(fo);
    let mut scores = Matrix::zeros(p, p);
    for i in 0..p {
        let self_term = dot(a_self, xw.row(i));
        for j in 0..p {
            if mask[(i, j)] != 0.0 {
                scores[(i, j)] = (self_term + dot(a_nbr, xw.row(j))).max(0.0);
            }
        }
    }
    nn::softmax_rows(&scores, mask)
}

/// One attention layer in edge-ignoring form: `ReLU(α · XW + b)`, self-loops added to `A`.
pub fn gal_forward(x: &Matrix, adjacency: &Matrix, params: &GalParams) -> Result<Matrix> {
    let cache = params.forward_cached(x, &with_self_loops(adjacency), None)?;
    Ok(nn::relu(&cache.z))
}

/// Parameters of the global attention pooling layer.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolParams {
    /// Gate projection.
    pub w1: Param,
    /// Gate bias.
    pub b1: Param,
    /// Value projection.
    pub w2: Param,
    /// Value bias.
    pub b2: Param,
}

#[derive(Debug, Clone)]
struct PoolCache {
    h: Matrix,
    gate: Matrix,
    value: Matrix,
}

impl PoolParams {
    /// Zero-initialized pooling layer.
    pub fn zeros(in_features: usize, out_features: usize) -> Self {
        PoolParams {
            w1: Param::weight(in_features, out_features),
            b1: Param::bias(out_features),
            w2: Param::weight(in_features, out_features),
            b2: Param::bias(out_features),
        }
    }

    fn forward_cached(&self, h: &Matrix) -> Result<(Vec<f64>, PoolCache)> {
        if self.w1.shape() != self.w2.shape() {
            return Err(Error::Dimension { op: "global_attention_pool", left: self.w1.shape(), right: self.w2.shape() });
        }
        let gate = nn::sigmoid(&nn::dense_forward(h, &self.w1, &self.b1)?);
        let value = nn::dense_forward(h, &self.w2, &self.b2)?;
        let mut out = vec![0.0; gate.cols()];
        for i in 0..gate.rows() {
            for ((o, g), v) in out.iter_mut().zip(gate.row(i)).zip(value.row(i)) {
                *o += g * v;
            }
        }
        Ok((out, PoolCache { h: h.clone(), gate, value }))
    }

    fn backward(&mut self, cache: &PoolCache, d_out: &[f64]) -> Result<Matrix> {
        let (p, fo) = cache.gate.shape();
        let mut d_pre_gate = Matrix::zeros(p, fo);
        let mut d_value = Matrix::zeros(p, fo);
        for i in 0..p {
            for k in 0..fo {
                let g = cache.gate[(i, k)];
                d_pre_gate[(i, k)] = d_out[k] * cache.value[(i, k)] * g * (1.0 - g);
                d_value[(i, k)] = d_out[k] * g;
            }
        }
        let mut dh = nn::dense_backward(&cache.h, &mut self.w1, &mut self.b1, &d_pre_gate)?;
        dh.add_scaled(&nn::dense_backward(&cache.h, &mut self.w2, &mut self.b2, &d_value)?, 1.0)?;
        Ok(dh)
    }
}

/// Node-wise gated sum `Σ_i σ(XW1+b1)_i ⊙ (XW2+b2)_i`.
pub fn global_attention_pool(x: &Matrix, params: &PoolParams) -> Result<Vec<f64>> {
    params.forward_cached(x).map(|(out, _)| out)
}

/// Layer widths of a [`GatModel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GatDims {
    /// Number of RIS elements `N`; the head emits `4N` values.
    pub n_ris: usize,
    /// Pilot length `M_p`: node feature width and edge attribute width.
    pub m_p: usize,
    /// First attention layer width.
    pub hidden1: usize,
    /// Second attention layer width.
    pub hidden2: usize,
    /// Pooled representation width.
    pub pooled: usize,
    /// Edge attribute usage.
    pub edge_mode: EdgeMode,
}

impl GatDims {
    /// The reference layout: `M_p → 128 → 32 → pool 128 → 4N`, edge attributes concatenated.
    pub fn reference(n_ris: usize, m_p: usize) -> Self {
        GatDims { n_ris, m_p, hidden1: 128, hidden2: 32, pooled: 128, edge_mode: EdgeMode::Concat }
    }

    /// Head width `4N`.
    pub fn outputs(&self) -> usize {
        4 * self.n_ris
    }

    fn edge_width(&self) -> usize {
        match self.edge_mode {
            EdgeMode::Ignored => 0,
            EdgeMode::Concat => self.m_p,
        }
    }
}

/// Whether dropout is active.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    /// Dropout on the inputs of both attention layers.
    Train {
        /// Drop probability.
        dropout: f64,
    },
    /// Deterministic inference.
    Eval,
}

/// All trainable state of the estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct GatModel {
    /// Layout.
    pub dims: GatDims,
    /// First attention layer.
    pub gal1: GalParams,
    /// Second attention layer.
    pub gal2: GalParams,
    /// Global attention pooling.
    pub pool: PoolParams,
    /// Dense head weight, `pooled × 4N`.
    pub head_w: Param,
    /// Dense head bias, `1 × 4N`.
    pub head_b: Param,
}

/// Intermediates kept by [`GatModel::forward`] for [`GatModel::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    gal1: GalCache,
    drop2: Option<DropoutMask>,
    gal2: GalCache,
    pool: PoolCache,
    pooled: Vec<f64>,
}

impl GatModel {
    /// Model with every parameter zero.
    pub fn zeros(dims: GatDims) -> Self {
        let s = dims.edge_width();
        GatModel {
            dims,
            gal1: GalParams::zeros(dims.m_p, s, dims.hidden1),
            gal2: GalParams::zeros(dims.hidden1, s, dims.hidden2),
            pool: PoolParams::zeros(dims.hidden2, dims.pooled),
            head_w: Param::weight(dims.pooled, dims.outputs()),
            head_b: Param::bias(dims.outputs()),
        }
    }

    /// Glorot-uniform weights (attention kernels included), zero biases.
    pub fn init<R: Rng + ?Sized>(dims: GatDims, rng: &mut R) -> Self {
        let mut model = Self::zeros(dims);
        for p in model.params_mut() {
            if p.kind == ParamKind::Weight {
                let (fan_in, fan_out) = p.shape();
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                for v in p.value.as_mut_slice() {
                    *v = rng.random_range(-limit..limit);
                }
            }
        }
        model
    }

    /// Parameters in persistence order: gal1 W, a, b; gal2 W, a, b; pool W1, b1, W2, b2; head W, b.
    pub fn params(&self) -> [&Param; 12] {
        [
            &self.gal1.w,
            &self.gal1.a,
            &self.gal1.b,
            &self.gal2.w,
            &self.gal2.a,
            &self.gal2.b,
            &self.pool.w1,
            &self.pool.b1,
            &self.pool.w2,
            &self.pool.b2,
            &self.head_w,
            &self.head_b,
        ]
    }

    /// Mutable parameters, same order as [`GatModel::params`].
    pub fn params_mut(&mut self) -> [&mut Param; 12] {
        [
            &mut self.gal1.w,
            &mut self.gal1.a,
            &mut self.gal1.b,
            &mut self.gal2.w,
            &mut self.gal2.a,
            &mut self.gal2.b,
            &mut self.pool.w1,
            &mut self.pool.b1,
            &mut self.pool.w2,
            &mut self.pool.b2,
            &mut self.head_w,
            &mut self.head_b,
        ]
    }

    /// Total number of scalars.
    pub fn parameter_count(&self) -> usize {
        self.params().iter().map(|p| p.value.len()).sum()
    }

    /// Clears every gradient.
    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    /// Checks that the parameter shapes chain as declared by `dims`.
    pub fn validate(&self) -> Result<()> {
        let reference = GatModel::zeros(self.dims);
        for (have, want) in self.params().iter().zip(reference.params()) {
            if have.shape() != want.shape() || have.kind != want.kind {
                return Err(Error::Dimension { op: "GatModel::validate", left: have.shape(), right: want.shape() });
            }
        }
        Ok(())
    }

    /// Forward pass returning the `4N` head output and the intermediates.
    pub fn forward<R: Rng + ?Sized>(&self, graph: Graph<'_>, mode: Mode, rng: &mut R) -> Result<(Vec<f64>, ForwardCache)> {
        if graph.nodes.cols() != self.dims.m_p {
            return Err(Error::Dimension {
                op: "model_forward",
                left: graph.nodes.shape(),
                right: (graph.nodes.rows(), self.dims.m_p),
            });
        }
        let nbr = with_self_loops(graph.adjacency);
        let edges = match self.dims.edge_mode {
            EdgeMode::Ignored => None,
            EdgeMode::Concat => {
                if graph.edges.width() != self.dims.m_p {
                    return Err(Error::Length { op: "model_forward(edges)", left: graph.edges.width(), right: self.dims.m_p });
                }
                Some(graph.edges)
            }
        };
        let (h0, _) = maybe_dropout(graph.nodes, mode, rng)?;
        let gal1 = self.gal1.forward_cached(&h0, &nbr, edges)?;
        let h1 = nn::relu(&gal1.z);
        let (h1, drop2) = maybe_dropout(&h1, mode, rng)?;
        let gal2 = self.gal2.forward_cached(&h1, &nbr, edges)?;
        let h2 = nn::relu(&gal2.z);
        let (pooled, pool) = self.pool.forward_cached(&h2)?;
        let out = nn::dense_forward(&Matrix::row_vector(&pooled), &self.head_w, &self.head_b)?.into_vec();
        Ok((out, ForwardCache { gal1, drop2, gal2, pool, pooled }))
    }

    /// Deterministic inference.
    pub fn predict(&self, graph: Graph<'_>) -> Result<Vec<f64>> {
        let mut unused = crate::rng::stream(0);
        self.forward(graph, Mode::Eval, &mut unused).map(|(out, _)| out)
    }

    /// Back-propagates `d_out = dL/d(output)` and accumulates into every parameter gradient.
    pub fn backward(&mut self, cache: &ForwardCache, d_out: &[f64]) -> Result<()> {
        if d_out.len() != self.dims.outputs() {
            return Err(Error::Length { op: "model_backward", left: d_out.len(), right: self.dims.outputs() });
        }
        let d_head = Matrix::row_vector(d_out);
        let d_pooled =
            nn::dense_backward(&Matrix::row_vector(&cache.pooled), &mut self.head_w, &mut self.head_b, &d_head)?;
        let d_h2 = self.pool.backward(&cache.pool, d_pooled.as_slice())?;
        let d_h1 = self.gal2.backward(&cache.gal2, &d_h2)?;
        let d_h1 = match &cache.drop2 {
            Some(mask) => mask.apply(&d_h1),
            None => d_h1,
        };
        self.gal1.backward(&cache.gal1, &d_h1)?;
        Ok(())
    }

    /// Per-sample MSE loss against `target`, back-propagated with weight `scale`.
    ///
    /// Returns the unscaled loss.
    pub fn accumulate<R: Rng + ?Sized>(
        &mut self,
        graph: Graph<'_>,
        target: &[f64],
        mode: Mode,
        scale: f64,
        rng: &mut R,
    ) -> Result<f64> {
        if target.len() != self.dims.outputs() {
            return Err(Error::Length { op: "model_backward(target)", left: target.len(), right: self.dims.outputs() });
        }
        let (out, cache) = self.forward(graph, mode, rng)?;
        let (loss, grad) = nn::mse_loss(&Matrix::row_vector(&out), &Matrix::row_vector(target))?;
        let d_out: Vec<f64> = grad.as_slice().iter().map(|g| g * scale).collect();
        self.backward(&cache, &d_out)?;
        Ok(loss)
    }

    /// Adds the L2 term over weight matrices; returns the penalty.
    pub fn accumulate_l2(&mut self, lambda: f64) -> Result<f64> {
        nn::l2_penalty(self.params_mut(), lambda)
    }
}

fn maybe_dropout<R: Rng + ?Sized>(x: &Matrix, mode: Mode, rng: &mut R) -> Result<(Matrix, Option<DropoutMask>)> {
    match mode {
        Mode::Train { dropout } if dropout > 0.0 => {
            let (y, mask) = nn::dropout_apply(x, dropout, true, rng)?;
            Ok((y, Some(mask)))
        }
        Mode::Train { dropout } if dropout < 0.0 => Err(Error::invalid("dropout", "must lie in [0, 1)")),
        _ => Ok((x.clone(), None)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    fn random_matrix(rows: usize, cols: usize, rng: &mut rng::Stream) -> Matrix {
        Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    fn toy_graph(m_p: usize, rng: &mut rng::Stream) -> (Matrix, Matrix, EdgeFeatures) {
        let x = random_matrix(2, m_p, rng);
        let mut e = EdgeFeatures::zeros(2, m_p);
        for k in 0..m_p {
            let s = if rng.random::<bool>() { 1.0 } else { -1.0 };
            e.get_mut(0, 1)[k] = s;
            e.get_mut(1, 0)[k] = s;
        }
        (x, m(&[&[0.0, 1.0], &[1.0, 0.0]]), e)
    }

    fn toy_dims(edge_mode: EdgeMode) -> GatDims {
        GatDims { n_ris: 2, m_p: 4, hidden1: 5, hidden2: 3, pooled: 4, edge_mode }
    }

    #[test]
    fn attention_examples() {
        let full = Matrix::filled(2, 2, 1.0);
        let xw = m(&[&[1.0], &[2.0]]);
        let alpha = attention_coefficients(&xw, &Param::weight(2, 1), &full).unwrap();
        assert_eq!(alpha, Matrix::filled(2, 2, 0.5));

        let a = Param::new(m(&[&[1.0], &[1.0]]), ParamKind::Weight);
        let alpha = attention_coefficients(&xw, &a, &full).unwrap();
        assert_abs_diff_eq!(alpha[(0, 0)], 0.2689, epsilon = 1e-4);
        assert_abs_diff_eq!(alpha[(0, 1)], 0.7311, epsilon = 1e-4);

        let alpha = attention_coefficients(&xw, &a, &Matrix::identity(2)).unwrap();
        assert_eq!(alpha, Matrix::identity(2));
    }

    #[test]
    fn attention_rejects_isolated_node() {
        let mask = m(&[&[1.0, 0.0], &[0.0, 0.0]]);
        let err = attention_coefficients(&Matrix::zeros(2, 1), &Param::weight(2, 1), &mask).unwrap_err();
        assert_eq!(err, Error::DegenerateNeighborhood { row: 1 });
    }

    #[test]
    fn gal_forward_examples() {
        let adj = m(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let mut params = GalParams::zeros(2, 0, 2);
        params.w.value = Matrix::identity(2);
        let x = m(&[&[1.0, -4.0], &[3.0, 2.0]]);
        let out = gal_forward(&x, &adj, &params).unwrap();
        assert_eq!(out, m(&[&[2.0, 0.0], &[2.0, 0.0]]));

        let mut params = GalParams::zeros(3, 0, 2);
        params.b.value = m(&[&[0.7, -0.2]]);
        let out = gal_forward(&Matrix::zeros(2, 3), &adj, &params).unwrap();
        assert_eq!(out, m(&[&[0.7, 0.0], &[0.7, 0.0]]));

        assert!(gal_forward(&Matrix::zeros(2, 4), &adj, &params).is_err());
    }

    /// Step-by-step evaluation of one attention layer with explicit loops.
    fn gal_reference(x: &Matrix, adj: &Matrix, w: &Matrix, a: &[f64], b: &[f64]) -> Matrix {
        let (p, f) = x.shape();
        let fo = w.cols();
        let mut xw = Matrix::zeros(p, fo);
        for i in 0..p {
            for o in 0..fo {
                xw[(i, o)] = (0..f).map(|k| x[(i, k)] * w[(k, o)]).sum();
            }
        }
        let mut out = Matrix::zeros(p, fo);
        for i in 0..p {
            let nbrs: Vec<usize> = (0..p).filter(|&j| j == i || adj[(i, j)] != 0.0).collect();
            let scores: Vec<f64> = nbrs
                .iter()
                .map(|&j| {
                    let e: f64 = (0..fo).map(|o| a[o] * xw[(i, o)] + a[fo + o] * xw[(j, o)]).sum();
                    e.max(0.0).exp()
                })
                .collect();
            let total: f64 = scores.iter().sum();
            for o in 0..fo {
                let z: f64 = nbrs.iter().zip(&scores).map(|(&j, s)| s / total * xw[(j, o)]).sum::<f64>() + b[o];
                out[(i, o)] = z.max(0.0);
            }
        }
        out
    }

    #[test]
    fn gal_forward_matches_reference() {
        let mut stream = rng::stream(11);
        let adj = m(&[&[0.0, 1.0], &[1.0, 0.0]]);
        for _ in 0..20 {
            let x = random_matrix(2, 3, &mut stream);
            let params = GalParams {
                w: Param::new(random_matrix(3, 2, &mut stream), ParamKind::Weight),
                a: Param::new(random_matrix(4, 1, &mut stream), ParamKind::Weight),
                b: Param::new(random_matrix(1, 2, &mut stream), ParamKind::Bias),
            };
            let got = gal_forward(&x, &adj, &params).unwrap();
            let want = gal_reference(&x, &adj, &params.w.value, params.a.value.as_slice(), params.b.value.as_slice());
            for (g, w) in got.as_slice().iter().zip(want.as_slice()) {
                assert_abs_diff_eq!(g, w, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn pooling_examples() {
        let x = m(&[&[1.0, -2.0], &[3.0, 5.0]]);
        let mut params = PoolParams::zeros(2, 2);
        params.w2.value = Matrix::identity(2);
        assert_eq!(global_attention_pool(&x, &params).unwrap(), vec![2.0, 1.5]);

        let mut stream = rng::stream(3);
        let params = PoolParams {
            w1: Param::new(random_matrix(2, 2, &mut stream), ParamKind::Weight),
            b1: Param::new(random_matrix(1, 2, &mut stream), ParamKind::Bias),
            w2: Param::new(random_matrix(2, 2, &mut stream), ParamKind::Weight),
            b2: Param::new(random_matrix(1, 2, &mut stream), ParamKind::Bias),
        };
        let single = m(&[&[0.4, -0.9]]);
        let got = global_attention_pool(&single, &params).unwrap();
        for k in 0..2 {
            let pre_gate = 0.4 * params.w1.value[(0, k)] - 0.9 * params.w1.value[(1, k)] + params.b1.value[(0, k)];
            let value = 0.4 * params.w2.value[(0, k)] - 0.9 * params.w2.value[(1, k)] + params.b2.value[(0, k)];
            assert_abs_diff_eq!(got[k], value / (1.0 + (-pre_gate).exp()), epsilon = 1e-14);
        }

        let got = global_attention_pool(&x, &params).unwrap();
        for k in 0..2 {
            let want: f64 = (0..2)
                .map(|i| {
                    let pre_gate = x[(i, 0)] * params.w1.value[(0, k)] + x[(i, 1)] * params.w1.value[(1, k)] + params.b1.value[(0, k)];
                    let value = x[(i, 0)] * params.w2.value[(0, k)] + x[(i, 1)] * params.w2.value[(1, k)] + params.b2.value[(0, k)];
                    value / (1.0 + (-pre_gate).exp())
                })
                .sum();
            assert_abs_diff_eq!(got[k], want, epsilon = 1e-14);
        }
    }

    #[test]
    fn reference_layout_output_lengths() {
        let mut stream = rng::stream(0);
        for (n, len) in [(16, 64), (32, 128), (64, 256)] {
            let model = GatModel::init(GatDims::reference(n, 16), &mut stream);
            let (x, adj, e) = toy_graph(16, &mut stream);
            let out = model.predict(Graph { nodes: &x, adjacency: &adj, edges: &e }).unwrap();
            assert_eq!(out.len(), len);
            model.validate().unwrap();
        }
    }

    #[test]
    fn zero_model_outputs_head_bias() {
        let mut model = GatModel::zeros(toy_dims(EdgeMode::Concat));
        model.head_b.value = Matrix::row_vector(&[1.0, -2.0, 3.0, 0.5, 0.0, 0.0, 7.0, -1.0]);
        let mut stream = rng::stream(5);
        let (x, adj, e) = toy_graph(4, &mut stream);
        let out = model.predict(Graph { nodes: &x, adjacency: &adj, edges: &e }).unwrap();
        assert_eq!(out, model.head_b.value.as_slice());
    }

    #[test]
    fn eval_forward_is_deterministic() {
        let mut stream = rng::stream(9);
        let model = GatModel::init(GatDims::reference(16, 16), &mut stream);
        let (x, adj, e) = toy_graph(16, &mut stream);
        let g = Graph { nodes: &x, adjacency: &adj, edges: &e };
        let a = model.predict(g).unwrap();
        let b = model.predict(g).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    fn total_loss(model: &GatModel, g: Graph<'_>, target: &[f64], mode: Mode, seed: u64, l2: f64) -> f64 {
        let mut stream = rng::stream(seed);
        let (out, _) = model.forward(g, mode, &mut stream).unwrap();
        let data: f64 = out.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / out.len() as f64;
        let penalty: f64 = model.params().iter().filter(|p| p.kind == ParamKind::Weight).map(|p| l2 * p.value.sum_squares()).sum();
        data + penalty
    }

    fn check_gradients(edge_mode: EdgeMode, mode: Mode, seed: u64) {
        let mut stream = rng::stream(seed);
        let mut model = GatModel::init(toy_dims(edge_mode), &mut stream);
        for p in model.params_mut() {
            if p.kind == ParamKind::Bias {
                for v in p.value.as_mut_slice() {
                    *v = stream.random_range(-0.3..0.3);
                }
            }
        }
        let (x, adj, e) = toy_graph(4, &mut stream);
        let g = Graph { nodes: &x, adjacency: &adj, edges: &e };
        let target: Vec<f64> = (0..8).map(|_| stream.random_range(-1.0..1.0)).collect();
        let l2 = 5e-4;
        let drop_seed = seed + 1000;

        model.zero_grad();
        model.accumulate(g, &target, mode, 1.0, &mut rng::stream(drop_seed)).unwrap();
        model.accumulate_l2(l2).unwrap();

        for idx in 0..12 {
            let analytic = model.params()[idx].grad.clone();
            let numeric = nn::finite_diff_grad(
                |v| {
                    let mut probe = model.clone();
                    probe.params_mut()[idx].value = v.clone();
                    total_loss(&probe, g, &target, mode, drop_seed, l2)
                },
                &model.params()[idx].value,
                1e-6,
            );
            for (a, n) in analytic.as_slice().iter().zip(numeric.as_slice()) {
                let rel = (a - n).abs() / a.abs().max(n.abs()).max(1e-6);
                assert!(rel < 1e-5, "param {idx}: analytic {a} vs numeric {n}");
            }
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        for seed in 0..4 {
            check_gradients(EdgeMode::Concat, Mode::Eval, seed);
            check_gradients(EdgeMode::Ignored, Mode::Eval, seed);
            check_gradients(EdgeMode::Concat, Mode::Train { dropout: 0.5 }, seed);
        }
    }

    #[test]
    fn zero_loss_leaves_only_l2_and_gradients_are_linear() {
        let mut stream = rng::stream(21);
        let mut model = GatModel::init(toy_dims(EdgeMode::Concat), &mut stream);
        let (x, adj, e) = toy_graph(4, &mut stream);
        let g = Graph { nodes: &x, adjacency: &adj, edges: &e };
        let target = model.predict(g).unwrap();
        model.zero_grad();
        let loss = model.accumulate(g, &target, Mode::Eval, 1.0, &mut stream).unwrap();
        assert_eq!(loss, 0.0);
        model.accumulate_l2(0.01).unwrap();
        for p in model.params() {
            let want = if p.kind == ParamKind::Weight { p.value.map(|v| 0.02 * v) } else { Matrix::zeros(p.value.rows(), p.value.cols()) };
            assert_eq!(p.grad, want);
        }

        let other: Vec<f64> = target.iter().map(|t| t + 0.25).collect();
        model.zero_grad();
        model.accumulate(g, &other, Mode::Eval, 1.0, &mut stream).unwrap();
        let single: Vec<Matrix> = model.params().iter().map(|p| p.grad.clone()).collect();
        model.zero_grad();
        model.accumulate(g, &other, Mode::Eval, 2.0, &mut stream).unwrap();
        for (p, s) in model.params().iter().zip(&single) {
            for (a, b) in p.grad.as_slice().iter().zip(s.as_slice()) {
                assert_abs_diff_eq!(*a, 2.0 * b, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn node_permutation_is_equivariant() {
        let mut stream = rng::stream(33);
        let params = GalParams {
            w: Param::new(random_matrix(7, 5, &mut stream), ParamKind::Weight),
            a: Param::new(random_matrix(10, 1, &mut stream), ParamKind::Weight),
            b: Param::new(random_matrix(1, 5, &mut stream), ParamKind::Bias),
        };
        let x = random_matrix(2, 4, &mut stream);
        let mut e = EdgeFeatures::zeros(2, 3);
        for v in e.get_mut(0, 1) {
            *v = stream.random_range(-1.0..1.0);
        }
        for v in e.get_mut(1, 0) {
            *v = stream.random_range(-1.0..1.0);
        }
        let nbr = Matrix::filled(2, 2, 1.0);
        let z = params.forward_cached(&x, &nbr, Some(&e)).unwrap().z;

        let xp = m(&[x.row(1), x.row(0)]);
        let mut ep = EdgeFeatures::zeros(2, 3);
        ep.get_mut(0, 1).copy_from_slice(e.get(1, 0));
        ep.get_mut(1, 0).copy_from_slice(e.get(0, 1));
        let zp = params.forward_cached(&xp, &nbr, Some(&ep)).unwrap().z;
        for (i, k) in [(0, 1), (1, 0)] {
            for (a, b) in zp.row(i).iter().zip(z.row(k)) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn edge_mode_codes_round_trip() {
        for mode in [EdgeMode::Ignored, EdgeMode::Concat] {
            assert_eq!(EdgeMode::from_code(mode.code()), Some(mode));
        }
        assert_eq!(EdgeMode::from_code(7), None);
    }

    proptest! {
        #[test]
        fn attention_rows_are_normalized(
            vals in proptest::collection::vec(-50.0f64..50.0, 9),
            kernel in proptest::collection::vec(-5.0f64..5.0, 6),
            mask_bits in 0u16..512,
        ) {
            let xw = Matrix::from_vec(3, 3, vals).unwrap();
            let a = Param::new(Matrix::from_vec(6, 1, kernel).unwrap(), ParamKind::Weight);
            let mut mask = Matrix::from_vec(3, 3, (0..9).map(|k| ((mask_bits >> k) & 1) as f64).collect()).unwrap();
            for i in 0..3 {
                mask[(i, i)] = 1.0;
            }
            let alpha = attention_coefficients(&xw, &a, &mask).unwrap();
            for i in 0..3 {
                let sum: f64 = alpha.row(i).iter().sum();
                prop_assert!((sum - 1.0).abs() <= 1e-12);
                for j in 0..3 {
                    if mask[(i, j)] == 0.0 {
                        prop_assert_eq!(alpha[(i, j)], 0.0);
                    }
                }
            }
        }
    }
}
