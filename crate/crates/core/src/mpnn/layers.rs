use ndarray::{Array1, Array2, Axis};
use rand::Rng;

use super::Variant;
use crate::Graph;

const LEAKY_SLOPE: f64 = 0.2;

/// Per-graph quantities reused across layers and epochs.
#[derive(Debug, Clone)]
pub struct Structure {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    /// `1 / sqrt(deg + 1)` for the self-loop-augmented GCN normalization.
    inv_sqrt_deg: Vec<f64>,
}

impl Structure {
    pub fn new(g: &Graph) -> Self {
        let n = g.node_count();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::with_capacity(2 * g.edge_count());
        offsets.push(0);
        for v in 0..n {
            targets.extend_from_slice(g.neighbors(v));
            offsets.push(targets.len());
        }
        let inv_sqrt_deg = (0..n).map(|v| 1.0 / ((g.degree(v) + 1) as f64).sqrt()).collect();
        Structure { offsets, targets, inv_sqrt_deg }
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    fn neighbors(&self, v: usize) -> &[usize] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }

    /// Index range of `v`'s entries in the self-augmented neighbor layout
    /// used by attention: entry `start` is `v` itself, the rest its neighbors.
    fn attention_range(&self, v: usize) -> std::ops::Range<usize> {
        let start = self.offsets[v] + v;
        start..self.offsets[v + 1] + v + 1
    }

    fn attention_len(&self) -> usize {
        self.targets.len() + self.node_count()
    }

    /// `Â x` with `Â = D̃^-1/2 (A + I) D̃^-1/2`; `Â` is symmetric so this is
    /// also its own adjoint.
    fn gcn_propagate(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros(x.raw_dim());
        for v in 0..self.node_count() {
            let sv = self.inv_sqrt_deg[v];
            let mut row = out.row_mut(v);
            row.scaled_add(sv * sv, &x.row(v));
            for &u in self.neighbors(v) {
                row.scaled_add(sv * self.inv_sqrt_deg[u], &x.row(u));
            }
        }
        out
    }

    fn neighbor_mean(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros(x.raw_dim());
        for v in 0..self.node_count() {
            let nbrs = self.neighbors(v);
            if nbrs.is_empty() {
                continue;
            }
            let w = 1.0 / nbrs.len() as f64;
            let mut row = out.row_mut(v);
            for &u in nbrs {
                row.scaled_add(w, &x.row(u));
            }
        }
        out
    }

    fn neighbor_sum(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros(x.raw_dim());
        for v in 0..self.node_count() {
            let mut row = out.row_mut(v);
            for &u in self.neighbors(v) {
                row += &x.row(u);
            }
        }
        out
    }
}

/// Parameters of one message-passing layer. Every tensor is a matrix;
/// biases, attention vectors and ε are single-row matrices.
#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Gcn {
        weight: Array2<f64>,
        bias: Array2<f64>,
    },
    Sage {
        weight_self: Array2<f64>,
        weight_neigh: Array2<f64>,
        bias: Array2<f64>,
    },
    Gin {
        eps: Array2<f64>,
        weight1: Array2<f64>,
        bias1: Array2<f64>,
        weight2: Array2<f64>,
        bias2: Array2<f64>,
    },
    Gat {
        weight: Array2<f64>,
        att_src: Array2<f64>,
        att_dst: Array2<f64>,
        bias: Array2<f64>,
    },
}

/// Intermediate values of a forward pass needed by backward.
#[derive(Debug, Clone)]
pub(crate) enum LayerCache {
    Gcn,
    Sage { mean: Array2<f64> },
    Gin { agg: Array2<f64>, hidden_pre: Array2<f64>, hidden: Array2<f64> },
    Gat { z: Array2<f64>, alpha: Vec<f64>, logit_pre: Vec<f64> },
}

fn glorot<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-limit..limit))
}

fn relu(x: &Array2<f64>) -> Array2<f64> {
    x.mapv(|v| v.max(0.0))
}

fn bias_sum(g: &Array2<f64>) -> Array2<f64> {
    g.sum_axis(Axis(0)).insert_axis(Axis(0))
}

impl Layer {
    pub fn new<R: Rng>(variant: Variant, d_in: usize, d_out: usize, rng: &mut R) -> Self {
        let bias = || Array2::zeros((1, d_out));
        match variant {
            Variant::Gcn => Layer::Gcn { weight: glorot(d_in, d_out, rng), bias: bias() },
            Variant::Sage => Layer::Sage {
                weight_self: glorot(d_in, d_out, rng),
                weight_neigh: glorot(d_in, d_out, rng),
                bias: bias(),
            },
            Variant::Gin => Layer::Gin {
                eps: Array2::zeros((1, 1)),
                weight1: glorot(d_in, d_out, rng),
                bias1: bias(),
                weight2: glorot(d_out, d_out, rng),
                bias2: bias(),
            },
            Variant::Gat => Layer::Gat {
                weight: glorot(d_in, d_out, rng),
                att_src: glorot(1, d_out, rng),
                att_dst: glorot(1, d_out, rng),
                bias: bias(),
            },
        }
    }

    pub fn variant(&self) -> Variant {
        match self {
            Layer::Gcn { .. } => Variant::Gcn,
            Layer::Sage { .. } => Variant::Sage,
            Layer::Gin { .. } => Variant::Gin,
            Layer::Gat { .. } => Variant::Gat,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Layer::Gcn { weight, .. } | Layer::Gat { weight, .. } => weight.nrows(),
            Layer::Sage { weight_self, .. } => weight_self.nrows(),
            Layer::Gin { weight1, .. } => weight1.nrows(),
        }
    }

    /// Named parameter tensors in a fixed order.
    pub fn tensors(&self) -> Vec<(&'static str, &Array2<f64>)> {
        match self {
            Layer::Gcn { weight, bias } => vec![("weight", weight), ("bias", bias)],
            Layer::Sage { weight_self, weight_neigh, bias } => {
                vec![("weight_self", weight_self), ("weight_neigh", weight_neigh), ("bias", bias)]
            }
            Layer::Gin { eps, weight1, bias1, weight2, bias2 } => vec![
                ("eps", eps),
                ("weight1", weight1),
                ("bias1", bias1),
                ("weight2", weight2),
                ("bias2", bias2),
            ],
            Layer::Gat { weight, att_src, att_dst, bias } => {
                vec![("weight", weight), ("att_src", att_src), ("att_dst", att_dst), ("bias", bias)]
            }
        }
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Array2<f64>> {
        match self {
            Layer::Gcn { weight, bias } => vec![weight, bias],
            Layer::Sage { weight_self, weight_neigh, bias } => vec![weight_self, weight_neigh, bias],
            Layer::Gin { eps, weight1, bias1, weight2, bias2 } => vec![eps, weight1, bias1, weight2, bias2],
            Layer::Gat { weight, att_src, att_dst, bias } => vec![weight, att_src, att_dst, bias],
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    /// Pre-activation output of the layer.
    pub fn forward(&self, s: &Structure, h: &Array2<f64>) -> Array2<f64> {
        self.forward_cached(s, h).0
    }

    pub(crate) fn forward_cached(&self, s: &Structure, h: &Array2<f64>) -> (Array2<f64>, LayerCache) {
        match self {
            Layer::Gcn { weight, bias } => (s.gcn_propagate(&h.dot(weight)) + bias, LayerCache::Gcn),
            Layer::Sage { weight_self, weight_neigh, bias } => {
                let mean = s.neighbor_mean(h);
                let out = h.dot(weight_self) + mean.dot(weight_neigh) + bias;
                (out, LayerCache::Sage { mean })
            }
            Layer::Gin { eps, weight1, bias1, weight2, bias2 } => {
                let mut agg = s.neighbor_sum(h);
                agg.scaled_add(1.0 + eps[[0, 0]], h);
                let hidden_pre = agg.dot(weight1) + bias1;
                let hidden = relu(&hidden_pre);
                let out = hidden.dot(weight2) + bias2;
                (out, LayerCache::Gin { agg, hidden_pre, hidden })
            }
            Layer::Gat { weight, att_src, att_dst, bias } => {
                let z = h.dot(weight);
                let src = z.dot(&att_src.row(0));
                let dst = z.dot(&att_dst.row(0));
                let n = s.node_count();
                let mut alpha = vec![0.0; s.attention_len()];
                let mut logit_pre = vec![0.0; s.attention_len()];
                let mut out = Array2::zeros((n, z.ncols()));
                for v in 0..n {
                    let range = s.attention_range(v);
                    let others = std::iter::once(v).chain(s.neighbors(v).iter().copied());
                    let mut max = f64::NEG_INFINITY;
                    for (slot, u) in range.clone().zip(others.clone()) {
                        let pre = src[v] + dst[u];
                        logit_pre[slot] = pre;
                        let e = if pre > 0.0 { pre } else { LEAKY_SLOPE * pre };
                        alpha[slot] = e;
                        max = max.max(e);
                    }
                    let mut total = 0.0;
                    for slot in range.clone() {
                        alpha[slot] = (alpha[slot] - max).exp();
                        total += alpha[slot];
                    }
                    let mut row = out.row_mut(v);
                    for (slot, u) in range.zip(others) {
                        alpha[slot] /= total;
                        row.scaled_add(alpha[slot], &z.row(u));
                    }
                }
                (out + bias, LayerCache::Gat { z, alpha, logit_pre })
            }
        }
    }

    /// Accumulate parameter gradients into `grads` (same variant and shapes)
    /// and return the gradient with respect to the layer input.
    pub(crate) fn backward(
        &self,
        s: &Structure,
        h: &Array2<f64>,
        cache: &LayerCache,
        g_out: &Array2<f64>,
        grads: &mut Layer,
    ) -> Array2<f64> {
        match (self, cache, grads) {
            (Layer::Gcn { weight, .. }, LayerCache::Gcn, Layer::Gcn { weight: gw, bias: gb }) => {
                let g_hw = s.gcn_propagate(g_out);
                *gw += &h.t().dot(&g_hw);
                *gb += &bias_sum(g_out);
                g_hw.dot(&weight.t())
            }
            (
                Layer::Sage { weight_self, weight_neigh, .. },
                LayerCache::Sage { mean },
                Layer::Sage { weight_self: gws, weight_neigh: gwn, bias: gb },
            ) => {
                *gws += &h.t().dot(g_out);
                *gwn += &mean.t().dot(g_out);
                *gb += &bias_sum(g_out);
                let mut g_h = g_out.dot(&weight_self.t());
                let g_mean = g_out.dot(&weight_neigh.t());
                for v in 0..s.node_count() {
                    let nbrs = s.neighbors(v);
                    if nbrs.is_empty() {
                        continue;
                    }
                    let w = 1.0 / nbrs.len() as f64;
                    for &u in nbrs {
                        g_h.row_mut(u).scaled_add(w, &g_mean.row(v));
                    }
                }
                g_h
            }
            (
                Layer::Gin { eps, weight1, weight2, .. },
                LayerCache::Gin { agg, hidden_pre, hidden },
                Layer::Gin { eps: ge, weight1: gw1, bias1: gb1, weight2: gw2, bias2: gb2 },
            ) => {
                *gw2 += &hidden.t().dot(g_out);
                *gb2 += &bias_sum(g_out);
                let mut g_hidden = g_out.dot(&weight2.t());
                g_hidden.zip_mut_with(hidden_pre, |g, &pre| {
                    if pre <= 0.0 {
                        *g = 0.0
                    }
                });
                *gw1 += &agg.t().dot(&g_hidden);
                *gb1 += &bias_sum(&g_hidden);
                let g_agg = g_hidden.dot(&weight1.t());
                ge[[0, 0]] += (&g_agg * h).sum();
                let mut g_h = s.neighbor_sum(&g_agg);
                g_h.scaled_add(1.0 + eps[[0, 0]], &g_agg);
                g_h
            }
            (
                Layer::Gat { weight, att_src, att_dst, .. },
                LayerCache::Gat { z, alpha, logit_pre },
                Layer::Gat { weight: gw, att_src: gas, att_dst: gad, bias: gb },
            ) => {
                *gb += &bias_sum(g_out);
                let n = s.node_count();
                let mut g_z = Array2::zeros(z.raw_dim());
                let mut g_src = Array1::<f64>::zeros(n);
                let mut g_dst = Array1::<f64>::zeros(n);
                let mut g_alpha = Vec::new();
                for v in 0..n {
                    let range = s.attention_range(v);
                    let others: Vec<usize> = std::iter::once(v).chain(s.neighbors(v).iter().copied()).collect();
                    g_alpha.clear();
                    let gv = g_out.row(v);
                    let mut weighted = 0.0;
                    for (slot, &u) in range.clone().zip(&others) {
                        g_z.row_mut(u).scaled_add(alpha[slot], &gv);
                        let ga = gv.dot(&z.row(u));
                        weighted += alpha[slot] * ga;
                        g_alpha.push(ga);
                    }
                    for ((slot, &u), ga) in range.zip(&others).zip(&g_alpha) {
                        let g_e = alpha[slot] * (ga - weighted);
                        let g_pre = if logit_pre[slot] > 0.0 { g_e } else { LEAKY_SLOPE * g_e };
                        g_src[v] += g_pre;
                        g_dst[u] += g_pre;
                    }
                }
                gas.row_mut(0).scaled_add(1.0, &z.t().dot(&g_src));
                gad.row_mut(0).scaled_add(1.0, &z.t().dot(&g_dst));
                for v in 0..n {
                    let mut row = g_z.row_mut(v);
                    row.scaled_add(g_src[v], &att_src.row(0));
                    row.scaled_add(g_dst[v], &att_dst.row(0));
                }
                *gw += &h.t().dot(&g_z);
                g_z.dot(&weight.t())
            }
            _ => unreachable!("gradient buffer and cache must match the layer variant"),
        }
    }
}
