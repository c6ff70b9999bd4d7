use ndarray::{Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layers::{Layer, LayerCache, Structure};
use super::{MpnnError, Result, Variant};
use crate::Graph;

/// A trained (or freshly initialized) classifier. Immutable once trained and
/// cheap to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub variant: Variant,
    pub layers: Vec<Layer>,
    /// `hidden_dim × class_count`.
    pub head_weight: Array2<f64>,
    /// `1 × class_count`.
    pub head_bias: Array2<f64>,
}

/// Arithmetic mean of the rows; a graph without nodes pools to zeros.
pub fn mean_pool(h: &Array2<f64>) -> Array1<f64> {
    h.mean_axis(Axis(0)).unwrap_or_else(|| Array1::zeros(h.ncols()))
}

pub(crate) fn softmax(logits: &Array1<f64>) -> Array1<f64> {
    let max = logits.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let e = logits.mapv(|v| (v - max).exp());
    let total = e.sum();
    e / total
}

struct Trace {
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
    caches: Vec<LayerCache>,
    pooled: Array1<f64>,
    probs: Array1<f64>,
}

impl Model {
    pub fn new(
        variant: Variant,
        input_dim: usize,
        hidden_dim: usize,
        num_layers: usize,
        class_count: usize,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(num_layers);
        for l in 0..num_layers {
            let d_in = if l == 0 { input_dim } else { hidden_dim };
            layers.push(Layer::new(variant, d_in, hidden_dim, &mut rng));
        }
        let limit = (6.0 / (hidden_dim + class_count) as f64).sqrt();
        let head_weight = Array2::from_shape_fn((hidden_dim, class_count), |_| {
            rand::Rng::random_range(&mut rng, -limit..limit)
        });
        Model { variant, layers, head_weight, head_bias: Array2::zeros((1, class_count)) }
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(self.head_weight.nrows(), Layer::input_dim)
    }

    pub fn hidden_dim(&self) -> usize {
        self.head_weight.nrows()
    }

    pub fn class_count(&self) -> usize {
        self.head_weight.ncols()
    }

    /// Every parameter tensor with a stable name, head last.
    pub fn tensors(&self) -> Vec<(String, &Array2<f64>)> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            for (name, t) in layer.tensors() {
                out.push((format!("layer{i}.{name}"), t));
            }
        }
        out.push(("head.weight".into(), &self.head_weight));
        out.push(("head.bias".into(), &self.head_bias));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Array2<f64>> {
        let mut out: Vec<&mut Array2<f64>> = Vec::new();
        for layer in &mut self.layers {
            out.extend(layer.tensors_mut());
        }
        out.push(&mut self.head_weight);
        out.push(&mut self.head_bias);
        out
    }

    pub fn zeros_like(&self) -> Self {
        Model {
            variant: self.variant,
            layers: self.layers.iter().map(Layer::zeros_like).collect(),
            head_weight: Array2::zeros(self.head_weight.raw_dim()),
            head_bias: Array2::zeros(self.head_bias.raw_dim()),
        }
    }

    pub(crate) fn add_assign(&mut self, other: &Model) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            *a += b.1;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }

    fn check_input(&self, s: &Structure, x: &Array2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim() || x.nrows() != s.node_count() {
            return Err(MpnnError::Dimension(format!(
                "input is {}×{}, model expects {} nodes × {} columns",
                x.nrows(),
                x.ncols(),
                s.node_count(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    fn trace(&self, s: &Structure, x: &Array2<f64>) -> Trace {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        for layer in &self.layers {
            let (out, cache) = layer.forward_cached(s, &h);
            let next = out.mapv(|v| v.max(0.0));
            inputs.push(h);
            pre.push(out);
            caches.push(cache);
            h = next;
        }
        let pooled = mean_pool(&h);
        let logits = pooled.dot(&self.head_weight) + self.head_bias.row(0);
        Trace { inputs, pre, caches, pooled, probs: softmax(&logits) }
    }

    /// Final node states after the last rectifier.
    pub fn node_states(&self, g: &Graph, x: &Array2<f64>) -> Result<Array2<f64>> {
        let s = Structure::new(g);
        self.check_input(&s, x)?;
        let mut h = x.clone();
        for layer in &self.layers {
            h = layer.forward(&s, &h).mapv(|v| v.max(0.0));
        }
        Ok(h)
    }

    /// Class probabilities for one graph.
    pub fn probabilities(&self, g: &Graph, x: &Array2<f64>) -> Result<Array1<f64>> {
        self.probabilities_with(&Structure::new(g), x)
    }

    pub fn probabilities_with(&self, s: &Structure, x: &Array2<f64>) -> Result<Array1<f64>> {
        self.check_input(s, x)?;
        Ok(self.trace(s, x).probs)
    }

    /// `weight · (−ln p_label)` for one graph.
    pub fn loss(&self, s: &Structure, x: &Array2<f64>, label: usize, weight: f64) -> Result<f64> {
        let p = self.probabilities_with(s, x)?;
        Ok(-weight * p[label].ln())
    }

    /// Loss and parameter gradients for one graph.
    pub fn loss_and_grad(
        &self,
        s: &Structure,
        x: &Array2<f64>,
        label: usize,
        weight: f64,
    ) -> Result<(f64, Model)> {
        self.check_input(s, x)?;
        let t = self.trace(s, x);
        let loss = -weight * t.probs[label].ln();
        let mut grads = self.zeros_like();

        let mut g_logits = t.probs.clone();
        g_logits[label] -= 1.0;
        g_logits *= weight;
        let g_logits_row = g_logits.view().insert_axis(Axis(0));
        grads.head_weight = t.pooled.view().insert_axis(Axis(1)).dot(&g_logits_row);
        grads.head_bias = g_logits_row.to_owned();

        let n = s.node_count();
        let g_pooled = self.head_weight.dot(&g_logits);
        let mut g_h = Array2::zeros((n, self.hidden_dim()));
        if n > 0 {
            let share = g_pooled / n as f64;
            for mut row in g_h.rows_mut() {
                row.assign(&share);
            }
        }
        for l in (0..self.layers.len()).rev() {
            let mut g_pre = g_h;
            g_pre.zip_mut_with(&t.pre[l], |g, &p| {
                if p <= 0.0 {
                    *g = 0.0
                }
            });
            g_h = self.layers[l].backward(s, &t.inputs[l], &t.caches[l], &g_pre, &mut grads.layers[l]);
        }
        Ok((loss, grads))
    }
}
