//! Skip-gram with negative sampling over walk corpora.
//!
//! For a (center, context) pair with negatives `n_1..n_k` the loss is
//! `-ln σ(u_ctx · v_center) - Σ ln σ(-u_{n_i} · v_center)` where `v` are the
//! input (embedding) vectors and `u` the context vectors. Negatives are drawn
//! from corpus token frequencies raised to the 3/4 power.

use std::cell::Cell;
use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::Array2;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::walk::WalkCorpus;
use crate::Execution;

#[derive(Error, Debug, PartialEq)]
pub enum EmbedError {
    #[error("node id {node} in corpus is out of range for {node_count} nodes")]
    NodeOutOfRange { node: usize, node_count: usize },
    #[error("corpus too short: no (center, context) pairs")]
    CorpusTooShort,
    #[error("invalid skip-gram config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgnsConfig {
    pub dim: usize,
    /// Context nodes on each side of the center; 2 gives four context nodes.
    pub window_radius: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Learning rate reached at the end of the last epoch (linear decay).
    pub min_learning_rate: f64,
    pub seed: u64,
    /// Lock-free asynchronous updates across threads. Results then vary in
    /// low-order bits between runs; leave off for reproducible output.
    pub parallel: bool,
}

impl Default for SgnsConfig {
    fn default() -> Self {
        SgnsConfig {
            dim: 128,
            window_radius: 2,
            negatives: 5,
            epochs: 5,
            learning_rate: 0.025,
            min_learning_rate: 1e-4,
            seed: 0,
            parallel: false,
        }
    }
}

impl SgnsConfig {
    pub fn validate(&self) -> Result<(), EmbedError> {
        let bad = |m: &str| Err(EmbedError::InvalidConfig(m.to_string()));
        if self.dim == 0 {
            return bad("dim must be at least 1");
        }
        if self.window_radius == 0 {
            return bad("window_radius must be at least 1");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if !(self.learning_rate > 0.0) || !(self.min_learning_rate >= 0.0) {
            return bad("learning rates must be positive");
        }
        Ok(())
    }
}

/// Learned node embeddings, one row per node.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub rows: Array2<f64>,
    /// Mean per-pair loss of every training epoch.
    pub loss_history: Vec<f64>,
}

impl EmbeddingMatrix {
    pub fn node_count(&self) -> usize {
        self.rows.nrows()
    }

    pub fn dim(&self) -> usize {
        self.rows.ncols()
    }

    /// The same point cloud expressed in its own principal axes.
    ///
    /// Skip-gram training fixes embeddings only up to an orthogonal
    /// transform, so rows of two separately trained graphs are not
    /// comparable coordinate by coordinate. This rotates the rows onto the
    /// eigenvectors of `XᵀX` (no centering, so untrained all-zero rows stay at
    /// the origin), orders axes by decreasing eigenvalue and flips each axis
    /// so its coordinates sum to a non-negative value. Dot products between
    /// rows are unchanged. Axes with (near-)equal eigenvalues are not
    /// uniquely determined.
    pub fn canonical_frame(&self) -> EmbeddingMatrix {
        let x = &self.rows;
        let (values, vectors) = symmetric_eigen(x.t().dot(x));
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
        let mut rows = Array2::zeros(x.raw_dim());
        for (c, &k) in order.iter().enumerate() {
            let mut col = x.dot(&vectors.column(k));
            if col.sum() < 0.0 {
                col.mapv_inplace(|z| -z);
            }
            rows.column_mut(c).assign(&col);
        }
        EmbeddingMatrix { rows, loss_history: self.loss_history.clone() }
    }
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns the
/// eigenvalues and the eigenvectors as columns, in no particular order.
fn symmetric_eigen(mut a: Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let d = a.nrows();
    let mut v = Array2::<f64>::eye(d);
    let scale: f64 = a.iter().map(|x| x * x).sum::<f64>().max(f64::MIN_POSITIVE);
    for _ in 0..100 {
        let mut off = 0.0;
        for p in 0..d {
            for q in p + 1..d {
                off += a[[p, q]] * a[[p, q]];
            }
        }
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                let apq = a[[p, q]];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * apq);
                let t = if theta == 0.0 {
                    1.0
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let (akp, akq) = (a[[k, p]], a[[k, q]]);
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..d {
                    let (apk, aqk) = (a[[p, k]], a[[q, k]]);
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
                for k in 0..d {
                    let (vkp, vkq) = (v[[k, p]], v[[k, q]]);
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..d).map(|i| a[[i, i]]).collect(), v)
}

/// Call `f(center, context)` for every pair within `radius` positions.
fn for_each_pair(walk: &[usize], radius: usize, mut f: impl FnMut(usize, usize)) {
    for (i, &center) in walk.iter().enumerate() {
        let lo = i.saturating_sub(radius);
        let hi = (i + radius).min(walk.len() - 1);
        for j in lo..=hi {
            if j != i {
                f(center, walk[j]);
            }
        }
    }
}

fn pair_count(walk_len: usize, radius: usize) -> usize {
    (0..walk_len)
        .map(|i| (i + radius).min(walk_len.saturating_sub(1)) - i.saturating_sub(radius))
        .sum()
}

/// All (center, context) pairs of the corpus, walk by walk.
pub fn extract_pairs(corpus: &WalkCorpus, window_radius: usize) -> Vec<(usize, usize)> {
    extract_pairs_with(Execution::default(), corpus, window_radius)
}

pub fn extract_pairs_with(exec: Execution, corpus: &WalkCorpus, window_radius: usize) -> Vec<(usize, usize)> {
    exec.map(&corpus.walks, |walk| {
        let mut out = Vec::new();
        for_each_pair(walk, window_radius, |c, x| out.push((c, x)));
        out
    })
    .into_iter()
    .flatten()
    .collect()
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `ln(1 + e^x)` without overflow.
#[inline]
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Scalar storage that can be updated through a shared reference.
trait Store {
    fn get(&self, i: usize) -> f64;
    fn set(&self, i: usize, x: f64);
}

impl Store for [Cell<f64>] {
    #[inline]
    fn get(&self, i: usize) -> f64 {
        self[i].get()
    }
    #[inline]
    fn set(&self, i: usize, x: f64) {
        self[i].set(x)
    }
}

impl Store for [AtomicU64] {
    #[inline]
    fn get(&self, i: usize) -> f64 {
        f64::from_bits(self[i].load(Ordering::Relaxed))
    }
    #[inline]
    fn set(&self, i: usize, x: f64) {
        self[i].store(x.to_bits(), Ordering::Relaxed)
    }
}

/// One SGD step on a single pair. Returns the pair loss before the update.
#[inline]
fn sgd_pair<S: Store + ?Sized>(
    input: &S,
    output: &S,
    dim: usize,
    center: usize,
    targets: &[(usize, f64)],
    lr: f64,
    grad_v: &mut [f64],
) -> f64 {
    grad_v.iter_mut().for_each(|g| *g = 0.0);
    let vo = center * dim;
    let mut loss = 0.0;
    for &(t, label) in targets {
        let uo = t * dim;
        let mut dot = 0.0;
        for k in 0..dim {
            dot += input.get(vo + k) * output.get(uo + k);
        }
        loss += if label > 0.5 { softplus(-dot) } else { softplus(dot) };
        let g = sigmoid(dot) - label;
        for k in 0..dim {
            let u = output.get(uo + k);
            grad_v[k] += g * u;
            output.set(uo + k, u - lr * g * input.get(vo + k));
        }
    }
    for k in 0..dim {
        input.set(vo + k, input.get(vo + k) - lr * grad_v[k]);
    }
    loss
}

fn validate_corpus(corpus: &WalkCorpus, node_count: usize) -> Result<Vec<u64>, EmbedError> {
    let mut counts = vec![0u64; node_count];
    for walk in &corpus.walks {
        for &v in walk {
            if v >= node_count {
                return Err(EmbedError::NodeOutOfRange { node: v, node_count });
            }
            counts[v] += 1;
        }
    }
    Ok(counts)
}

fn negative_table(counts: &[u64]) -> WeightedIndex<f64> {
    WeightedIndex::new(counts.iter().map(|&c| (c as f64).powf(0.75))).expect("corpus has tokens")
}

fn init_input(node_count: usize, dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let half = 0.5 / dim as f64;
    (0..node_count * dim).map(|_| rng.random_range(-half..half)).collect()
}

/// Draw negatives for one pair, skipping any equal to the positive context.
fn draw_targets<R: Rng>(context: usize, k: usize, table: &WeightedIndex<f64>, rng: &mut R, out: &mut Vec<(usize, f64)>) {
    out.clear();
    out.push((context, 1.0));
    for _ in 0..k {
        let n = table.sample(rng);
        if n != context {
            out.push((n, 0.0));
        }
    }
}

/// Train skip-gram embeddings for `node_count` nodes.
pub fn train_sgns(corpus: &WalkCorpus, node_count: usize, cfg: &SgnsConfig) -> Result<EmbeddingMatrix, EmbedError> {
    cfg.validate()?;
    let counts = validate_corpus(corpus, node_count)?;
    let pairs_per_epoch: usize = corpus.walks.iter().map(|w| pair_count(w.len(), cfg.window_radius)).sum();
    if pairs_per_epoch == 0 {
        return Err(EmbedError::CorpusTooShort);
    }
    let table = negative_table(&counts);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut input = init_input(node_count, cfg.dim, &mut rng);
    let mut output = vec![0.0; node_count * cfg.dim];

    let history = if cfg.parallel && Execution::Parallel.is_parallel() {
        train_hogwild(corpus, cfg, &table, pairs_per_epoch, &mut input, &mut output)
    } else {
        train_sequential(corpus, cfg, &table, pairs_per_epoch, &mut rng, &mut input, &mut output)
    };
    let rows = Array2::from_shape_vec((node_count, cfg.dim), input).expect("shape matches");
    Ok(EmbeddingMatrix { rows, loss_history: history })
}

fn learning_rate(cfg: &SgnsConfig, done: usize, total: usize) -> f64 {
    let frac = done as f64 / total as f64;
    (cfg.learning_rate - (cfg.learning_rate - cfg.min_learning_rate) * frac).max(cfg.min_learning_rate)
}

fn train_sequential(
    corpus: &WalkCorpus,
    cfg: &SgnsConfig,
    table: &WeightedIndex<f64>,
    pairs_per_epoch: usize,
    rng: &mut ChaCha8Rng,
    input: &mut [f64],
    output: &mut [f64],
) -> Vec<f64> {
    let input = Cell::from_mut(input).as_slice_of_cells();
    let output = Cell::from_mut(output).as_slice_of_cells();
    let total = pairs_per_epoch * cfg.epochs;
    let mut order: Vec<usize> = (0..corpus.walks.len()).collect();
    let mut grad_v = vec![0.0; cfg.dim];
    let mut targets = Vec::with_capacity(cfg.negatives + 1);
    let mut done = 0usize;
    let mut history = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        let mut loss = 0.0;
        for &w in &order {
            for_each_pair(&corpus.walks[w], cfg.window_radius, |center, context| {
                draw_targets(context, cfg.negatives, table, rng, &mut targets);
                let lr = learning_rate(cfg, done, total);
                loss += sgd_pair(input, output, cfg.dim, center, &targets, lr, &mut grad_v);
                done += 1;
            });
        }
        history.push(loss / pairs_per_epoch as f64);
    }
    history
}

#[cfg(feature = "parallel")]
fn train_hogwild(
    corpus: &WalkCorpus,
    cfg: &SgnsConfig,
    table: &WeightedIndex<f64>,
    pairs_per_epoch: usize,
    input: &mut [f64],
    output: &mut [f64],
) -> Vec<f64> {
    use rayon::prelude::*;
    use std::sync::atomic::AtomicUsize;

    let to_atomic = |xs: &[f64]| xs.iter().map(|x| AtomicU64::new(x.to_bits())).collect::<Vec<_>>();
    let shared_in = to_atomic(input);
    let shared_out = to_atomic(output);
    let total = pairs_per_epoch * cfg.epochs;
    let done = AtomicUsize::new(0);
    let chunk = (corpus.walks.len() / (4 * rayon::current_num_threads())).max(1);
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let loss: f64 = corpus
            .walks
            .par_chunks(chunk)
            .enumerate()
            .map(|(ci, walks)| {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(((epoch as u64) << 32) | ci as u64 + 1);
                let mut grad_v = vec![0.0; cfg.dim];
                let mut targets = Vec::with_capacity(cfg.negatives + 1);
                let mut loss = 0.0;
                for walk in walks {
                    for_each_pair(walk, cfg.window_radius, |center, context| {
                        draw_targets(context, cfg.negatives, table, &mut rng, &mut targets);
                        let lr = learning_rate(cfg, done.fetch_add(1, Ordering::Relaxed), total);
                        loss += sgd_pair(&shared_in[..], &shared_out[..], cfg.dim, center, &targets, lr, &mut grad_v);
                    });
                }
                loss
            })
            .sum();
        history.push(loss / pairs_per_epoch as f64);
    }
    for (dst, src) in input.iter_mut().zip(&shared_in) {
        *dst = f64::from_bits(src.load(Ordering::Relaxed));
    }
    for (dst, src) in output.iter_mut().zip(&shared_out) {
        *dst = f64::from_bits(src.load(Ordering::Relaxed));
    }
    history
}

#[cfg(not(feature = "parallel"))]
fn train_hogwild(
    _: &WalkCorpus,
    _: &SgnsConfig,
    _: &WeightedIndex<f64>,
    _: usize,
    _: &mut [f64],
    _: &mut [f64],
) -> Vec<f64> {
    unreachable!("hogwild training requires the parallel feature")
}

/// One training pair with explicitly chosen negatives.
#[derive(Debug, Clone, PartialEq)]
pub struct SgnsExample {
    pub center: usize,
    pub context: usize,
    pub negatives: Vec<usize>,
}

/// Parameters plus examples for evaluating the loss and its gradients.
#[derive(Debug, Clone)]
pub struct SgnsFixture {
    pub input: Array2<f64>,
    pub output: Array2<f64>,
    pub examples: Vec<SgnsExample>,
}

impl SgnsFixture {
    /// Pairs from `corpus` (truncated to `max_pairs`) with random negatives
    /// and standard-normal-scaled random parameters.
    pub fn from_corpus(
        corpus: &WalkCorpus,
        node_count: usize,
        dim: usize,
        window_radius: usize,
        negatives: usize,
        max_pairs: usize,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let examples = extract_pairs_with(Execution::Sequential, corpus, window_radius)
            .into_iter()
            .take(max_pairs)
            .map(|(center, context)| SgnsExample {
                center,
                context,
                negatives: (0..negatives).map(|_| rng.random_range(0..node_count)).collect(),
            })
            .collect();
        let input = Array2::from_shape_fn((node_count, dim), |_| rng.random_range(-1.0..1.0));
        let output = Array2::from_shape_fn((node_count, dim), |_| rng.random_range(-1.0..1.0));
        SgnsFixture { input, output, examples }
    }

    /// Summed loss over all examples.
    pub fn loss(&self) -> f64 {
        self.examples
            .iter()
            .map(|ex| {
                let v = self.input.row(ex.center);
                let mut loss = softplus(-v.dot(&self.output.row(ex.context)));
                for &n in &ex.negatives {
                    loss += softplus(v.dot(&self.output.row(n)));
                }
                loss
            })
            .sum()
    }

    /// Analytic gradients of [`loss`](Self::loss) with respect to the input
    /// and output matrices.
    pub fn gradients(&self) -> (Array2<f64>, Array2<f64>) {
        let mut g_in = Array2::zeros(self.input.raw_dim());
        let mut g_out = Array2::zeros(self.output.raw_dim());
        for ex in &self.examples {
            let v = self.input.row(ex.center);
            let targets = std::iter::once((ex.context, 1.0)).chain(ex.negatives.iter().map(|&n| (n, 0.0)));
            for (t, label) in targets {
                let u = self.output.row(t);
                let g = sigmoid(v.dot(&u)) - label;
                g_in.row_mut(ex.center).scaled_add(g, &u);
                g_out.row_mut(t).scaled_add(g, &v);
            }
        }
        (g_in, g_out)
    }
}

/// Largest relative disagreement between analytic gradients and central
/// finite differences with step `h`.
pub fn gradient_check_sgns(fixture: &SgnsFixture, h: f64) -> f64 {
    let (g_in, g_out) = fixture.gradients();
    let mut probe = fixture.clone();
    let mut worst = 0.0f64;
    for which in 0..2 {
        let analytic = if which == 0 { &g_in } else { &g_out };
        for (r, c) in ndarray::indices(analytic.raw_dim()) {
            let original = *fixture_entry(&mut probe, which, (r, c));
            *fixture_entry(&mut probe, which, (r, c)) = original + h;
            let up = probe.loss();
            *fixture_entry(&mut probe, which, (r, c)) = original - h;
            let down = probe.loss();
            *fixture_entry(&mut probe, which, (r, c)) = original;
            let numeric = (up - down) / (2.0 * h);
            worst = worst.max(relative_error(analytic[[r, c]], numeric, roundoff_floor(up, down, h)));
        }
    }
    worst
}

/// Smallest difference a central difference quotient can resolve: rounding
/// in the two loss values divided by the step, and never below 1e-10.
pub fn roundoff_floor(up: f64, down: f64, h: f64) -> f64 {
    (4.0 * f64::EPSILON * (up.abs() + down.abs()) / (2.0 * h)).max(1e-10)
}

fn fixture_entry(f: &mut SgnsFixture, which: usize, idx: (usize, usize)) -> &mut f64 {
    if which == 0 {
        &mut f.input[idx]
    } else {
        &mut f.output[idx]
    }
}

/// `|a - b| / max(|a|, |b|)`, with differences below `floor` treated as
/// equal.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    let diff = (a - b).abs();
    if diff < floor {
        return 0.0;
    }
    diff / a.abs().max(b.abs())
}
