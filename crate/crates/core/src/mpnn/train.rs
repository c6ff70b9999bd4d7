use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::Structure;
use super::model::Model;
use super::{ModelConfig, MpnnError, Result};
use crate::{Execution, LabeledGraphSet, Split};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest validation loss.
    pub model: Model,
    pub log: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

/// Predicted class and the full probability vector for one graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: usize,
    pub probabilities: Vec<f64>,
}

impl Prediction {
    pub fn from_probabilities(probabilities: Vec<f64>) -> Self {
        let mut label = 0;
        for (c, &p) in probabilities.iter().enumerate() {
            if p > probabilities[label] {
                label = c;
            }
        }
        Prediction { label, probabilities }
    }
}

struct Adam {
    m: Model,
    v: Model,
    step: i32,
}

impl Adam {
    fn new(model: &Model) -> Self {
        Adam { m: model.zeros_like(), v: model.zeros_like(), step: 0 }
    }

    fn update(&mut self, model: &mut Model, grads: &Model, lr: f64) {
        self.step += 1;
        let c1 = 1.0 - BETA1.powi(self.step);
        let c2 = 1.0 - BETA2.powi(self.step);
        let params = model.tensors_mut();
        let ms = self.m.tensors_mut();
        let vs = self.v.tensors_mut();
        for (((p, m), v), (_, g)) in params.into_iter().zip(ms).zip(vs).zip(grads.tensors()) {
            ndarray::Zip::from(p).and(m).and(v).and(g).for_each(|p, m, v, &g| {
                *m = BETA1 * *m + (1.0 - BETA1) * g;
                *v = BETA2 * *v + (1.0 - BETA2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
            });
        }
    }
}

fn class_weights(cfg: &ModelConfig, data: &LabeledGraphSet, train: &[usize]) -> Vec<f64> {
    let c = data.class_count();
    if !cfg.class_weighting {
        return vec![1.0; c];
    }
    let mut counts = vec![0usize; c];
    for &i in train {
        counts[data.labels()[i]] += 1;
    }
    let present = counts.iter().filter(|&&k| k > 0).count() as f64;
    counts
        .iter()
        .map(|&k| if k == 0 { 1.0 } else { train.len() as f64 / (present * k as f64) })
        .collect()
}

fn check_inputs(data: &LabeledGraphSet, inputs: &[Array2<f64>]) -> Result<usize> {
    if inputs.len() != data.len() {
        return Err(MpnnError::Dimension(format!(
            "{} input matrices for {} graphs",
            inputs.len(),
            data.len()
        )));
    }
    let width = inputs.first().map_or(0, |x| x.ncols());
    for (i, x) in inputs.iter().enumerate() {
        if x.ncols() != width || x.nrows() != data.graph(i).node_count() {
            return Err(MpnnError::Dimension(format!(
                "graph {}: input is {}×{}, expected {} rows × {} columns",
                data.ids()[i],
                x.nrows(),
                x.ncols(),
                data.graph(i).node_count(),
                width
            )));
        }
    }
    Ok(width)
}

pub fn train(cfg: &ModelConfig, data: &LabeledGraphSet, inputs: &[Array2<f64>]) -> Result<TrainOutcome> {
    train_with(Execution::default(), cfg, data, inputs)
}

/// Train with the per-graph forward/backward work of each mini-batch
/// scheduled by `exec`. Gradients are summed in batch order, so the result
/// does not depend on `exec`.
pub fn train_with(
    exec: Execution,
    cfg: &ModelConfig,
    data: &LabeledGraphSet,
    inputs: &[Array2<f64>],
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let input_dim = check_inputs(data, inputs)?;
    let train_idx = data.indices_in(Split::Train);
    if train_idx.is_empty() {
        return Err(MpnnError::EmptyTrainSplit);
    }
    let first = data.labels()[train_idx[0]];
    if train_idx.iter().all(|&i| data.labels()[i] == first) {
        return Err(MpnnError::SingleClass(data.class_names()[first].clone()));
    }
    let val_idx = match data.indices_in(Split::Val) {
        v if v.is_empty() => train_idx.clone(),
        v => v,
    };
    let structures: Vec<Structure> = exec.map(data.graphs(), |g| Structure::new(g));
    let weights = class_weights(cfg, data, &train_idx);
    let labels = data.labels();

    let mut model = Model::new(cfg.variant, input_dim, cfg.hidden_dim, cfg.num_layers, data.class_count(), cfg.seed);
    let mut adam = Adam::new(&model);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_0f_ba7c);
    let mut order = train_idx.clone();
    let mut log = Vec::new();
    let mut best = (model.clone(), 0usize, f64::INFINITY);
    let mut stale = 0;

    let non_finite = |epoch| MpnnError::NonFiniteLoss { epoch, learning_rate: cfg.learning_rate };

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let results = exec.map(batch, |&i| {
                model.loss_and_grad(&structures[i], &inputs[i], labels[i], weights[labels[i]])
            });
            let mut grads = model.zeros_like();
            for r in results {
                let (loss, g) = r?;
                if !loss.is_finite() {
                    return Err(non_finite(epoch));
                }
                total += loss;
                grads.add_assign(&g);
            }
            let scale = 1.0 / batch.len() as f64;
            for t in grads.tensors_mut() {
                *t *= scale;
            }
            adam.update(&mut model, &grads, cfg.learning_rate);
            if !model.is_finite() {
                return Err(non_finite(epoch));
            }
        }
        let train_loss = total / order.len() as f64;

        let val_losses = exec.map(&val_idx, |&i| model.loss(&structures[i], &inputs[i], labels[i], weights[labels[i]]));
        let mut val_total = 0.0;
        for l in val_losses {
            val_total += l?;
        }
        let val_loss = val_total / val_idx.len() as f64;
        if !val_loss.is_finite() {
            return Err(non_finite(epoch));
        }
        log::debug!("{} epoch {epoch}: train {train_loss:.6} val {val_loss:.6}", cfg.variant);
        log.push(EpochLog { epoch, train_loss, val_loss });

        if val_loss < best.2 {
            best = (model.clone(), epoch, val_loss);
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    let (model, best_epoch, best_val_loss) = best;
    Ok(TrainOutcome { model, log, best_epoch, best_val_loss })
}

/// Predictions for the graphs at `indices`, in that order. Ties go to the
/// lowest class index.
pub fn predict_dataset(
    model: &Model,
    data: &LabeledGraphSet,
    inputs: &[Array2<f64>],
    indices: &[usize],
) -> Result<Vec<Prediction>> {
    predict_dataset_with(Execution::default(), model, data, inputs, indices)
}

pub fn predict_dataset_with(
    exec: Execution,
    model: &Model,
    data: &LabeledGraphSet,
    inputs: &[Array2<f64>],
    indices: &[usize],
) -> Result<Vec<Prediction>> {
    if inputs.len() != data.len() {
        return Err(MpnnError::Dimension(format!(
            "{} input matrices for {} graphs",
            inputs.len(),
            data.len()
        )));
    }
    exec.try_map(indices, |&i| {
        let p = model.probabilities(data.graph(i), &inputs[i])?;
        Ok(Prediction::from_probabilities(p.to_vec()))
    })
}
