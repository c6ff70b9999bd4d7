use std::collections::BTreeMap;
use std::sync::Arc;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::metrics::{accuracy, confusion_matrix, f1_binary, macro_f1, roc_auc};
use super::{CellKey, EvalError, MeanStd, MetricsReport, Result, Task};
use crate::density::DensityMetric;
use crate::embed::EmbeddingMatrix;
use crate::graph::{stratified_split, SplitFractions};
use crate::mpnn::{self, build_inputs, InputMode, ModelConfig, Variant};
use crate::walk::ThresholdRule;
use crate::{Execution, LabeledGraphSet, Split};

/// Supplies one embedding per graph (in dataset order) for a density
/// metric and threshold rule.
pub trait EmbeddingSource: Sync {
    fn embeddings(&self, metric: DensityMetric, rule: ThresholdRule) -> Result<Arc<Vec<EmbeddingMatrix>>>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub task: Task,
    /// Class index scored as positive for F1 and ROC; binary tasks only.
    pub positive_class: Option<usize>,
    pub metrics: Vec<DensityMetric>,
    pub threshold_rules: Vec<ThresholdRule>,
    pub input_modes: Vec<InputMode>,
    pub variants: Vec<Variant>,
    pub hidden_dims: Vec<usize>,
    pub learning_rates: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Epochs, patience, batch size, depth and class weighting for every run.
    pub base: ModelConfig,
    /// When set, every seed draws its own stratified split with these
    /// fractions; otherwise the dataset's splits are used as given.
    pub resplit: Option<SplitFractions>,
}

impl SweepConfig {
    pub fn validate(&self, data: &LabeledGraphSet) -> Result<()> {
        let bad = |m: &str| Err(EvalError::InvalidConfig(m.to_string()));
        if self.seeds.is_empty() {
            return bad("seeds must not be empty");
        }
        if self.variants.is_empty() || self.input_modes.is_empty() {
            return bad("variants and input_modes must not be empty");
        }
        if self.hidden_dims.is_empty() || self.learning_rates.is_empty() {
            return bad("hidden_dims and learning_rates must not be empty");
        }
        let needs_walks = self.input_modes.iter().any(|m| m.uses_embeddings());
        if needs_walks && (self.metrics.is_empty() || self.threshold_rules.is_empty()) {
            return bad("embedding inputs need at least one density metric and threshold rule");
        }
        if data.class_count() < 2 {
            return bad("dataset needs at least two classes");
        }
        match (self.task, self.positive_class) {
            (Task::Binary, _) if data.class_count() != 2 => bad("binary task needs exactly two classes"),
            (Task::Binary, Some(p)) if p >= 2 => bad("positive_class out of range"),
            (Task::Binary, None) => bad("binary task needs positive_class"),
            _ => Ok(()),
        }
    }

    /// Cells in report order.
    pub fn cells(&self) -> Vec<CellKey> {
        let mut cells = Vec::new();
        for &mode in &self.input_modes {
            for &variant in &self.variants {
                if mode.uses_embeddings() {
                    for &metric in &self.metrics {
                        for &rule in &self.threshold_rules {
                            cells.push(CellKey { input_mode: mode, metric: Some(metric), threshold_rule: Some(rule), variant });
                        }
                    }
                } else {
                    cells.push(CellKey { input_mode: mode, metric: None, threshold_rule: None, variant });
                }
            }
        }
        cells.sort();
        cells.dedup();
        cells
    }
}

/// A cell whose training failed; the remaining cells are still reported.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub cell: CellKey,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub reports: Vec<MetricsReport>,
    pub failures: Vec<CellFailure>,
}

type InputKey = (InputMode, Option<DensityMetric>, Option<ThresholdRule>);

struct Run {
    cell: usize,
    hidden: usize,
    lr: f64,
    seed_idx: usize,
}

struct RunResult {
    val_accuracy: f64,
    preds: Vec<usize>,
    probs: Vec<Vec<f64>>,
    labels: Vec<usize>,
}

fn run_one(
    exec: Execution,
    cfg: &SweepConfig,
    cell: &CellKey,
    run: &Run,
    data: &LabeledGraphSet,
    inputs: &[Array2<f64>],
) -> mpnn::Result<RunResult> {
    let model_cfg = ModelConfig {
        variant: cell.variant,
        hidden_dim: run.hidden,
        learning_rate: run.lr,
        input_mode: cell.input_mode,
        seed: cfg.seeds[run.seed_idx],
        ..cfg.base.clone()
    };
    let out = mpnn::train_with(exec, &model_cfg, data, inputs)?;
    let mut val = data.indices_in(Split::Val);
    if val.is_empty() {
        val = data.indices_in(Split::Train);
    }
    let val_preds = mpnn::predict_dataset_with(exec, &out.model, data, inputs, &val)?;
    let val_labels: Vec<usize> = val.iter().map(|&i| data.labels()[i]).collect();
    let val_pred_labels: Vec<usize> = val_preds.iter().map(|p| p.label).collect();
    let val_accuracy = accuracy(&val_pred_labels, &val_labels).unwrap_or(0.0);

    let test = data.indices_in(Split::Test);
    let preds = mpnn::predict_dataset_with(exec, &out.model, data, inputs, &test)?;
    Ok(RunResult {
        val_accuracy,
        preds: preds.iter().map(|p| p.label).collect(),
        probs: preds.into_iter().map(|p| p.probabilities).collect(),
        labels: test.iter().map(|&i| data.labels()[i]).collect(),
    })
}

/// Train every (cell, hidden, learning rate, seed) combination, pick each
/// cell's hyperparameters by mean validation accuracy (ties: lower learning
/// rate, then smaller hidden size) and report its test metrics over seeds.
///
/// Embedding failures abort the sweep. Training failures are recorded per
/// cell and the sweep moves on.
pub fn grid_sweep(
    exec: Execution,
    data: &LabeledGraphSet,
    cfg: &SweepConfig,
    source: &dyn EmbeddingSource,
) -> Result<SweepOutcome> {
    cfg.validate(data)?;
    let cells = cfg.cells();

    let datasets: Vec<LabeledGraphSet> = match cfg.resplit {
        Some(fractions) => cfg
            .seeds
            .iter()
            .map(|&s| {
                stratified_split(data, fractions, s).map_err(|e| EvalError::Split { seed: s, message: e.to_string() })
            })
            .collect::<Result<_>>()?,
        None => vec![data.clone(); cfg.seeds.len()],
    };

    let mut embeddings: BTreeMap<(DensityMetric, ThresholdRule), Arc<Vec<EmbeddingMatrix>>> = BTreeMap::new();
    for cell in &cells {
        if let (Some(m), Some(r)) = (cell.metric, cell.threshold_rule) {
            if !embeddings.contains_key(&(m, r)) {
                embeddings.insert((m, r), source.embeddings(m, r)?);
            }
        }
    }

    let mut inputs: BTreeMap<InputKey, std::result::Result<Vec<Array2<f64>>, String>> = BTreeMap::new();
    for cell in &cells {
        let key = (cell.input_mode, cell.metric, cell.threshold_rule);
        if inputs.contains_key(&key) {
            continue;
        }
        let emb = match (cell.metric, cell.threshold_rule) {
            (Some(m), Some(r)) => Some(Arc::clone(&embeddings[&(m, r)])),
            _ => None,
        };
        let built = exec
            .try_map(&(0..data.len()).collect::<Vec<_>>(), |&i| {
                build_inputs(data.graph(i), emb.as_ref().map(|e| &e[i]), cell.input_mode)
                    .map_err(|e| format!("graph {}: {e}", data.ids()[i]))
            });
        inputs.insert(key, built);
    }

    let mut runs = Vec::new();
    for (c, cell) in cells.iter().enumerate() {
        if inputs[&(cell.input_mode, cell.metric, cell.threshold_rule)].is_err() {
            continue;
        }
        for &hidden in &cfg.hidden_dims {
            for &lr in &cfg.learning_rates {
                for seed_idx in 0..cfg.seeds.len() {
                    runs.push(Run { cell: c, hidden, lr, seed_idx });
                }
            }
        }
    }
    log::info!("sweep: {} cells, {} training runs", cells.len(), runs.len());

    let results = exec.map(&runs, |run| {
        let cell = &cells[run.cell];
        let x = inputs[&(cell.input_mode, cell.metric, cell.threshold_rule)].as_ref().expect("filtered above");
        let r = run_one(exec, cfg, cell, run, &datasets[run.seed_idx], x);
        if let Err(e) = &r {
            log::warn!("{cell} hidden={} lr={} seed={}: {e}", run.hidden, run.lr, cfg.seeds[run.seed_idx]);
        }
        r
    });

    let mut by_cell: Vec<Vec<(&Run, mpnn::Result<RunResult>)>> = (0..cells.len()).map(|_| Vec::new()).collect();
    for (run, r) in runs.iter().zip(results) {
        by_cell[run.cell].push((run, r));
    }

    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for (c, cell) in cells.iter().enumerate() {
        if let Err(message) = &inputs[&(cell.input_mode, cell.metric, cell.threshold_rule)] {
            failures.push(CellFailure { cell: *cell, message: message.clone() });
            continue;
        }
        let mut ok = Vec::new();
        let mut first_error = None;
        for (run, r) in std::mem::take(&mut by_cell[c]) {
            match r {
                Ok(res) => ok.push((run, res)),
                Err(e) if first_error.is_none() => {
                    first_error = Some(format!(
                        "hidden={} lr={} seed={}: {e}",
                        run.hidden, run.lr, cfg.seeds[run.seed_idx]
                    ))
                }
                Err(_) => {}
            }
        }
        if let Some(message) = first_error {
            failures.push(CellFailure { cell: *cell, message });
            continue;
        }
        match summarize(cfg, data, cell, ok) {
            Ok(r) => reports.push(r),
            Err(e) => failures.push(CellFailure { cell: *cell, message: e.to_string() }),
        }
    }
    Ok(SweepOutcome { reports, failures })
}

fn summarize(
    cfg: &SweepConfig,
    data: &LabeledGraphSet,
    cell: &CellKey,
    runs: Vec<(&Run, RunResult)>,
) -> Result<MetricsReport> {
    // Mean validation accuracy per (hidden, lr).
    let mut best: Option<(f64, f64, usize)> = None;
    for &hidden in &cfg.hidden_dims {
        for &lr in &cfg.learning_rates {
            let accs: Vec<f64> = runs
                .iter()
                .filter(|(r, _)| r.hidden == hidden && r.lr == lr)
                .map(|(_, res)| res.val_accuracy)
                .collect();
            let mean = MeanStd::of(&accs).mean;
            let better = match best {
                None => true,
                Some((b_acc, b_lr, b_hidden)) => {
                    mean > b_acc || (mean == b_acc && (lr < b_lr || (lr == b_lr && hidden < b_hidden)))
                }
            };
            if better {
                best = Some((mean, lr, hidden));
            }
        }
    }
    let (val_accuracy, learning_rate, hidden_dim) = best.expect("grids are non-empty");
    let mut chosen: Vec<(usize, &RunResult)> = runs
        .iter()
        .filter(|(r, _)| r.hidden == hidden_dim && r.lr == learning_rate)
        .map(|(r, res)| (r.seed_idx, res))
        .collect();
    chosen.sort_by_key(|(s, _)| *s);
    let chosen: Vec<&RunResult> = chosen.into_iter().map(|(_, r)| r).collect();

    let n = data.class_count();
    let mut accs = Vec::new();
    let mut f1s = Vec::new();
    let mut confusion = vec![vec![0u64; n]; n];
    let mut scores = Vec::new();
    let mut positives = Vec::new();
    for res in &chosen {
        accs.push(accuracy(&res.preds, &res.labels)?);
        let cm = confusion_matrix(&res.preds, &res.labels, n)?;
        for (row, add) in confusion.iter_mut().zip(cm) {
            for (a, b) in row.iter_mut().zip(add) {
                *a += b;
            }
        }
        match (cfg.task, cfg.positive_class) {
            (Task::Binary, Some(p)) => {
                f1s.push(f1_binary(&res.preds, &res.labels, p)?);
                scores.extend(res.probs.iter().map(|q| q[p]));
                positives.extend(res.labels.iter().map(|&l| l == p));
            }
            _ => f1s.push(macro_f1(&res.preds, &res.labels, n)?),
        }
    }
    let (roc_points, auc) = match cfg.task {
        Task::Binary => match roc_auc(&scores, &positives) {
            Ok((pts, a)) => (pts, Some(a)),
            Err(EvalError::AucUndefined) => (Vec::new(), None),
            Err(e) => return Err(e),
        },
        Task::Multiclass => (Vec::new(), None),
    };
    let f1 = MeanStd::of(&f1s);
    Ok(MetricsReport {
        task: cfg.task,
        cell: *cell,
        hidden_dim,
        learning_rate,
        seeds: cfg.seeds.clone(),
        class_names: data.class_names().to_vec(),
        positive_class: cfg.positive_class.filter(|_| cfg.task == Task::Binary).map(|p| data.class_names()[p].clone()),
        val_accuracy,
        accuracy: MeanStd::of(&accs),
        f1: (cfg.task == Task::Binary).then_some(f1),
        macro_f1: (cfg.task == Task::Multiclass).then_some(f1),
        confusion,
        roc_points,
        auc,
        evaluated_graphs: chosen.first().map_or(0, |r| r.labels.len()),
    })
}
