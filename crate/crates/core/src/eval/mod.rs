//! Classification metrics, the hyperparameter sweep and report files.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::density::DensityMetric;
use crate::mpnn::{InputMode, Variant};
use crate::walk::ThresholdRule;

mod metrics;
mod report;
mod sweep;

pub use metrics::{accuracy, confusion_matrix, f1_binary, macro_f1, per_class_f1, roc_auc};
pub use report::{summary_markdown, write_reports};
pub use sweep::{grid_sweep, CellFailure, EmbeddingSource, SweepConfig, SweepOutcome};

#[derive(Error, Debug)]
pub enum EvalError {
    #[error("no predictions to evaluate")]
    Empty,
    #[error("{preds} predictions for {labels} labels")]
    LengthMismatch { preds: usize, labels: usize },
    #[error("class {class} out of range for {n_classes} classes")]
    ClassOutOfRange { class: usize, n_classes: usize },
    #[error("AUC undefined: labels contain a single class")]
    AucUndefined,
    #[error("scores contain NaN")]
    NanScore,
    #[error("invalid sweep config: {0}")]
    InvalidConfig(String),
    #[error("embedding stage for {metric}/{rule}: {message}")]
    Embedding { metric: DensityMetric, rule: ThresholdRule, message: String },
    #[error("split for seed {seed}: {message}")]
    Split { seed: u64, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = EvalError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Binary,
    Multiclass,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Binary => "binary",
            Task::Multiclass => "multiclass",
        })
    }
}

/// One table cell: a model variant fed by one input configuration. NF cells
/// carry no density metric or threshold rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellKey {
    pub input_mode: InputMode,
    pub metric: Option<DensityMetric>,
    pub threshold_rule: Option<ThresholdRule>,
    pub variant: Variant,
}

impl CellKey {
    /// Filesystem-safe identifier, e.g. `sage_rww_degree_half`.
    pub fn slug(&self) -> String {
        let mut s = format!("{}_{}", self.variant, self.input_mode.slug());
        if let Some(m) = self.metric {
            s.push('_');
            s.push_str(m.as_str());
        }
        if let Some(r) = self.threshold_rule {
            s.push('_');
            s.push_str(r.slug());
        }
        s
    }
}

impl fmt::Display for CellKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} + {}", self.variant, self.input_mode)?;
        if let (Some(m), Some(r)) = (self.metric, self.threshold_rule) {
            write!(f, "({m}, τ={r})")?;
        }
        Ok(())
    }
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        MeanStd { mean, std: var.sqrt() }
    }
}

impl fmt::Display for MeanStd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3} ± {:.3}", self.mean, self.std)
    }
}

/// Test-set results of one cell at its selected hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub task: Task,
    pub cell: CellKey,
    pub hidden_dim: usize,
    pub learning_rate: f64,
    pub seeds: Vec<u64>,
    pub class_names: Vec<String>,
    /// Binary tasks only.
    pub positive_class: Option<String>,
    /// Mean validation accuracy that selected the hyperparameters.
    pub val_accuracy: f64,
    pub accuracy: MeanStd,
    /// Binary F1 of the positive class.
    pub f1: Option<MeanStd>,
    pub macro_f1: Option<MeanStd>,
    /// Rows are true classes; summed over seeds.
    pub confusion: Vec<Vec<u64>>,
    /// Pooled over seeds; binary tasks only.
    pub roc_points: Vec<(f64, f64)>,
    pub auc: Option<f64>,
    /// Test graphs per seed.
    pub evaluated_graphs: usize,
}
