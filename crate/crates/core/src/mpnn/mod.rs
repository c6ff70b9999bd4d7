//! Message-passing graph classifiers.
//!
//! Each layer aggregates neighbor states and updates the node state; a
//! rectifier follows every layer. Node states of the last layer are
//! mean-pooled into a graph vector that feeds an affine softmax head.
//!
//! | variant | layer update |
//! |---------|--------------|
//! | GCN  | `Â H W + b`, `Â = D̃^-1/2 (A + I) D̃^-1/2` |
//! | SAGE | `H W_self + mean_{N(v)}(H) W_neigh + b` |
//! | GIN  | `MLP((1 + ε) h_v + Σ_{N(v)} h_u)`, two-layer MLP, trainable ε |
//! | GAT  | `Σ_{u ∈ N(v) ∪ {v}} α_vu (W h_u) + b`, single additive attention head |
//!
//! Gradients are derived by hand; [`gradient_check_mpnn`] compares them with
//! central finite differences.

use std::fmt;
use std::str::FromStr;

use ndarray::{concatenate, Array2, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::EmbeddingMatrix;
use crate::Graph;

mod gradcheck;
mod io;
mod layers;
mod model;
mod train;

pub use gradcheck::{gradient_check_mpnn, GradCheckReport};
pub use io::{decode_model, encode_model, read_model, write_model, MODEL_MAGIC, MODEL_VERSION};
pub use layers::{Layer, Structure};
pub use model::Model;
pub use model::mean_pool;
pub use train::{predict_dataset, predict_dataset_with, train, train_with, EpochLog, Prediction, TrainOutcome};

#[derive(Error, Debug)]
pub enum MpnnError {
    #[error("input mode {mode} requires {missing}")]
    MissingInput { mode: InputMode, missing: &'static str },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("training split is empty")]
    EmptyTrainSplit,
    #[error("training split contains a single class ({0}); need at least two")]
    SingleClass(String),
    #[error("non-finite loss at epoch {epoch} (learning rate {learning_rate}); training aborted")]
    NonFiniteLoss { epoch: usize, learning_rate: f64 },
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = MpnnError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Gcn,
    Gat,
    Gin,
    Sage,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Gcn, Variant::Gat, Variant::Gin, Variant::Sage];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Gcn => "gcn",
            Variant::Gat => "gat",
            Variant::Gin => "gin",
            Variant::Sage => "sage",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Variant::Gcn => 0,
            Variant::Gat => 1,
            Variant::Gin => 2,
            Variant::Sage => 3,
        }
    }

    pub(crate) fn from_code(c: u8) -> Option<Self> {
        Variant::ALL.into_iter().find(|v| v.code() == c)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gcn" => Ok(Variant::Gcn),
            "gat" => Ok(Variant::Gat),
            "gin" => Ok(Variant::Gin),
            "sage" | "graphsage" => Ok(Variant::Sage),
            other => Err(format!("unknown variant '{other}' (expected gcn, gat, gin or sage)")),
        }
    }
}

/// Which node inputs the classifier sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum InputMode {
    /// Dataset node features only.
    #[serde(rename = "NF")]
    Nf,
    /// Walk embeddings only.
    #[serde(rename = "RWW")]
    Rww,
    /// Features and embeddings concatenated per node.
    #[serde(rename = "NF+RWW")]
    NfPlusRww,
}

impl InputMode {
    pub const ALL: [InputMode; 3] = [InputMode::Nf, InputMode::Rww, InputMode::NfPlusRww];

    pub fn as_str(self) -> &'static str {
        match self {
            InputMode::Nf => "NF",
            InputMode::Rww => "RWW",
            InputMode::NfPlusRww => "NF+RWW",
        }
    }

    pub fn slug(self) -> &'static str {
        match self {
            InputMode::Nf => "nf",
            InputMode::Rww => "rww",
            InputMode::NfPlusRww => "nf_rww",
        }
    }

    pub fn uses_embeddings(self) -> bool {
        self != InputMode::Nf
    }

    pub fn uses_features(self) -> bool {
        self != InputMode::Rww
    }
}

impl fmt::Display for InputMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InputMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace(' ', "").as_str() {
            "nf" => Ok(InputMode::Nf),
            "rww" => Ok(InputMode::Rww),
            "nf+rww" | "nf_plus_rww" | "nf_rww" => Ok(InputMode::NfPlusRww),
            other => Err(format!("unknown input mode '{other}' (expected NF, RWW or NF+RWW)")),
        }
    }
}

/// Hidden sizes searched by default.
pub const HIDDEN_GRID: [usize; 4] = [128, 256, 512, 1024];
/// Learning rates searched by default.
pub const LEARNING_RATE_GRID: [f64; 3] = [1e-3, 1e-4, 1e-5];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub variant: Variant,
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub batch_size: usize,
    pub input_mode: InputMode,
    pub seed: u64,
    /// Weight the loss of each class by the inverse of its training frequency.
    pub class_weighting: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            variant: Variant::Gcn,
            hidden_dim: HIDDEN_GRID[0],
            num_layers: 2,
            learning_rate: LEARNING_RATE_GRID[0],
            epochs: 200,
            patience: 20,
            batch_size: 32,
            input_mode: InputMode::Rww,
            seed: 0,
            class_weighting: false,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(MpnnError::InvalidConfig(m));
        if self.num_layers == 0 {
            return bad("num_layers must be at least 1".into());
        }
        if self.hidden_dim == 0 {
            return bad("hidden_dim must be at least 1".into());
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch_size must be at least 1".into());
        }
        Ok(())
    }
}

/// Node input matrix for one graph under `mode`.
pub fn build_inputs(g: &Graph, emb: Option<&EmbeddingMatrix>, mode: InputMode) -> Result<Array2<f64>> {
    let features = || {
        g.features().ok_or(MpnnError::MissingInput { mode, missing: "node features" })
    };
    let embedding = || {
        let e = emb.ok_or(MpnnError::MissingInput { mode, missing: "walk embeddings" })?;
        if e.node_count() != g.node_count() {
            return Err(MpnnError::Dimension(format!(
                "embedding has {} rows for a graph of {} nodes",
                e.node_count(),
                g.node_count()
            )));
        }
        Ok(&e.rows)
    };
    match mode {
        InputMode::Nf => Ok(features()?.clone()),
        InputMode::Rww => Ok(embedding()?.clone()),
        InputMode::NfPlusRww => {
            let (x, e) = (features()?, embedding()?);
            Ok(concatenate(Axis(1), &[x.view(), e.view()]).expect("row counts checked"))
        }
    }
}
