use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{PipelineError, Result};
use crate::density::DensityMetric;
use crate::graph::SplitFractions;
use crate::mpnn::{InputMode, Variant, HIDDEN_GRID, LEARNING_RATE_GRID};
use crate::walk::ThresholdRule;

/// Which labels a run classifies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    /// Class groups (the part of the class name before `/`).
    Binary,
    /// Subtypes within `multiclass_group`.
    Multiclass,
    /// Binary, restricted to graphs whose subtype is `news`.
    NewsBinary,
}

impl FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "binary" => Ok(TaskKind::Binary),
            "multiclass" | "multi" => Ok(TaskKind::Multiclass),
            "news_binary" | "news" => Ok(TaskKind::NewsBinary),
            other => Err(format!("unknown task '{other}' (expected binary, multiclass or news_binary)")),
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaskKind::Binary => "binary",
            TaskKind::Multiclass => "multiclass",
            TaskKind::NewsBinary => "news_binary",
        })
    }
}

/// Everything a pipeline run depends on. Parsed from a flat `key = value`
/// file; list-valued keys take comma-separated values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub dataset_root: PathBuf,
    pub output_dir: PathBuf,
    /// Defaults to `<output_dir>/cache`.
    pub cache_dir: Option<PathBuf>,
    pub task: TaskKind,
    pub multiclass_group: String,
    /// Class scored as positive in binary tasks. Defaults to `campaign` or
    /// `planted` when present, else the second class in sorted order.
    pub positive_class: Option<String>,
    pub density_metrics: Vec<DensityMetric>,
    pub truss_offset: bool,
    pub threshold_rules: Vec<ThresholdRule>,
    pub input_modes: Vec<InputMode>,
    pub variants: Vec<Variant>,
    pub hidden_dims: Vec<usize>,
    pub learning_rates: Vec<f64>,
    pub seeds: Vec<u64>,
    pub split: SplitFractions,
    pub walk_length: usize,
    pub walks_per_node: usize,
    /// Seeds walks and skip-gram training; shared by all model seeds.
    pub walk_seed: u64,
    pub embed_dim: usize,
    pub window_radius: usize,
    pub negatives: usize,
    pub embed_epochs: usize,
    pub embed_learning_rate: f64,
    pub embed_min_learning_rate: f64,
    /// Rotate each graph's embedding onto its principal axes before it is
    /// cached and used as model input.
    pub canonical_frame: bool,
    pub num_layers: usize,
    pub epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub class_weighting: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let sgns = crate::embed::SgnsConfig::default();
        let model = crate::mpnn::ModelConfig::default();
        let walk = crate::walk::WalkConfig::default();
        RunConfig {
            dataset_root: PathBuf::from("data"),
            output_dir: PathBuf::from("out"),
            cache_dir: None,
            task: TaskKind::Binary,
            multiclass_group: "campaign".into(),
            positive_class: None,
            density_metrics: DensityMetric::ALL.to_vec(),
            truss_offset: false,
            threshold_rules: ThresholdRule::ALL.to_vec(),
            input_modes: InputMode::ALL.to_vec(),
            variants: Variant::ALL.to_vec(),
            hidden_dims: HIDDEN_GRID.to_vec(),
            learning_rates: LEARNING_RATE_GRID.to_vec(),
            seeds: vec![1, 2, 3],
            split: SplitFractions::default(),
            walk_length: walk.walk_length,
            walks_per_node: walk.walks_per_node,
            walk_seed: 0,
            embed_dim: sgns.dim,
            window_radius: sgns.window_radius,
            negatives: sgns.negatives,
            embed_epochs: sgns.epochs,
            embed_learning_rate: sgns.learning_rate,
            embed_min_learning_rate: sgns.min_learning_rate,
            canonical_frame: true,
            num_layers: model.num_layers,
            epochs: model.epochs,
            patience: model.patience,
            batch_size: model.batch_size,
            class_weighting: model.class_weighting,
        }
    }
}

fn parse_one<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value.trim().parse::<T>().map_err(|e| PipelineError::Config(format!("{key}: {e}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    let items: Vec<&str> = value.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        return Err(PipelineError::Config(format!("{key}: empty list")));
    }
    items.into_iter().map(|v| parse_one(key, v)).collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        other => Err(PipelineError::Config(format!("{key}: expected a boolean, got '{other}'"))),
    }
}

impl RunConfig {
    /// Every accepted key, in documentation order.
    pub const KEYS: &'static [&'static str] = &[
        "dataset_root",
        "output_dir",
        "cache_dir",
        "task",
        "multiclass_group",
        "positive_class",
        "density_metric",
        "truss_offset",
        "threshold_rule",
        "input_mode",
        "variant",
        "hidden_dim",
        "learning_rate",
        "seeds",
        "split",
        "walk_length",
        "walks_per_node",
        "walk_seed",
        "embed_dim",
        "window_radius",
        "negatives",
        "embed_epochs",
        "embed_learning_rate",
        "embed_min_learning_rate",
        "canonical_frame",
        "num_layers",
        "epochs",
        "patience",
        "batch_size",
        "class_weighting",
    ];

    /// Parse `key = value` lines; `#` starts a comment. Keys not set keep
    /// their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(PipelineError::Config(format!("line {}: expected `key = value`", i + 1)));
            };
            cfg.set(key.trim(), value.trim())
                .map_err(|e| PipelineError::Config(format!("line {}: {}", i + 1, e)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("cannot read {}: {e}", path.display())))?;
        RunConfig::parse(&text)
    }

    /// Set one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "dataset_root" => self.dataset_root = PathBuf::from(value),
            "output_dir" => self.output_dir = PathBuf::from(value),
            "cache_dir" => self.cache_dir = Some(PathBuf::from(value)),
            "task" => self.task = parse_one(key, value)?,
            "multiclass_group" => self.multiclass_group = value.to_string(),
            "positive_class" => self.positive_class = Some(value.to_string()),
            "density_metric" | "density_metrics" => self.density_metrics = parse_list(key, value)?,
            "truss_offset" => self.truss_offset = parse_bool(key, value)?,
            "threshold_rule" | "threshold_rules" => self.threshold_rules = parse_list(key, value)?,
            "input_mode" | "input_modes" => self.input_modes = parse_list(key, value)?,
            "variant" | "variants" => self.variants = parse_list(key, value)?,
            "hidden_dim" | "hidden_dims" => self.hidden_dims = parse_list(key, value)?,
            "learning_rate" | "learning_rates" => self.learning_rates = parse_list(key, value)?,
            "seed" | "seeds" => self.seeds = parse_list(key, value)?,
            "split" => {
                let f: Vec<f64> = parse_list(key, value)?;
                let [train, val, test] = f[..] else {
                    return Err(PipelineError::Config("split: expected train,val,test".into()));
                };
                self.split = SplitFractions::new(train, val, test)
                    .map_err(|e| PipelineError::Config(format!("split: {e}")))?;
            }
            "walk_length" => self.walk_length = parse_one(key, value)?,
            "walks_per_node" => self.walks_per_node = parse_one(key, value)?,
            "walk_seed" => self.walk_seed = parse_one(key, value)?,
            "embed_dim" => self.embed_dim = parse_one(key, value)?,
            "window_radius" => self.window_radius = parse_one(key, value)?,
            "negatives" => self.negatives = parse_one(key, value)?,
            "embed_epochs" => self.embed_epochs = parse_one(key, value)?,
            "embed_learning_rate" => self.embed_learning_rate = parse_one(key, value)?,
            "embed_min_learning_rate" => self.embed_min_learning_rate = parse_one(key, value)?,
            "canonical_frame" => self.canonical_frame = parse_bool(key, value)?,
            "num_layers" => self.num_layers = parse_one(key, value)?,
            "epochs" => self.epochs = parse_one(key, value)?,
            "patience" => self.patience = parse_one(key, value)?,
            "batch_size" => self.batch_size = parse_one(key, value)?,
            "class_weighting" => self.class_weighting = parse_bool(key, value)?,
            other => return Err(PipelineError::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(PipelineError::Config(m.to_string()));
        if self.seeds.is_empty() {
            return bad("seeds must not be empty");
        }
        for (name, empty) in [
            ("density_metric", self.density_metrics.is_empty()),
            ("threshold_rule", self.threshold_rules.is_empty()),
            ("input_mode", self.input_modes.is_empty()),
            ("variant", self.variants.is_empty()),
            ("hidden_dim", self.hidden_dims.is_empty()),
            ("learning_rate", self.learning_rates.is_empty()),
        ] {
            if empty {
                return Err(PipelineError::Config(format!("{name} must not be empty")));
            }
        }
        self.walk_config(self.threshold_rules[0]).validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        self.sgns_config().validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        for &hidden_dim in &self.hidden_dims {
            for &learning_rate in &self.learning_rates {
                let m = crate::mpnn::ModelConfig { hidden_dim, learning_rate, ..self.model_base() };
                m.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
            }
        }
        self.split.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn cache_root(&self) -> PathBuf {
        self.cache_dir.clone().unwrap_or_else(|| self.output_dir.join("cache"))
    }

    pub fn walk_config(&self, rule: ThresholdRule) -> crate::walk::WalkConfig {
        crate::walk::WalkConfig {
            walk_length: self.walk_length,
            threshold_rule: rule,
            walks_per_node: self.walks_per_node,
            seed: self.walk_seed,
        }
    }

    pub fn sgns_config(&self) -> crate::embed::SgnsConfig {
        crate::embed::SgnsConfig {
            dim: self.embed_dim,
            window_radius: self.window_radius,
            negatives: self.negatives,
            epochs: self.embed_epochs,
            learning_rate: self.embed_learning_rate,
            min_learning_rate: self.embed_min_learning_rate,
            seed: self.walk_seed,
            parallel: false,
        }
    }

    /// Model settings shared by every grid point.
    pub fn model_base(&self) -> crate::mpnn::ModelConfig {
        crate::mpnn::ModelConfig {
            variant: self.variants[0],
            hidden_dim: self.hidden_dims[0],
            num_layers: self.num_layers,
            learning_rate: self.learning_rates[0],
            epochs: self.epochs,
            patience: self.patience,
            batch_size: self.batch_size,
            input_mode: self.input_modes[0],
            seed: self.seeds[0],
            class_weighting: self.class_weighting,
        }
    }
}
