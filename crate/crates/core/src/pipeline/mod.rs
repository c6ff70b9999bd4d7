//! End-to-end runs: load, density, walks, embeddings, training and
//! evaluation, with per-graph stage results cached by content hash.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::Serialize;
use thiserror::Error;

use crate::eval::{self, grid_sweep, write_reports, SweepConfig, SweepOutcome, Task};
use crate::fsutil::write_atomic;
use crate::graph::{layout_violations, load_dataset, stratified_split};
use crate::mpnn::{self, build_inputs, read_model, write_model, Model, ModelConfig, TrainOutcome};
use crate::{Execution, LabeledGraphSet, Split};

pub mod cache;
mod config;
mod stages;

pub use config::{RunConfig, TaskKind};
pub use stages::{StageCount, StageStats, Stages};

#[derive(Error, Debug)]
pub enum PipelineError {
    /// Bad configuration, detected before any computation.
    #[error("{0}")]
    Config(String),
    #[error("stage {stage} failed{}: {message}", graph.as_ref().map(|g| format!(" on graph {g}")).unwrap_or_default())]
    Stage { stage: &'static str, graph: Option<String>, message: String },
    #[error("dataset layout has {} violation(s):\n  {}", .0.len(), .0.join("\n  "))]
    Layout(Vec<String>),
}

impl PipelineError {
    /// 1 for configuration errors, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 1,
            _ => 2,
        }
    }

    fn stage(stage: &'static str, message: impl fmt::Display) -> Self {
        PipelineError::Stage { stage, graph: None, message: message.to_string() }
    }
}

pub type Result<T, E = PipelineError> = std::result::Result<T, E>;

fn split_class(name: &str) -> (&str, Option<&str>) {
    match name.split_once('/') {
        Some((group, sub)) => (group, Some(sub)),
        None => (name, None),
    }
}

/// Relabel `data` for `cfg.task`. Class names of the form `group/subtype`
/// are split; binary tasks use the group, multiclass uses the subtypes of
/// `multiclass_group`. Without any `/` in the names, multiclass keeps them
/// unchanged.
pub fn prepare_task(data: &LabeledGraphSet, cfg: &RunConfig) -> Result<LabeledGraphSet> {
    let structured = data.class_names().iter().any(|c| c.contains('/'));
    let mapped = match cfg.task {
        TaskKind::Binary => data.remap_classes(|c| Some(split_class(c).0.to_string())),
        TaskKind::NewsBinary => data.remap_classes(|c| match split_class(c) {
            (group, Some("news")) => Some(group.to_string()),
            _ => None,
        }),
        TaskKind::Multiclass if structured => data.remap_classes(|c| match split_class(c) {
            (group, Some(sub)) if group == cfg.multiclass_group => Some(sub.to_string()),
            _ => None,
        }),
        TaskKind::Multiclass => Ok(data.clone()),
    }
    .map_err(|e| PipelineError::stage("task", e))?;
    if mapped.class_count() < 2 {
        return Err(PipelineError::stage(
            "task",
            format!("task {} leaves {} class(es): {:?}", cfg.task, mapped.class_count(), mapped.class_names()),
        ));
    }
    if matches!(cfg.task, TaskKind::Binary | TaskKind::NewsBinary) && mapped.class_count() != 2 {
        return Err(PipelineError::stage(
            "task",
            format!("binary task needs two classes, found {:?}", mapped.class_names()),
        ));
    }
    Ok(mapped)
}

/// Index of the positive class for binary tasks.
pub fn positive_class(data: &LabeledGraphSet, cfg: &RunConfig) -> Result<usize> {
    let names = data.class_names();
    if let Some(p) = &cfg.positive_class {
        return names
            .iter()
            .position(|c| c == p)
            .ok_or_else(|| PipelineError::stage("task", format!("positive_class '{p}' not among {names:?}")));
    }
    Ok(["campaign", crate::graph::PLANTED_CLASS]
        .iter()
        .find_map(|want| names.iter().position(|c| c == want))
        .unwrap_or(1))
}

fn eval_task(kind: TaskKind) -> Task {
    match kind {
        TaskKind::Multiclass => Task::Multiclass,
        _ => Task::Binary,
    }
}

pub fn sweep_config(cfg: &RunConfig, data: &LabeledGraphSet) -> Result<SweepConfig> {
    let task = eval_task(cfg.task);
    Ok(SweepConfig {
        task,
        positive_class: if task == Task::Binary { Some(positive_class(data, cfg)?) } else { None },
        metrics: cfg.density_metrics.clone(),
        threshold_rules: cfg.threshold_rules.clone(),
        input_modes: cfg.input_modes.clone(),
        variants: cfg.variants.clone(),
        hidden_dims: cfg.hidden_dims.clone(),
        learning_rates: cfg.learning_rates.clone(),
        seeds: cfg.seeds.clone(),
        base: cfg.model_base(),
        resplit: Some(cfg.split),
    })
}

/// Load the dataset and apply the task mapping.
pub fn load_for_task(cfg: &RunConfig) -> Result<LabeledGraphSet> {
    let data = load_dataset(&cfg.dataset_root).map_err(|e| PipelineError::stage("load", e))?;
    prepare_task(&data, cfg)
}

#[derive(Debug, Serialize)]
struct ManifestGraph<'a> {
    id: &'a str,
    class: &'a str,
    content_sha256: &'a str,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool_version: &'static str,
    config: &'a RunConfig,
    seeds: &'a [u64],
    walk_seed: u64,
    dataset_sha256: String,
    graphs: Vec<ManifestGraph<'a>>,
    embedding_cache_keys: BTreeMap<String, Vec<String>>,
    report_sha256: String,
}

/// Result of [`run_pipeline`].
#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub sweep: SweepOutcome,
    pub stages: Vec<StageStats>,
    pub output_dir: PathBuf,
}

/// `graph_id<TAB>node<TAB>original_id` for every node.
fn idmap_tsv(data: &LabeledGraphSet) -> String {
    let mut s = String::from("graph_id\tnode\toriginal_id\n");
    for (id, g) in data.ids().iter().zip(data.graphs()) {
        for (v, orig) in g.original_ids().iter().enumerate() {
            let _ = writeln!(s, "{id}\t{v}\t{orig}");
        }
    }
    s
}

fn write_out(path: &Path, bytes: &[u8]) -> Result<()> {
    write_atomic(path, bytes).map_err(|e| PipelineError::stage("report", format!("{}: {e}", path.display())))
}

/// Run every stage for `cfg` and write `report.json`, `summary.md`, the
/// per-cell CSVs, `idmap.tsv` and `run_manifest.json` to the output
/// directory.
pub fn run_pipeline(cfg: &RunConfig, exec: Execution) -> Result<PipelineOutcome> {
    cfg.validate()?;
    let data = load_for_task(cfg)?;
    let sweep_cfg = sweep_config(cfg, &data)?;
    log::info!("loaded {} graphs, classes {:?}", data.len(), data.class_names());

    let stages = Stages::new(exec, cfg, &data);
    if cfg.input_modes.iter().any(|m| m.uses_embeddings()) {
        for &metric in &cfg.density_metrics {
            for &rule in &cfg.threshold_rules {
                stages.embeddings(metric, rule)?;
            }
        }
    }
    for s in stages.stats() {
        log::info!("stage {s}");
    }

    let sweep = grid_sweep(exec, &data, &sweep_cfg, &stages).map_err(|e| match e {
        eval::EvalError::InvalidConfig(m) => PipelineError::Config(m),
        other => PipelineError::stage("train", other),
    })?;
    for f in &sweep.failures {
        log::warn!("cell {} failed: {}", f.cell, f.message);
    }

    let out = &cfg.output_dir;
    write_reports(&sweep, out).map_err(|e| PipelineError::stage("report", e))?;
    write_out(&out.join("idmap.tsv"), idmap_tsv(&data).as_bytes())?;

    let report_bytes =
        std::fs::read(out.join("report.json")).map_err(|e| PipelineError::stage("report", e))?;
    let graphs: Vec<ManifestGraph> = (0..data.len())
        .map(|i| ManifestGraph {
            id: &data.ids()[i],
            class: &data.class_names()[data.labels()[i]],
            content_sha256: &stages.graph_hashes()[i],
        })
        .collect();
    let dataset_parts: Vec<&str> =
        graphs.iter().flat_map(|g| [g.id, g.class, g.content_sha256]).collect();
    let manifest = Manifest {
        tool_version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        seeds: &cfg.seeds,
        walk_seed: cfg.walk_seed,
        dataset_sha256: cache::stage_key(&dataset_parts),
        graphs,
        embedding_cache_keys: stages.embedding_keys(),
        report_sha256: cache::sha256_hex(&report_bytes),
    };
    let mut json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    json.push(b'\n');
    write_out(&out.join("run_manifest.json"), &json)?;

    Ok(PipelineOutcome { sweep, stages: stages.stats(), output_dir: out.clone() })
}

/// Per-graph inputs of the first configured input mode, metric and rule.
pub fn single_inputs(cfg: &RunConfig, data: &LabeledGraphSet, stages: &Stages) -> Result<Vec<Array2<f64>>> {
    let mode = cfg.input_modes[0];
    let emb = if mode.uses_embeddings() {
        Some(stages.embeddings(cfg.density_metrics[0], cfg.threshold_rules[0])?)
    } else {
        None
    };
    (0..data.len())
        .map(|i| {
            build_inputs(data.graph(i), emb.as_ref().map(|e| &e[i]), mode).map_err(|e| PipelineError::Stage {
                stage: "inputs",
                graph: Some(data.ids()[i].clone()),
                message: e.to_string(),
            })
        })
        .collect()
}

/// Model settings for a single run: the first value of every grid and the
/// first seed.
pub fn single_model_config(cfg: &RunConfig) -> ModelConfig {
    cfg.model_base()
}

/// Train one model with [`single_model_config`] on the split drawn with the
/// first seed; writes `model.bin` and `train_log.csv`.
pub fn train_single(cfg: &RunConfig, exec: Execution) -> Result<TrainOutcome> {
    cfg.validate()?;
    let data = load_for_task(cfg)?;
    let data = stratified_split(&data, cfg.split, cfg.seeds[0]).map_err(|e| PipelineError::stage("split", e))?;
    let stages = Stages::new(exec, cfg, &data);
    let inputs = single_inputs(cfg, &data, &stages)?;
    let out = mpnn::train_with(exec, &single_model_config(cfg), &data, &inputs)
        .map_err(|e| PipelineError::stage("train", e))?;
    let dir = &cfg.output_dir;
    write_model(&out.model, &dir.join("model.bin")).map_err(|e| PipelineError::stage("train", e))?;
    let mut log = String::from("epoch,train_loss,val_loss\n");
    for e in &out.log {
        let _ = writeln!(log, "{},{},{}", e.epoch, e.train_loss, e.val_loss);
    }
    write_out(&dir.join("train_log.csv"), log.as_bytes())?;
    Ok(out)
}

/// Evaluate a saved model on the test split drawn with the first seed and
/// write the report files for that single cell.
pub fn evaluate_model(cfg: &RunConfig, model_path: &Path, exec: Execution) -> Result<SweepOutcome> {
    cfg.validate()?;
    let model: Model = read_model(model_path).map_err(|e| PipelineError::stage("eval", e))?;
    let data = load_for_task(cfg)?;
    let data = stratified_split(&data, cfg.split, cfg.seeds[0]).map_err(|e| PipelineError::stage("split", e))?;
    if model.class_count() != data.class_count() {
        return Err(PipelineError::stage(
            "eval",
            format!("model has {} classes, dataset has {}", model.class_count(), data.class_count()),
        ));
    }
    let stages = Stages::new(exec, cfg, &data);
    let inputs = single_inputs(cfg, &data, &stages)?;
    let test = data.indices_in(Split::Test);
    if test.is_empty() {
        return Err(PipelineError::stage("eval", "test split is empty"));
    }
    let preds = mpnn::predict_dataset_with(exec, &model, &data, &inputs, &test)
        .map_err(|e| PipelineError::stage("eval", e))?;
    let labels: Vec<usize> = test.iter().map(|&i| data.labels()[i]).collect();
    let pred_labels: Vec<usize> = preds.iter().map(|p| p.label).collect();
    let task = eval_task(cfg.task);
    let n = data.class_count();
    let stage_err = |e: eval::EvalError| PipelineError::stage("eval", e);
    let confusion = eval::confusion_matrix(&pred_labels, &labels, n).map_err(stage_err)?;
    let acc = eval::accuracy(&pred_labels, &labels).map_err(stage_err)?;
    let one = |v: f64| eval::MeanStd { mean: v, std: 0.0 };
    let mode = cfg.input_modes[0];
    let cell = eval::CellKey {
        input_mode: mode,
        metric: mode.uses_embeddings().then_some(cfg.density_metrics[0]),
        threshold_rule: mode.uses_embeddings().then_some(cfg.threshold_rules[0]),
        variant: model.variant,
    };
    let mut report = eval::MetricsReport {
        task,
        cell,
        hidden_dim: model.hidden_dim(),
        learning_rate: cfg.learning_rates[0],
        seeds: vec![cfg.seeds[0]],
        class_names: data.class_names().to_vec(),
        positive_class: None,
        val_accuracy: f64::NAN,
        accuracy: one(acc),
        f1: None,
        macro_f1: None,
        confusion,
        roc_points: Vec::new(),
        auc: None,
        evaluated_graphs: test.len(),
    };
    match task {
        Task::Binary => {
            let p = positive_class(&data, cfg)?;
            report.positive_class = Some(data.class_names()[p].clone());
            report.f1 = Some(one(eval::f1_binary(&pred_labels, &labels, p).map_err(stage_err)?));
            let scores: Vec<f64> = preds.iter().map(|q| q.probabilities[p]).collect();
            let positives: Vec<bool> = labels.iter().map(|&l| l == p).collect();
            if let Ok((pts, auc)) = eval::roc_auc(&scores, &positives) {
                report.roc_points = pts;
                report.auc = Some(auc);
            }
        }
        Task::Multiclass => {
            report.macro_f1 = Some(one(eval::macro_f1(&pred_labels, &labels, n).map_err(stage_err)?));
        }
    }
    // Validation accuracy is not part of a stand-alone evaluation.
    report.val_accuracy = 0.0;
    let outcome = SweepOutcome { reports: vec![report], failures: Vec::new() };
    write_reports(&outcome, &cfg.output_dir).map_err(|e| PipelineError::stage("report", e))?;
    Ok(outcome)
}

/// Per-class size statistics of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassStats {
    pub class: String,
    pub graphs: usize,
    pub nodes_min: usize,
    pub nodes_max: usize,
    pub nodes_avg: f64,
    pub edges_min: usize,
    pub edges_max: usize,
    pub edges_avg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetSummary {
    /// One row per class name, then one per group when names carry a
    /// `group/subtype` structure, then `overall`.
    pub rows: Vec<ClassStats>,
}

impl fmt::Display for DatasetSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<28} {:>6} {:>9} {:>9} {:>11} {:>9} {:>9} {:>11}",
            "class", "graphs", "nodes_min", "nodes_max", "nodes_avg", "edges_min", "edges_max", "edges_avg"
        )?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<28} {:>6} {:>9} {:>9} {:>11.1} {:>9} {:>9} {:>11.1}",
                r.class, r.graphs, r.nodes_min, r.nodes_max, r.nodes_avg, r.edges_min, r.edges_max, r.edges_avg
            )?;
        }
        Ok(())
    }
}

fn class_stats(class: String, sizes: &[(usize, usize)]) -> ClassStats {
    let n = sizes.len().max(1) as f64;
    ClassStats {
        class,
        graphs: sizes.len(),
        nodes_min: sizes.iter().map(|s| s.0).min().unwrap_or(0),
        nodes_max: sizes.iter().map(|s| s.0).max().unwrap_or(0),
        nodes_avg: sizes.iter().map(|s| s.0 as f64).sum::<f64>() / n,
        edges_min: sizes.iter().map(|s| s.1).min().unwrap_or(0),
        edges_max: sizes.iter().map(|s| s.1).max().unwrap_or(0),
        edges_avg: sizes.iter().map(|s| s.1 as f64).sum::<f64>() / n,
    }
}

pub fn summarize_dataset(data: &LabeledGraphSet) -> DatasetSummary {
    let mut by_class: BTreeMap<String, Vec<(usize, usize)>> = BTreeMap::new();
    let mut by_group: BTreeMap<String, Vec<(usize, usize)>> = BTreeMap::new();
    let mut all = Vec::new();
    for (g, &l) in data.graphs().iter().zip(data.labels()) {
        let size = (g.node_count(), g.edge_count());
        let name = &data.class_names()[l];
        by_class.entry(name.clone()).or_default().push(size);
        by_group.entry(split_class(name).0.to_string()).or_default().push(size);
        all.push(size);
    }
    let mut rows: Vec<ClassStats> = by_class.into_iter().map(|(c, s)| class_stats(c, &s)).collect();
    if data.class_names().iter().any(|c| c.contains('/')) {
        rows.extend(by_group.into_iter().map(|(c, s)| class_stats(format!("{c} (all)"), &s)));
    }
    rows.push(class_stats("overall".into(), &all));
    DatasetSummary { rows }
}

/// Check the layout under `root`, listing every violation, then summarize.
pub fn validate_dataset(root: &Path) -> Result<DatasetSummary> {
    let violations = layout_violations(root);
    if !violations.is_empty() {
        return Err(PipelineError::Layout(violations.iter().map(ToString::to_string).collect()));
    }
    let data = load_dataset(root).map_err(|e| PipelineError::stage("load", e))?;
    for g in data.graphs() {
        if let Err(e) = g.check_invariants() {
            return Err(PipelineError::stage("load", e));
        }
    }
    Ok(summarize_dataset(&data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::DensityMetric;
    use crate::graph::{generate_synthetic, write_dataset, GeneratorConfig, Graph};
    use crate::mpnn::{InputMode, Variant};
    use crate::walk::ThresholdRule;

    fn small_config(root: &Path, out: &Path) -> RunConfig {
        RunConfig {
            dataset_root: root.to_path_buf(),
            output_dir: out.to_path_buf(),
            density_metrics: vec![DensityMetric::Core],
            threshold_rules: vec![ThresholdRule::FixedHalf],
            input_modes: vec![InputMode::Rww],
            variants: vec![Variant::Gcn],
            hidden_dims: vec![16],
            learning_rates: vec![1e-2],
            seeds: vec![1],
            walk_length: 10,
            walks_per_node: 2,
            embed_dim: 8,
            embed_epochs: 2,
            epochs: 20,
            patience: 5,
            ..RunConfig::default()
        }
    }

    fn synthetic_root() -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        let data = generate_synthetic(&GeneratorConfig {
            graphs_per_class: 8,
            node_count_range: 20..=24,
            ..GeneratorConfig::default()
        })
        .unwrap();
        write_dataset(&data, dir.path()).unwrap();
        dir
    }

    #[test]
    fn second_run_is_served_from_cache_and_identical() {
        let root = synthetic_root();
        let out = tempfile::tempdir().unwrap();
        let cfg = small_config(root.path(), out.path());
        let first = run_pipeline(&cfg, Execution::Sequential).unwrap();
        assert!(first.stages.iter().all(|s| s.count.status() == "computed"), "{:?}", first.stages);
        let report1 = std::fs::read(out.path().join("report.json")).unwrap();
        let manifest1 = std::fs::read(out.path().join("run_manifest.json")).unwrap();

        let second = run_pipeline(&cfg, Execution::Sequential).unwrap();
        assert!(second.stages.iter().all(|s| s.count.status() == "cached"), "{:?}", second.stages);
        assert_eq!(std::fs::read(out.path().join("report.json")).unwrap(), report1);
        assert_eq!(std::fs::read(out.path().join("run_manifest.json")).unwrap(), manifest1);
        assert!(out.path().join("idmap.tsv").exists());
        assert!(out.path().join("roc_gcn_rww_core_half.csv").exists());
    }

    #[test]
    fn corrupt_entry_is_recomputed() {
        let root = synthetic_root();
        let out = tempfile::tempdir().unwrap();
        let cfg = small_config(root.path(), out.path());
        let first = run_pipeline(&cfg, Execution::Sequential).unwrap();
        let embed_dir = cfg.cache_root().join("embed");
        let victim = std::fs::read_dir(&embed_dir).unwrap().next().unwrap().unwrap().path();
        std::fs::write(&victim, "garbage\n").unwrap();
        let second = run_pipeline(&cfg, Execution::Sequential).unwrap();
        let embed = second.stages.iter().find(|s| s.stage == "embed").unwrap();
        assert_eq!(embed.count, StageCount { computed: 1, cached: 15 });
        assert_eq!(second.sweep, first.sweep);
    }

    #[test]
    fn changing_walk_settings_keeps_density_cache() {
        let root = synthetic_root();
        let out = tempfile::tempdir().unwrap();
        let mut cfg = small_config(root.path(), out.path());
        cfg.input_modes = vec![InputMode::Rww];
        run_pipeline(&cfg, Execution::Sequential).unwrap();
        cfg.walk_length = 12;
        let run = run_pipeline(&cfg, Execution::Sequential).unwrap();
        let status: Vec<&str> = run.stages.iter().map(|s| s.count.status()).collect();
        assert_eq!(status, ["cached", "computed", "computed"]);
    }

    fn named(entries: &[(&str, &str)]) -> LabeledGraphSet {
        LabeledGraphSet::from_named(
            entries
                .iter()
                .map(|(id, class)| (id.to_string(), Graph::from_edges(2, [(0, 1)]).unwrap(), class.to_string()))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn task_mapping() {
        let data = named(&[
            ("a", "campaign/news"),
            ("b", "campaign/politics"),
            ("c", "non-campaign/news"),
            ("d", "non-campaign/sports"),
        ]);
        let mut cfg = RunConfig::default();
        let binary = prepare_task(&data, &cfg).unwrap();
        assert_eq!(binary.class_names(), ["campaign", "non-campaign"]);
        assert_eq!(binary.len(), 4);
        assert_eq!(positive_class(&binary, &cfg).unwrap(), 0);

        cfg.task = TaskKind::NewsBinary;
        let news = prepare_task(&data, &cfg).unwrap();
        assert_eq!(news.ids(), ["a", "c"]);

        cfg.task = TaskKind::Multiclass;
        let multi = prepare_task(&data, &cfg).unwrap();
        assert_eq!(multi.class_names(), ["news", "politics"]);

        cfg.multiclass_group = "nope".into();
        assert!(matches!(prepare_task(&data, &cfg), Err(PipelineError::Stage { stage: "task", .. })));
    }

    #[test]
    fn layout_problems_are_listed() {
        let dir = tempfile::tempdir().unwrap();
        let err = validate_dataset(dir.path()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(matches!(err, PipelineError::Layout(v) if !v.is_empty()));

        let root = synthetic_root();
        let summary = validate_dataset(root.path()).unwrap();
        assert_eq!(summary.rows.last().unwrap().graphs, 16);
        assert_eq!(summary.rows.last().unwrap().class, "overall");
    }
}
