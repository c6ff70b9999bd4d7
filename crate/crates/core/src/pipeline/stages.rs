use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::cache::{self, Cache};
use super::{PipelineError, Result, RunConfig};
use crate::density::{density_profile_with, DensityMetric, DensityOptions, DensityProfile};
use crate::embed::{train_sgns, EmbedError, EmbeddingMatrix};
use crate::eval::{EmbeddingSource, EvalError};
use crate::walk::{generate_walks_with, ThresholdRule, WalkCorpus};
use crate::{Execution, LabeledGraphSet};

/// How many per-graph results of a stage were computed versus served from
/// the cache. A stage whose downstream result was cached counts as cached.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCount {
    pub computed: usize,
    pub cached: usize,
}

impl StageCount {
    pub fn status(&self) -> &'static str {
        match (self.computed, self.cached) {
            (0, _) => "cached",
            (_, 0) => "computed",
            _ => "partial",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageStats {
    pub stage: String,
    pub count: StageCount,
}

impl fmt::Display for StageStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} ({} computed, {} cached)",
            self.stage,
            self.count.status(),
            self.count.computed,
            self.count.cached
        )
    }
}

const STAGES: [&str; 3] = ["density", "walk", "embed"];

/// Density, walk and embedding stages over one dataset. Every per-graph
/// result is stored in the cache under a key that hashes the graph and all
/// upstream stage settings, so a result is recomputed only when something
/// it depends on changed.
pub struct Stages<'a> {
    exec: Execution,
    cfg: &'a RunConfig,
    data: &'a LabeledGraphSet,
    cache: Cache,
    graph_hashes: Vec<String>,
    stats: Mutex<BTreeMap<&'static str, StageCount>>,
    embeddings: Mutex<BTreeMap<(DensityMetric, ThresholdRule), Arc<Vec<EmbeddingMatrix>>>>,
}

#[derive(Default)]
struct Hits {
    density: Option<bool>,
    walk: Option<bool>,
    embed: Option<bool>,
}

impl<'a> Stages<'a> {
    pub fn new(exec: Execution, cfg: &'a RunConfig, data: &'a LabeledGraphSet) -> Self {
        let graph_hashes = exec.map(data.graphs(), |g| cache::graph_hash(g));
        Stages {
            exec,
            cfg,
            data,
            cache: Cache::new(cfg.cache_root()),
            graph_hashes,
            stats: Mutex::new(BTreeMap::new()),
            embeddings: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn graph_hashes(&self) -> &[String] {
        &self.graph_hashes
    }

    pub fn stats(&self) -> Vec<StageStats> {
        let stats = self.stats.lock().unwrap();
        STAGES
            .iter()
            .filter_map(|s| stats.get(s).map(|c| StageStats { stage: s.to_string(), count: *c }))
            .collect()
    }

    fn record(&self, hits: &[Hits]) {
        let mut stats = self.stats.lock().unwrap();
        for h in hits {
            for (stage, hit) in STAGES.into_iter().zip([h.density, h.walk, h.embed]) {
                if let Some(hit) = hit {
                    let c = stats.entry(stage).or_default();
                    if hit {
                        c.cached += 1;
                    } else {
                        c.computed += 1;
                    }
                }
            }
        }
    }

    fn failure(&self, stage: &'static str, i: usize, message: impl fmt::Display) -> PipelineError {
        PipelineError::Stage { stage, graph: Some(self.data.ids()[i].clone()), message: message.to_string() }
    }

    fn density_options(&self) -> DensityOptions {
        DensityOptions { truss_offset: self.cfg.truss_offset }
    }

    pub fn density_key(&self, i: usize, metric: DensityMetric) -> String {
        let tag = format!("{}|truss_offset={}", metric.as_str(), self.cfg.truss_offset);
        cache::stage_key(&["density", &self.graph_hashes[i], &tag])
    }

    pub fn walk_key(&self, i: usize, metric: DensityMetric, rule: ThresholdRule) -> String {
        let tag = serde_json::to_string(&self.cfg.walk_config(rule)).expect("walk config serializes");
        cache::stage_key(&["walk", &self.density_key(i, metric), &tag])
    }

    pub fn embed_key(&self, i: usize, metric: DensityMetric, rule: ThresholdRule) -> String {
        let tag = serde_json::to_string(&self.cfg.sgns_config()).expect("sgns config serializes");
        let frame = if self.cfg.canonical_frame { "canonical" } else { "raw" };
        cache::stage_key(&["embed", &self.walk_key(i, metric, rule), &tag, frame])
    }

    fn density_one(&self, i: usize, metric: DensityMetric, hits: &mut Hits) -> Result<DensityProfile> {
        let g = self.data.graph(i);
        let key = self.density_key(i, metric);
        if let Some(p) =
            self.cache.load("density", &key, "csv").and_then(|t| cache::decode_density(&t, metric, g.node_count()))
        {
            hits.density = Some(true);
            return Ok(p);
        }
        let p = density_profile_with(g, metric, self.density_options());
        self.cache
            .store("density", &key, "csv", &cache::encode_density(&p))
            .map_err(|e| self.failure("density", i, format!("writing cache: {e}")))?;
        hits.density = Some(false);
        Ok(p)
    }

    fn walks_one(&self, i: usize, metric: DensityMetric, rule: ThresholdRule, hits: &mut Hits) -> Result<WalkCorpus> {
        let g = self.data.graph(i);
        let key = self.walk_key(i, metric, rule);
        let graph_id = Some(self.data.ids()[i].clone());
        if let Some(walks) = self.cache.load("walk", &key, "txt").and_then(|t| cache::decode_walks(&t, g.node_count())) {
            hits.walk = Some(true);
            hits.density.get_or_insert(true);
            return Ok(WalkCorpus { graph_id, walks });
        }
        let profile = self.density_one(i, metric, hits)?;
        let mut corpus = generate_walks_with(Execution::Sequential, g, &profile, &self.cfg.walk_config(rule))
            .map_err(|e| self.failure("walk", i, e))?;
        corpus.graph_id = graph_id;
        self.cache
            .store("walk", &key, "txt", &cache::encode_walks(&corpus))
            .map_err(|e| self.failure("walk", i, format!("writing cache: {e}")))?;
        hits.walk = Some(false);
        Ok(corpus)
    }

    fn embed_one(&self, i: usize, metric: DensityMetric, rule: ThresholdRule, hits: &mut Hits) -> Result<EmbeddingMatrix> {
        let n = self.data.graph(i).node_count();
        let scfg = self.cfg.sgns_config();
        let key = self.embed_key(i, metric, rule);
        if let Some(e) = self
            .cache
            .load("embed", &key, "tsv")
            .and_then(|t| cache::decode_embedding(&t))
            .filter(|e| e.node_count() == n && e.dim() == scfg.dim)
        {
            hits.embed = Some(true);
            hits.walk.get_or_insert(true);
            hits.density.get_or_insert(true);
            return Ok(e);
        }
        let corpus = self.walks_one(i, metric, rule, hits)?;
        let e = match train_sgns(&corpus, n, &scfg) {
            Ok(e) if self.cfg.canonical_frame => e.canonical_frame(),
            Ok(e) => e,
            Err(EmbedError::CorpusTooShort) => {
                log::warn!("graph {} has no edges; using zero embeddings", self.data.ids()[i]);
                EmbeddingMatrix { rows: Array2::zeros((n, scfg.dim)), loss_history: Vec::new() }
            }
            Err(e) => return Err(self.failure("embed", i, e)),
        };
        self.cache
            .store("embed", &key, "tsv", &cache::encode_embedding(&e))
            .map_err(|e| self.failure("embed", i, format!("writing cache: {e}")))?;
        hits.embed = Some(false);
        Ok(e)
    }

    fn over_graphs<T: Send>(&self, f: impl Fn(usize, &mut Hits) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
        let idx: Vec<usize> = (0..self.data.len()).collect();
        let results = self.exec.try_map(&idx, |&i| {
            let mut hits = Hits::default();
            f(i, &mut hits).map(|v| (v, hits))
        })?;
        let (values, hits): (Vec<T>, Vec<Hits>) = results.into_iter().unzip();
        self.record(&hits);
        Ok(values)
    }

    /// Density profiles of every graph for `metric`.
    pub fn density(&self, metric: DensityMetric) -> Result<Vec<DensityProfile>> {
        self.over_graphs(|i, h| self.density_one(i, metric, h))
    }

    /// Walk corpora of every graph for `metric` and `rule`.
    pub fn walks(&self, metric: DensityMetric, rule: ThresholdRule) -> Result<Vec<WalkCorpus>> {
        self.over_graphs(|i, h| self.walks_one(i, metric, rule, h))
    }

    /// Skip-gram embeddings of every graph for `metric` and `rule`, kept in
    /// memory after the first call. A graph whose walks contain no context
    /// pairs (it has no edges) gets all-zero rows. With `canonical_frame` set
    /// the rows are stored in each graph's principal-axis frame.
    pub fn embeddings(&self, metric: DensityMetric, rule: ThresholdRule) -> Result<Arc<Vec<EmbeddingMatrix>>> {
        if let Some(v) = self.embeddings.lock().unwrap().get(&(metric, rule)) {
            return Ok(Arc::clone(v));
        }
        let out = Arc::new(self.over_graphs(|i, h| self.embed_one(i, metric, rule, h))?);
        self.embeddings.lock().unwrap().insert((metric, rule), Arc::clone(&out));
        Ok(out)
    }

    /// Embedding cache keys per (metric, rule) computed so far; each key
    /// covers the whole upstream chain.
    pub fn embedding_keys(&self) -> BTreeMap<String, Vec<String>> {
        let done: Vec<(DensityMetric, ThresholdRule)> = self.embeddings.lock().unwrap().keys().copied().collect();
        done.into_iter()
            .map(|(m, r)| {
                let keys = (0..self.data.len()).map(|i| self.embed_key(i, m, r)).collect();
                (format!("{m}/{}", r.slug()), keys)
            })
            .collect()
    }
}

impl EmbeddingSource for Stages<'_> {
    fn embeddings(&self, metric: DensityMetric, rule: ThresholdRule) -> crate::eval::Result<Arc<Vec<EmbeddingMatrix>>> {
        Stages::embeddings(self, metric, rule).map_err(|e| EvalError::Embedding { metric, rule, message: e.to_string() })
    }
}
