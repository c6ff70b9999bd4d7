use std::collections::HashSet;
use std::ops::RangeInclusive;

use ndarray::Array2;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Graph, GraphError, LabeledGraphSet, Result};
use crate::Execution;

pub const BACKGROUND_CLASS: &str = "background";
pub const PLANTED_CLASS: &str = "planted";

/// Parameters of the planted dense-core generator.
///
/// Class `planted` graphs get an Erdős–Rényi core over
/// `dense_core_fraction` of their nodes on top of the sparse background;
/// class `background` graphs are background only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub graphs_per_class: usize,
    pub node_count_range: RangeInclusive<usize>,
    pub dense_core_fraction: f64,
    pub intra_core_edge_prob: f64,
    pub background_edge_prob: f64,
    /// Width of the uninformative node features written alongside.
    pub feature_dim: usize,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            graphs_per_class: 60,
            node_count_range: 90..=110,
            dense_core_fraction: 0.3,
            intra_core_edge_prob: 0.5,
            background_edge_prob: 0.01,
            feature_dim: 4,
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(GraphError::InvalidConfig(m));
        if self.node_count_range.is_empty() {
            return bad(format!("empty node count range {:?}", self.node_count_range));
        }
        for (name, p) in [
            ("dense_core_fraction", self.dense_core_fraction),
            ("intra_core_edge_prob", self.intra_core_edge_prob),
            ("background_edge_prob", self.background_edge_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} is outside [0, 1]"));
            }
        }
        if self.dense_core_fraction <= 0.0 {
            return bad("dense_core_fraction must be positive for the planted class".into());
        }
        if self.intra_core_edge_prob <= self.background_edge_prob {
            return bad(format!(
                "intra_core_edge_prob ({}) must exceed background_edge_prob ({})",
                self.intra_core_edge_prob, self.background_edge_prob
            ));
        }
        if self.graphs_per_class == 0 {
            return bad("graphs_per_class must be positive".into());
        }
        Ok(())
    }
}

fn graph_rng(seed: u64, class: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((class << 32) | index);
    rng
}

fn planted_graph(cfg: &GeneratorConfig, planted: bool, index: usize) -> Result<Graph> {
    let mut rng = graph_rng(cfg.seed, planted as u64, index as u64);
    let n = rng.random_range(cfg.node_count_range.clone());
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < cfg.background_edge_prob {
                edges.push((u, v));
            }
        }
    }
    if planted {
        let core_size = ((cfg.dense_core_fraction * n as f64).round() as usize).clamp(1, n);
        let mut core = index::sample(&mut rng, n, core_size).into_vec();
        core.sort_unstable();
        for (i, &u) in core.iter().enumerate() {
            for &v in &core[i + 1..] {
                if rng.random::<f64>() < cfg.intra_core_edge_prob {
                    edges.push((u, v));
                }
            }
        }
    }
    let g = Graph::from_edges(n, edges)?;
    let x = Array2::from_shape_fn((n, cfg.feature_dim), |_| rng.random_range(-1.0..1.0));
    g.with_features(x)
}

/// Generate a balanced two-class dataset. Graph ids are
/// `background-NNN` / `planted-NNN`; all graphs start in the train split.
pub fn generate_synthetic(cfg: &GeneratorConfig) -> Result<LabeledGraphSet> {
    cfg.validate()?;
    let jobs: Vec<(bool, usize)> = [false, true]
        .into_iter()
        .flat_map(|p| (0..cfg.graphs_per_class).map(move |i| (p, i)))
        .collect();
    let graphs = Execution::default().try_map(&jobs, |&(planted, i)| planted_graph(cfg, planted, i))?;
    let entries = jobs
        .into_iter()
        .zip(graphs)
        .map(|((planted, i), g)| {
            let class = if planted { PLANTED_CLASS } else { BACKGROUND_CLASS };
            (format!("{class}-{i:03}"), g, class.to_string())
        })
        .collect();
    LabeledGraphSet::from_named(entries)
}

/// A large sparse graph with exactly `edge_count` edges: a dense core of up
/// to 256 nodes (edge probability 0.5) for triangle-rich structure, the rest
/// uniform random pairs.
pub fn generate_scale_graph(node_count: usize, edge_count: usize, seed: u64) -> Result<Graph> {
    let max_edges = node_count * node_count.saturating_sub(1) / 2;
    if edge_count > max_edges {
        return Err(GraphError::InvalidConfig(format!(
            "{edge_count} edges do not fit in a simple graph on {node_count} nodes"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen: HashSet<(usize, usize)> = HashSet::with_capacity(edge_count);
    let core = node_count.min(256);
    'core: for u in 0..core {
        for v in u + 1..core {
            if seen.len() == edge_count {
                break 'core;
            }
            if rng.random::<f64>() < 0.5 {
                seen.insert((u, v));
            }
        }
    }
    while seen.len() < edge_count {
        let u = rng.random_range(0..node_count);
        let v = rng.random_range(0..node_count);
        if u != v {
            seen.insert((u.min(v), u.max(v)));
        }
    }
    let mut edges: Vec<_> = seen.into_iter().collect();
    edges.sort_unstable();
    Graph::from_edges(node_count, edges)
}
