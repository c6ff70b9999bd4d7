//! Graph representation, labeled graph collections, dataset IO and the
//! synthetic planted-density generator.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::sync::Arc;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

mod io;
mod split;
mod synth;

pub use io::{layout_violations, load_dataset, write_dataset};
pub use split::{stratified_split, SplitFractions};
pub use synth::{generate_scale_graph, generate_synthetic, GeneratorConfig, BACKGROUND_CLASS, PLANTED_CLASS};

#[derive(Error, Debug)]
pub enum GraphError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("no graphs found under {0}")]
    NoGraphs(PathBuf),
    #[error("graph {0} has no entry in labels.json")]
    MissingLabel(String),
    #[error("graph {0} is listed in labels.json but has no edges.tsv")]
    MissingEdges(String),
    #[error("malformed line {line} in {path}: {reason}")]
    Malformed {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("graph {graph}: node {node} appears in edges but not in features.csv")]
    NodeWithoutFeatures { graph: String, node: u64 },
    #[error("node id {node} out of range for graph with {node_count} nodes")]
    NodeOutOfRange { node: usize, node_count: usize },
    #[error("feature matrix has {rows} rows but graph has {node_count} nodes")]
    FeatureShape { rows: usize, node_count: usize },
    #[error("invalid labeled set: {0}")]
    InvalidSet(String),
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("invalid split: {0}")]
    InvalidSplit(String),
}

pub type Result<T, E = GraphError> = std::result::Result<T, E>;

/// Immutable undirected simple graph with contiguous node ids.
///
/// Adjacency is stored in CSR form with every neighbor list sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    features: Option<Array2<f64>>,
    original_ids: Vec<u64>,
}

impl Graph {
    /// Build from an arbitrary edge list. Edges are symmetrized, duplicates
    /// collapse and self-loops are dropped.
    pub fn from_edges<I>(node_count: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut pairs = Vec::new();
        for (u, v) in edges {
            for node in [u, v] {
                if node >= node_count {
                    return Err(GraphError::NodeOutOfRange { node, node_count });
                }
            }
            if u != v {
                pairs.push((u, v));
                pairs.push((v, u));
            }
        }
        pairs.sort_unstable();
        pairs.dedup();

        let mut offsets = vec![0usize; node_count + 1];
        for &(u, _) in &pairs {
            offsets[u + 1] += 1;
        }
        for i in 0..node_count {
            offsets[i + 1] += offsets[i];
        }
        let targets = pairs.into_iter().map(|(_, v)| v).collect();
        Ok(Graph {
            offsets,
            targets,
            features: None,
            original_ids: (0..node_count as u64).collect(),
        })
    }

    pub fn with_features(mut self, features: Array2<f64>) -> Result<Self> {
        if features.nrows() != self.node_count() {
            return Err(GraphError::FeatureShape {
                rows: features.nrows(),
                node_count: self.node_count(),
            });
        }
        self.features = Some(features);
        Ok(self)
    }

    pub(crate) fn with_original_ids(mut self, ids: Vec<u64>) -> Self {
        debug_assert_eq!(ids.len(), self.node_count());
        self.original_ids = ids;
        self
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.targets.len() / 2
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Undirected edges as `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.node_count()).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .copied()
                .filter(move |&v| v > u)
                .map(move |v| (u, v))
        })
    }

    pub fn features(&self) -> Option<&Array2<f64>> {
        self.features.as_ref()
    }

    /// Node ids as they appeared in the source files.
    pub fn original_ids(&self) -> &[u64] {
        &self.original_ids
    }

    /// Same graph with node `v` renamed to `perm[v]`; feature rows follow.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        let n = self.node_count();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(GraphError::InvalidSet("relabeling is not a permutation".into()));
        }
        let mut g = Graph::from_edges(n, self.edges().map(|(u, v)| (perm[u], perm[v])))?;
        let mut ids = vec![0u64; n];
        for v in 0..n {
            ids[perm[v]] = self.original_ids[v];
        }
        g.original_ids = ids;
        if let Some(x) = &self.features {
            let mut y = Array2::zeros(x.raw_dim());
            for v in 0..n {
                y.row_mut(perm[v]).assign(&x.row(v));
            }
            g.features = Some(y);
        }
        Ok(g)
    }

    /// Full scan of the structural invariants: symmetric, sorted, no
    /// self-loops, no duplicates.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let n = self.node_count();
        for v in 0..n {
            let nbrs = self.neighbors(v);
            for w in nbrs.windows(2) {
                if w[0] >= w[1] {
                    return Err(format!("node {v}: neighbors not strictly increasing"));
                }
            }
            for &u in nbrs {
                if u >= n {
                    return Err(format!("node {v}: neighbor {u} out of range"));
                }
                if u == v {
                    return Err(format!("node {v}: self-loop"));
                }
                if !self.has_edge(u, v) {
                    return Err(format!("edge {v}->{u} has no reverse"));
                }
            }
        }
        Ok(())
    }
}

/// Assignment of a graph to one of the three evaluation splits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

/// A collection of labeled graphs with split assignments.
///
/// Graphs are reference counted so that relabeled or filtered views of a
/// dataset share storage.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledGraphSet {
    ids: Vec<String>,
    graphs: Vec<Arc<Graph>>,
    labels: Vec<usize>,
    class_names: Vec<String>,
    splits: Vec<Split>,
}

impl LabeledGraphSet {
    pub fn new(
        ids: Vec<String>,
        graphs: Vec<Arc<Graph>>,
        labels: Vec<usize>,
        class_names: Vec<String>,
        splits: Vec<Split>,
    ) -> Result<Self> {
        let n = graphs.len();
        if ids.len() != n || labels.len() != n || splits.len() != n {
            return Err(GraphError::InvalidSet(format!(
                "length mismatch: {} ids, {} graphs, {} labels, {} splits",
                ids.len(),
                n,
                labels.len(),
                splits.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(GraphError::InvalidSet(format!(
                "label {bad} out of range for {} classes",
                class_names.len()
            )));
        }
        Ok(LabeledGraphSet { ids, graphs, labels, class_names, splits })
    }

    /// Build from `(id, graph, class name)` triples; class indices follow the
    /// sorted order of class names. All graphs start in the train split.
    pub fn from_named(entries: Vec<(String, Graph, String)>) -> Result<Self> {
        let names: BTreeMap<String, ()> = entries.iter().map(|(_, _, c)| (c.clone(), ())).collect();
        let class_names: Vec<String> = names.into_keys().collect();
        let mut ids = Vec::with_capacity(entries.len());
        let mut graphs = Vec::with_capacity(entries.len());
        let mut labels = Vec::with_capacity(entries.len());
        for (id, g, class) in entries {
            ids.push(id);
            graphs.push(Arc::new(g));
            labels.push(class_names.binary_search(&class).expect("class collected above"));
        }
        let splits = vec![Split::Train; ids.len()];
        LabeledGraphSet::new(ids, graphs, labels, class_names, splits)
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn graphs(&self) -> &[Arc<Graph>] {
        &self.graphs
    }

    pub fn graph(&self, i: usize) -> &Graph {
        &self.graphs[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }

    pub fn splits(&self) -> &[Split] {
        &self.splits
    }

    pub fn indices_in(&self, split: Split) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.splits[i] == split).collect()
    }

    /// Graph count per class index.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_count()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    pub fn with_splits(mut self, splits: Vec<Split>) -> Result<Self> {
        if splits.len() != self.len() {
            return Err(GraphError::InvalidSet(format!(
                "{} splits for {} graphs",
                splits.len(),
                self.len()
            )));
        }
        self.splits = splits;
        Ok(self)
    }

    /// Keep the graphs for which `map` returns a class name, relabeling them
    /// with that name. Classes are re-indexed in sorted order; splits carry
    /// over.
    pub fn remap_classes<F>(&self, map: F) -> Result<Self>
    where
        F: Fn(&str) -> Option<String>,
    {
        let mut kept = Vec::new();
        for i in 0..self.len() {
            if let Some(name) = map(&self.class_names[self.labels[i]]) {
                kept.push((i, name));
            }
        }
        let names: BTreeMap<&str, ()> = kept.iter().map(|(_, c)| (c.as_str(), ())).collect();
        let class_names: Vec<String> = names.into_keys().map(str::to_owned).collect();
        let mut out = LabeledGraphSet {
            ids: Vec::with_capacity(kept.len()),
            graphs: Vec::with_capacity(kept.len()),
            labels: Vec::with_capacity(kept.len()),
            class_names: Vec::new(),
            splits: Vec::with_capacity(kept.len()),
        };
        for (i, name) in &kept {
            out.ids.push(self.ids[*i].clone());
            out.graphs.push(Arc::clone(&self.graphs[*i]));
            out.labels.push(class_names.binary_search(name).expect("collected above"));
            out.splits.push(self.splits[*i]);
        }
        out.class_names = class_names;
        Ok(out)
    }
}
