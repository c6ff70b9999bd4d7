use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use super::{Graph, GraphError, LabeledGraphSet, Result};
use crate::fsutil::write_atomic;
use crate::Execution;

const LABELS_FILE: &str = "labels.json";
const EDGES_FILE: &str = "edges.tsv";
const FEATURES_FILE: &str = "features.csv";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> GraphError + '_ {
    move |source| GraphError::Io { path: path.to_path_buf(), source }
}

/// Load a dataset directory:
///
/// ```text
/// <root>/labels.json            {"<graph-id>": "<class-name>", ...}
/// <root>/<graph-id>/edges.tsv   src<TAB>dst per line
/// <root>/<graph-id>/features.csv  node_id,f0,...,f{k-1}   (optional)
/// ```
///
/// Node ids are remapped per graph to `0..n` in ascending order of the
/// original ids; [`Graph::original_ids`] keeps the mapping.
pub fn load_dataset(root: &Path) -> Result<LabeledGraphSet> {
    let labels = read_labels(root)?;

    let mut dirs = BTreeSet::new();
    for entry in fs::read_dir(root).map_err(io_err(root))? {
        let entry = entry.map_err(io_err(root))?;
        if entry.path().is_dir() {
            dirs.insert(entry.file_name().to_string_lossy().into_owned());
        }
    }
    if labels.is_empty() && dirs.is_empty() {
        return Err(GraphError::NoGraphs(root.to_path_buf()));
    }
    if let Some(id) = dirs.iter().find(|d| !labels.contains_key(*d)) {
        return Err(GraphError::MissingLabel(id.clone()));
    }

    let ids: Vec<(&String, &String)> = labels.iter().collect();
    let loaded = Execution::default().try_map(&ids, |(id, _)| load_graph(root, id))?;
    let entries = ids
        .into_iter()
        .zip(loaded)
        .map(|((id, class), g)| (id.clone(), g, class.clone()))
        .collect();
    LabeledGraphSet::from_named(entries)
}

/// Every layout problem under `root`, not just the first: unlabeled graph
/// directories, labels without a directory, and the first defect of each
/// graph's files.
pub fn layout_violations(root: &Path) -> Vec<GraphError> {
    if !root.is_dir() {
        return vec![GraphError::NoGraphs(root.to_path_buf())];
    }
    let mut out = Vec::new();
    let labels = match read_labels(root) {
        Ok(l) => l,
        Err(GraphError::MissingLabel(_)) => BTreeMap::new(),
        Err(e) => {
            out.push(e);
            BTreeMap::new()
        }
    };
    let dirs: BTreeSet<String> = match fs::read_dir(root) {
        Ok(rd) => rd
            .filter_map(|e| e.ok())
            .filter(|e| e.path().is_dir())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .collect(),
        Err(source) => {
            out.push(GraphError::Io { path: root.to_path_buf(), source });
            return out;
        }
    };
    if labels.is_empty() && dirs.is_empty() && out.is_empty() {
        out.push(GraphError::NoGraphs(root.to_path_buf()));
    }
    out.extend(dirs.iter().filter(|d| !labels.contains_key(*d)).map(|d| GraphError::MissingLabel(d.clone())));
    for id in labels.keys() {
        if !dirs.contains(id) {
            out.push(GraphError::MissingEdges(id.clone()));
        } else if let Err(e) = load_graph(root, id) {
            out.push(e);
        }
    }
    out
}

fn read_labels(root: &Path) -> Result<BTreeMap<String, String>> {
    let path = root.join(LABELS_FILE);
    if !path.exists() {
        let any_dir = fs::read_dir(root)
            .map_err(io_err(root))?
            .filter_map(|e| e.ok())
            .find(|e| e.path().is_dir());
        return match any_dir {
            None => Err(GraphError::NoGraphs(root.to_path_buf())),
            Some(e) => Err(GraphError::MissingLabel(e.file_name().to_string_lossy().into_owned())),
        };
    }
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    serde_json::from_str(&text).map_err(|e| GraphError::Malformed {
        path: path.clone(),
        line: e.line(),
        reason: e.to_string(),
    })
}

/// Load a single graph directory.
pub(crate) fn load_graph(root: &Path, id: &str) -> Result<Graph> {
    let dir = root.join(id);
    let edges_path = dir.join(EDGES_FILE);
    if !edges_path.is_file() {
        return Err(GraphError::MissingEdges(id.to_string()));
    }
    let edges = read_edges(&edges_path)?;
    let features_path = dir.join(FEATURES_FILE);
    let features = if features_path.is_file() {
        Some(read_features(&features_path)?)
    } else {
        None
    };

    let node_ids: Vec<u64> = match &features {
        Some((ids, _)) => {
            let known: BTreeSet<u64> = ids.iter().copied().collect();
            for &(u, v) in &edges {
                for node in [u, v] {
                    if !known.contains(&node) {
                        return Err(GraphError::NodeWithoutFeatures { graph: id.to_string(), node });
                    }
                }
            }
            known.into_iter().collect()
        }
        None => {
            let set: BTreeSet<u64> = edges.iter().flat_map(|&(u, v)| [u, v]).collect();
            set.into_iter().collect()
        }
    };
    let index = |x: u64| node_ids.binary_search(&x).expect("id collected above");
    let g = Graph::from_edges(node_ids.len(), edges.iter().map(|&(u, v)| (index(u), index(v))))?;

    let g = match features {
        Some((ids, rows)) => {
            let width = rows.first().map_or(0, Vec::len);
            let mut x = Array2::zeros((node_ids.len(), width));
            for (orig, row) in ids.iter().zip(rows) {
                x.row_mut(index(*orig)).assign(&ndarray::ArrayView1::from(&row[..]));
            }
            g.with_features(x)?
        }
        None => g,
    };
    Ok(g.with_original_ids(node_ids))
}

fn read_edges(path: &Path) -> Result<Vec<(u64, u64)>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut edges = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let malformed = |reason: &str| GraphError::Malformed {
            path: path.to_path_buf(),
            line: i + 1,
            reason: reason.to_string(),
        };
        let mut parts = line.split('\t');
        let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(malformed("expected `src<TAB>dst`"));
        };
        let u = a.trim().parse::<u64>().map_err(|_| malformed("source is not a node id"))?;
        let v = b.trim().parse::<u64>().map_err(|_| malformed("target is not a node id"))?;
        edges.push((u, v));
    }
    Ok(edges)
}

fn read_features(path: &Path) -> Result<(Vec<u64>, Vec<Vec<f64>>)> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut lines = text.lines().enumerate();
    let malformed = |line: usize, reason: String| GraphError::Malformed {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let width = match lines.next() {
        Some((_, header)) => {
            let cols: Vec<&str> = header.trim().split(',').collect();
            if cols[0] != "node_id" {
                return Err(malformed(1, "header must start with node_id".into()));
            }
            cols.len() - 1
        }
        None => return Err(malformed(1, "empty features file".into())),
    };
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut cols = line.split(',');
        let id = cols
            .next()
            .and_then(|c| c.trim().parse::<u64>().ok())
            .ok_or_else(|| malformed(i + 1, "bad node id".into()))?;
        if !seen.insert(id) {
            return Err(malformed(i + 1, format!("duplicate node id {id}")));
        }
        let row = cols
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| malformed(i + 1, e.to_string()))?;
        if row.len() != width {
            return Err(malformed(i + 1, format!("expected {width} features, found {}", row.len())));
        }
        ids.push(id);
        rows.push(row);
    }
    Ok((ids, rows))
}

/// Write a set in the layout read by [`load_dataset`], using original ids.
pub fn write_dataset(set: &LabeledGraphSet, root: &Path) -> Result<()> {
    fs::create_dir_all(root).map_err(io_err(root))?;
    let labels: BTreeMap<&str, &str> = set
        .ids()
        .iter()
        .zip(set.labels())
        .map(|(id, &l)| (id.as_str(), set.class_names()[l].as_str()))
        .collect();
    let labels_path = root.join(LABELS_FILE);
    let json = serde_json::to_string_pretty(&labels).expect("string map serializes");
    write_atomic(&labels_path, json.as_bytes()).map_err(io_err(&labels_path))?;

    for (id, g) in set.ids().iter().zip(set.graphs()) {
        let dir: PathBuf = root.join(id);
        let orig = g.original_ids();
        let mut edges = String::new();
        for (u, v) in g.edges() {
            writeln!(edges, "{}\t{}", orig[u], orig[v]).unwrap();
        }
        let path = dir.join(EDGES_FILE);
        write_atomic(&path, edges.as_bytes()).map_err(io_err(&path))?;

        if let Some(x) = g.features() {
            let mut csv = String::from("node_id");
            for k in 0..x.ncols() {
                write!(csv, ",f{k}").unwrap();
            }
            csv.push('\n');
            for (v, row) in x.rows().into_iter().enumerate() {
                write!(csv, "{}", orig[v]).unwrap();
                for value in row {
                    write!(csv, ",{value}").unwrap();
                }
                csv.push('\n');
            }
            let path = dir.join(FEATURES_FILE);
            write_atomic(&path, csv.as_bytes()).map_err(io_err(&path))?;
        }
    }
    Ok(())
}
