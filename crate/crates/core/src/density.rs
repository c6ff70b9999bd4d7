//! Local density metrics: degree, core number and node truss number.
//!
//! Core numbers come from bucket-queue minimum-degree peeling in `O(|E|)`.
//! Truss numbers come from oriented triangle counting followed by
//! minimum-support edge peeling in `O(|E|^1.5)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::Graph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DensityMetric {
    Degree,
    Core,
    Truss,
}

impl DensityMetric {
    pub const ALL: [DensityMetric; 3] = [DensityMetric::Degree, DensityMetric::Core, DensityMetric::Truss];

    pub fn as_str(self) -> &'static str {
        match self {
            DensityMetric::Degree => "degree",
            DensityMetric::Core => "core",
            DensityMetric::Truss => "truss",
        }
    }
}

impl fmt::Display for DensityMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DensityMetric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "degree" => Ok(DensityMetric::Degree),
            "core" | "kcore" | "k-core" => Ok(DensityMetric::Core),
            "truss" | "ktruss" | "k-truss" => Ok(DensityMetric::Truss),
            other => Err(format!("unknown density metric '{other}' (expected degree, core or truss)")),
        }
    }
}

/// Raw and normalized density of every node for one metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityProfile {
    pub metric: DensityMetric,
    pub raw: Vec<f64>,
    pub phi: Vec<f64>,
}

impl DensityProfile {
    pub fn from_raw(metric: DensityMetric, raw: Vec<f64>) -> Self {
        let phi = normalize(&raw);
        DensityProfile { metric, raw, phi }
    }

    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }
}

/// Options that only affect the truss metric.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DensityOptions {
    /// Subtract 2 from every edge truss number before averaging per node, so
    /// edges outside any triangle count as 0.
    pub truss_offset: bool,
}

pub fn degrees(g: &Graph) -> Vec<usize> {
    (0..g.node_count()).map(|v| g.degree(v)).collect()
}

/// Items bucketed by an integer key that only ever decreases by one, kept in
/// nondecreasing key order (Batagelj–Zaversnik layout).
struct BinQueue {
    key: Vec<usize>,
    order: Vec<usize>,
    pos: Vec<usize>,
    bin_start: Vec<usize>,
}

impl BinQueue {
    fn new(key: Vec<usize>) -> Self {
        let n = key.len();
        let max = key.iter().copied().max().unwrap_or(0);
        let mut bin_start = vec![0usize; max + 2];
        for &k in &key {
            bin_start[k + 1] += 1;
        }
        for k in 0..=max {
            bin_start[k + 1] += bin_start[k];
        }
        let mut next = bin_start.clone();
        let mut order = vec![0usize; n];
        let mut pos = vec![0usize; n];
        // Items with equal keys stay in id order.
        for (item, &k) in key.iter().enumerate() {
            pos[item] = next[k];
            order[next[k]] = item;
            next[k] += 1;
        }
        BinQueue { key, order, pos, bin_start }
    }

    /// Move `item` to the end of the next-lower bin.
    fn decrement(&mut self, item: usize) {
        let k = self.key[item];
        let first = self.bin_start[k];
        let other = self.order[first];
        if other != item {
            let p = self.pos[item];
            self.order.swap(first, p);
            self.pos[other] = p;
            self.pos[item] = first;
        }
        self.bin_start[k] += 1;
        self.key[item] -= 1;
    }
}

/// Core number of every node by minimum-degree peeling.
pub fn core_numbers(g: &Graph) -> Vec<usize> {
    let n = g.node_count();
    let mut queue = BinQueue::new(degrees(g));
    for i in 0..n {
        let v = queue.order[i];
        let kv = queue.key[v];
        for &u in g.neighbors(v) {
            if queue.key[u] > kv {
                queue.decrement(u);
            }
        }
    }
    queue.key
}

/// Truss number of every undirected edge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeTruss {
    /// Edges `(u, v)` with `u < v` in lexicographic order.
    pub edges: Vec<(usize, usize)>,
    pub truss: Vec<usize>,
}

impl EdgeTruss {
    pub fn get(&self, u: usize, v: usize) -> Option<usize> {
        let key = (u.min(v), u.max(v));
        self.edges.binary_search(&key).ok().map(|i| self.truss[i])
    }
}

/// Edge ids laid out parallel to the graph's CSR adjacency: `ids[v][i]` is
/// the id of the edge to `g.neighbors(v)[i]`.
fn incident_edge_ids(g: &Graph) -> (Vec<(usize, usize)>, Vec<Vec<usize>>) {
    let edges: Vec<(usize, usize)> = g.edges().collect();
    let mut ids: Vec<Vec<usize>> = (0..g.node_count()).map(|v| Vec::with_capacity(g.degree(v))).collect();
    for v in 0..g.node_count() {
        for &u in g.neighbors(v) {
            let key = (v.min(u), v.max(u));
            ids[v].push(edges.binary_search(&key).expect("edge listed"));
        }
    }
    (edges, ids)
}

/// Triangle count per edge. Edges are oriented from lower to higher
/// (degree, id) rank so each triangle is found once via an intersection of
/// two out-lists of size at most `sqrt(2|E|)`.
fn edge_supports(g: &Graph, edges: &[(usize, usize)], ids: &[Vec<usize>]) -> Vec<usize> {
    let n = g.node_count();
    let rank_key = |v: usize| (g.degree(v), v);
    let mut out: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for v in 0..n {
        for (i, &u) in g.neighbors(v).iter().enumerate() {
            if rank_key(v) < rank_key(u) {
                out[v].push((u, ids[v][i]));
            }
        }
        // Neighbors are already sorted by id, so out-lists are too.
    }
    let mut support = vec![0usize; edges.len()];
    for v in 0..n {
        for &(u, e_vu) in &out[v] {
            let (a, b) = (&out[v], &out[u]);
            let (mut i, mut j) = (0, 0);
            while i < a.len() && j < b.len() {
                match a[i].0.cmp(&b[j].0) {
                    std::cmp::Ordering::Less => i += 1,
                    std::cmp::Ordering::Greater => j += 1,
                    std::cmp::Ordering::Equal => {
                        support[e_vu] += 1;
                        support[a[i].1] += 1;
                        support[b[j].1] += 1;
                        i += 1;
                        j += 1;
                    }
                }
            }
        }
    }
    support
}

/// Truss number of every edge by support counting and minimum-support
/// peeling. Every edge has truss at least 2.
pub fn edge_truss_numbers(g: &Graph) -> EdgeTruss {
    let (edges, ids) = incident_edge_ids(g);
    let m = edges.len();
    let support = edge_supports(g, &edges, &ids);
    let mut queue = BinQueue::new(support);
    let mut removed = vec![false; m];
    let mut truss = vec![0usize; m];

    for i in 0..m {
        let e = queue.order[i];
        let k = queue.key[e];
        truss[e] = k + 2;
        removed[e] = true;
        let (u, v) = edges[e];
        // Walk the shorter adjacency and look the third vertex up in the other.
        let (small, large) = if g.degree(u) <= g.degree(v) { (u, v) } else { (v, u) };
        let large_nbrs = g.neighbors(large);
        for (idx, &w) in g.neighbors(small).iter().enumerate() {
            let e_sw = ids[small][idx];
            if removed[e_sw] {
                continue;
            }
            let Ok(jdx) = large_nbrs.binary_search(&w) else { continue };
            let e_lw = ids[large][jdx];
            if removed[e_lw] {
                continue;
            }
            for f in [e_sw, e_lw] {
                if queue.key[f] > k {
                    queue.decrement(f);
                }
            }
        }
    }
    EdgeTruss { edges, truss }
}

/// Mean truss number over each node's incident edges; isolated nodes get 0.
pub fn node_truss_numbers(g: &Graph, et: &EdgeTruss) -> Vec<f64> {
    node_truss_with_offset(g, et, 0)
}

fn node_truss_with_offset(g: &Graph, et: &EdgeTruss, offset: usize) -> Vec<f64> {
    let mut sum = vec![0usize; g.node_count()];
    for (&(u, v), &t) in et.edges.iter().zip(&et.truss) {
        let t = t - offset;
        sum[u] += t;
        sum[v] += t;
    }
    sum.iter()
        .enumerate()
        .map(|(v, &s)| match g.degree(v) {
            0 => 0.0,
            d => s as f64 / d as f64,
        })
        .collect()
}

/// Per-graph min-max scaling into `[0, 1]`; a constant input maps to 0.5.
pub fn normalize(raw: &[f64]) -> Vec<f64> {
    let (lo, hi) = raw
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    if !(hi > lo) {
        return vec![0.5; raw.len()];
    }
    let span = hi - lo;
    raw.iter().map(|&x| ((x - lo) / span).clamp(0.0, 1.0)).collect()
}

pub fn density_profile(g: &Graph, metric: DensityMetric) -> DensityProfile {
    density_profile_with(g, metric, DensityOptions::default())
}

pub fn density_profile_with(g: &Graph, metric: DensityMetric, opts: DensityOptions) -> DensityProfile {
    let raw: Vec<f64> = match metric {
        DensityMetric::Degree => degrees(g).into_iter().map(|d| d as f64).collect(),
        DensityMetric::Core => core_numbers(g).into_iter().map(|c| c as f64).collect(),
        DensityMetric::Truss => {
            let et = edge_truss_numbers(g);
            node_truss_with_offset(g, &et, if opts.truss_offset { 2 } else { 0 })
        }
    };
    DensityProfile::from_raw(metric, raw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn complete(n: usize) -> Graph {
        let edges = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v)));
        Graph::from_edges(n, edges).unwrap()
    }

    fn star(leaves: usize) -> Graph {
        Graph::from_edges(leaves + 1, (1..=leaves).map(|v| (0, v))).unwrap()
    }

    /// Triangle {0,1,2} with pendant 3 hanging off node 2.
    fn triangle_pendant() -> Graph {
        Graph::from_edges(4, [(0, 1), (1, 2), (0, 2), (2, 3)]).unwrap()
    }

    #[test]
    fn degree_examples() {
        assert_eq!(degrees(&complete(3)), vec![2, 2, 2]);
        assert_eq!(degrees(&star(4)), vec![4, 1, 1, 1, 1]);
        let g = Graph::from_edges(3, [(0, 1)]).unwrap();
        assert_eq!(degrees(&g)[2], 0);
    }

    #[test]
    fn core_examples() {
        assert_eq!(core_numbers(&complete(4)), vec![3, 3, 3, 3]);
        assert_eq!(core_numbers(&triangle_pendant()), vec![2, 2, 2, 1]);
        assert_eq!(core_numbers(&Graph::from_edges(2, []).unwrap()), vec![0, 0]);
    }

    #[test]
    fn truss_examples() {
        assert_eq!(edge_truss_numbers(&complete(3)).truss, vec![3, 3, 3]);
        assert_eq!(edge_truss_numbers(&complete(4)).truss, vec![4; 6]);
        let path = Graph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
        assert_eq!(edge_truss_numbers(&path).truss, vec![2, 2]);
        let et = edge_truss_numbers(&triangle_pendant());
        assert_eq!(et.get(2, 3), Some(2));
        assert_eq!(et.get(0, 1), Some(3));
    }

    #[test]
    fn node_truss_examples() {
        let g = triangle_pendant();
        let nt = node_truss_numbers(&g, &edge_truss_numbers(&g));
        assert_eq!(nt[0], 3.0);
        assert_eq!(nt[3], 2.0);
        assert!((nt[2] - 8.0 / 3.0).abs() < 1e-15);
        let iso = Graph::from_edges(2, []).unwrap();
        assert_eq!(node_truss_numbers(&iso, &edge_truss_numbers(&iso)), vec![0.0, 0.0]);
    }

    #[test]
    fn truss_offset_shifts_by_two() {
        let g = triangle_pendant();
        let p = density_profile_with(&g, DensityMetric::Truss, DensityOptions { truss_offset: true });
        assert_eq!(p.raw[0], 1.0);
        assert_eq!(p.raw[3], 0.0);
        assert!((p.raw[2] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize(&[1.0, 1.0, 2.0, 3.0]), vec![0.0, 0.0, 0.5, 1.0]);
        assert_eq!(normalize(&[4.0, 4.0, 4.0]), vec![0.5; 3]);
        assert_eq!(normalize(&[0.0, 10.0]), vec![0.0, 1.0]);
    }

    #[test]
    fn profile_examples() {
        let p = density_profile(&star(4), DensityMetric::Degree);
        assert_eq!(p.raw, vec![4.0, 1.0, 1.0, 1.0, 1.0]);
        assert_eq!(p.phi, vec![1.0, 0.0, 0.0, 0.0, 0.0]);
        let p = density_profile(&complete(4), DensityMetric::Core);
        assert_eq!(p.phi, vec![0.5; 4]);
        let p = density_profile(&triangle_pendant(), DensityMetric::Truss);
        // raw = [3, 3, 8/3, 2]
        assert_eq!(p.phi[0], 1.0);
        assert_eq!(p.phi[3], 0.0);
        assert!((p.phi[2] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn metric_names_parse() {
        for m in DensityMetric::ALL {
            assert_eq!(m.as_str().parse::<DensityMetric>().unwrap(), m);
        }
        assert!("density".parse::<DensityMetric>().is_err());
    }

    proptest! {
        #[test]
        fn normalize_is_bounded_monotone_and_affine_invariant(
            raw in prop::collection::vec(-1e3f64..1e3, 1..40),
            scale in 0.01f64..100.0,
            shift in -100.0f64..100.0,
        ) {
            let phi = normalize(&raw);
            prop_assert!(phi.iter().all(|&p| (0.0..=1.0).contains(&p)));
            for i in 0..raw.len() {
                for j in 0..raw.len() {
                    if raw[i] < raw[j] {
                        prop_assert!(phi[i] <= phi[j]);
                    }
                }
            }
            let moved: Vec<f64> = raw.iter().map(|x| scale * x + shift).collect();
            for (a, b) in phi.iter().zip(normalize(&moved)) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
