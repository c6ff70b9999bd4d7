//! Brute-force reference implementations used only by tests. They share no
//! code with the library.
#![allow(dead_code)]

use std::collections::BTreeSet;

use decode_core::Graph;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// G(n, p) with edges kept in (u < v) order.
pub fn gnp(n: usize, p: f64, rng: &mut impl Rng) -> Graph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    Graph::from_edges(n, edges).unwrap()
}

pub fn adjacency_sets(g: &Graph) -> Vec<BTreeSet<usize>> {
    (0..g.node_count()).map(|v| g.neighbors(v).iter().copied().collect()).collect()
}

/// Core number by definition: the largest k such that v survives repeated
/// deletion of nodes with fewer than k remaining neighbors.
pub fn brute_core(g: &Graph) -> Vec<usize> {
    let n = g.node_count();
    let adj = adjacency_sets(g);
    let mut core = vec![0; n];
    for k in 1..=n {
        let mut alive = vec![true; n];
        loop {
            let mut changed = false;
            for v in 0..n {
                if alive[v] && adj[v].iter().filter(|&&u| alive[u]).count() < k {
                    alive[v] = false;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        if !alive.iter().any(|&a| a) {
            break;
        }
        for v in 0..n {
            if alive[v] {
                core[v] = k;
            }
        }
    }
    core
}

/// Truss number by definition: the largest k such that the edge survives
/// repeated deletion of edges in fewer than k - 2 remaining triangles.
/// Returned in (u < v) lexicographic edge order.
pub fn brute_truss(g: &Graph) -> Vec<((usize, usize), usize)> {
    let n = g.node_count();
    let edges: Vec<(usize, usize)> =
        g.edges().map(|(u, v)| (u.min(v), u.max(v))).collect::<BTreeSet<_>>().into_iter().collect();
    let mut truss = vec![2; edges.len()];
    for k in 3.. {
        let mut alive = vec![vec![false; n]; n];
        for &(u, v) in &edges {
            alive[u][v] = true;
            alive[v][u] = true;
        }
        loop {
            let doomed: Vec<(usize, usize)> = edges
                .iter()
                .copied()
                .filter(|&(u, v)| alive[u][v] && (0..n).filter(|&w| alive[u][w] && alive[v][w]).count() < k - 2)
                .collect();
            if doomed.is_empty() {
                break;
            }
            for (u, v) in doomed {
                alive[u][v] = false;
                alive[v][u] = false;
            }
        }
        let mut any = false;
        for (i, &(u, v)) in edges.iter().enumerate() {
            if alive[u][v] {
                truss[i] = k;
                any = true;
            }
        }
        if !any {
            break;
        }
    }
    edges.into_iter().zip(truss).collect()
}

/// Normalized Mann–Whitney U: probability that a random positive outscores
/// a random negative, ties counting one half.
pub fn mann_whitney_auc(scores: &[f64], positives: &[bool]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        if !positives[i] {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if positives[j] {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// Macro-F1 straight from a confusion matrix (rows are true labels).
pub fn macro_f1_from_confusion(cm: &[Vec<u64>]) -> f64 {
    let k = cm.len();
    let mut total = 0.0;
    for c in 0..k {
        let tp = cm[c][c] as f64;
        let fp: f64 = (0..k).filter(|&r| r != c).map(|r| cm[r][c] as f64).sum();
        let fn_: f64 = (0..k).filter(|&p| p != c).map(|p| cm[c][p] as f64).sum();
        let denom = 2.0 * tp + fp + fn_;
        total += if denom == 0.0 { 0.0 } else { 2.0 * tp / denom };
    }
    total / k as f64
}

/// Step probabilities out of `v`: weight φ(u) for neighbors of a node with
/// φ(v) > τ, 1 − φ(u) otherwise, normalized; uniform if every weight is 0.
pub fn reference_step(g: &Graph, phi: &[f64], v: usize, tau: f64) -> Vec<f64> {
    let w: Vec<f64> =
        g.neighbors(v).iter().map(|&u| if phi[v] > tau { phi[u] } else { 1.0 - phi[u] }).collect();
    let s: f64 = w.iter().sum();
    if s == 0.0 {
        vec![1.0 / w.len() as f64; w.len()]
    } else {
        w.iter().map(|x| x / s).collect()
    }
}

/// Half-width of a 3σ binomial interval for a frequency over `n` trials.
pub fn three_sigma(p: f64, n: usize) -> f64 {
    3.0 * (p * (1.0 - p) / n as f64).sqrt()
}

/// Two K5s on {0..4} and {5..9}, joined by the path 4 - 10 - 5.
pub fn barbell() -> Graph {
    let mut edges = Vec::new();
    for base in [0, 5] {
        for u in 0..5 {
            for v in u + 1..5 {
                edges.push((base + u, base + v));
            }
        }
    }
    edges.extend([(4, 10), (10, 5)]);
    Graph::from_edges(11, edges).unwrap()
}

pub fn star(leaves: usize) -> Graph {
    Graph::from_edges(leaves + 1, (1..=leaves).map(|l| (0, l))).unwrap()
}

pub fn random_permutation(n: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

pub fn cosine(a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>) -> f64 {
    a.dot(&b) / (a.dot(&a).sqrt() * b.dot(&b).sqrt())
}

/// Random orthogonal matrix by Gram–Schmidt over uniform columns.
pub fn random_orthogonal(d: usize, rng: &mut impl Rng) -> ndarray::Array2<f64> {
    let mut q = ndarray::Array2::<f64>::zeros((d, d));
    for j in 0..d {
        let mut col: ndarray::Array1<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        for k in 0..j {
            let prev = q.column(k).to_owned();
            col = &col - &(&prev * prev.dot(&col));
        }
        let norm = col.dot(&col).sqrt();
        q.column_mut(j).assign(&(col / norm));
    }
    q
}
