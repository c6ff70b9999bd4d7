//! Density-aware random weighted walks.
//!
//! From the current node `v`, a neighbor `u` is chosen with probability
//! proportional to `phi(u)` when `phi(v) > tau`, and to `1 - phi(u)`
//! otherwise. Walks from dense nodes drift towards dense neighbors, walks
//! from sparse nodes towards sparse ones.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::density::DensityProfile;
use crate::{Execution, Graph};

#[derive(Error, Debug, PartialEq)]
pub enum WalkError {
    #[error("node {0} has no neighbors")]
    Isolated(usize),
    #[error("density profile has {profile} nodes but graph has {graph}")]
    ProfileMismatch { profile: usize, graph: usize },
    #[error("invalid walk config: {0}")]
    InvalidConfig(String),
}

/// Rule for the threshold separating dense from sparse nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdRule {
    /// Fixed at 0.5.
    FixedHalf,
    /// Median of the normalized densities.
    Median,
    /// Average of the smallest and largest normalized density.
    Midpoint,
}

impl ThresholdRule {
    pub const ALL: [ThresholdRule; 3] = [ThresholdRule::FixedHalf, ThresholdRule::Median, ThresholdRule::Midpoint];

    pub fn as_str(self) -> &'static str {
        match self {
            ThresholdRule::FixedHalf => "0.5",
            ThresholdRule::Median => "median",
            ThresholdRule::Midpoint => "mid",
        }
    }

    /// Filesystem-safe name.
    pub fn slug(self) -> &'static str {
        match self {
            ThresholdRule::FixedHalf => "half",
            ThresholdRule::Median => "median",
            ThresholdRule::Midpoint => "mid",
        }
    }
}

impl fmt::Display for ThresholdRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ThresholdRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "0.5" | "half" | "fixed_half" | "fixed" => Ok(ThresholdRule::FixedHalf),
            "median" => Ok(ThresholdRule::Median),
            "mid" | "midpoint" => Ok(ThresholdRule::Midpoint),
            other => Err(format!("unknown threshold rule '{other}' (expected 0.5, median or mid)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkConfig {
    /// Steps per walk; a walk holds at most `walk_length + 1` nodes.
    pub walk_length: usize,
    pub threshold_rule: ThresholdRule,
    pub walks_per_node: usize,
    pub seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig { walk_length: 100, threshold_rule: ThresholdRule::FixedHalf, walks_per_node: 1, seed: 0 }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<(), WalkError> {
        if self.walk_length == 0 {
            return Err(WalkError::InvalidConfig("walk_length must be at least 1".into()));
        }
        if self.walks_per_node == 0 {
            return Err(WalkError::InvalidConfig("walks_per_node must be at least 1".into()));
        }
        Ok(())
    }
}

/// Walks ordered by seed node, then by walk index.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WalkCorpus {
    pub graph_id: Option<String>,
    pub walks: Vec<Vec<usize>>,
}

impl WalkCorpus {
    pub fn token_count(&self) -> usize {
        self.walks.iter().map(Vec::len).sum()
    }
}

pub fn resolve_threshold(profile: &DensityProfile, rule: ThresholdRule) -> f64 {
    let phi = &profile.phi;
    match rule {
        ThresholdRule::FixedHalf => 0.5,
        _ if phi.is_empty() => 0.5,
        ThresholdRule::Median => {
            let mut sorted = phi.clone();
            sorted.sort_by(f64::total_cmp);
            let n = sorted.len();
            if n % 2 == 1 {
                sorted[n / 2]
            } else {
                0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
            }
        }
        ThresholdRule::Midpoint => {
            let (lo, hi) = phi
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
            0.5 * (lo + hi)
        }
    }
}

/// Fill `weights` with the unnormalized transition weights out of `v` and
/// return their sum.
fn fill_weights(g: &Graph, phi: &[f64], v: usize, tau: f64, weights: &mut Vec<f64>) -> f64 {
    weights.clear();
    let dense = phi[v] > tau;
    let mut total = 0.0;
    for &u in g.neighbors(v) {
        let w = if dense { phi[u] } else { 1.0 - phi[u] };
        weights.push(w);
        total += w;
    }
    total
}

/// Transition probabilities from `v` to each of `g.neighbors(v)`, in
/// neighbor order. All-zero weights fall back to uniform.
pub fn transition_distribution(g: &Graph, profile: &DensityProfile, v: usize, tau: f64) -> Result<Vec<f64>, WalkError> {
    if profile.len() != g.node_count() {
        return Err(WalkError::ProfileMismatch { profile: profile.len(), graph: g.node_count() });
    }
    let deg = g.degree(v);
    if deg == 0 {
        return Err(WalkError::Isolated(v));
    }
    let mut w = Vec::with_capacity(deg);
    let total = fill_weights(g, &profile.phi, v, tau, &mut w);
    if total > 0.0 {
        Ok(w.into_iter().map(|x| x / total).collect())
    } else {
        Ok(vec![1.0 / deg as f64; deg])
    }
}

/// One independent RNG stream per (seed node, walk index).
fn walk_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn sample_step<R: Rng>(g: &Graph, phi: &[f64], v: usize, tau: f64, buf: &mut Vec<f64>, rng: &mut R) -> usize {
    let nbrs = g.neighbors(v);
    let total = fill_weights(g, phi, v, tau, buf);
    if !(total > 0.0) {
        return nbrs[rng.random_range(0..nbrs.len())];
    }
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, &w) in buf.iter().enumerate() {
        acc += w;
        if target < acc {
            return nbrs[i];
        }
    }
    // Rounding left `target` at the very top; take the last positive weight.
    let last = buf.iter().rposition(|&w| w > 0.0).expect("total > 0");
    nbrs[last]
}

fn single_walk(g: &Graph, phi: &[f64], tau: f64, start: usize, cfg: &WalkConfig, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut walk = Vec::with_capacity(cfg.walk_length + 1);
    let mut buf = Vec::new();
    walk.push(start);
    let mut v = start;
    for _ in 0..cfg.walk_length {
        if g.degree(v) == 0 {
            break;
        }
        v = sample_step(g, phi, v, tau, &mut buf, rng);
        walk.push(v);
    }
    walk
}

/// Walk corpus with the default execution mode.
pub fn generate_walks(g: &Graph, profile: &DensityProfile, cfg: &WalkConfig) -> Result<WalkCorpus, WalkError> {
    generate_walks_with(Execution::default(), g, profile, cfg)
}

/// `walks_per_node` walks from every node. Output is identical for both
/// execution modes.
pub fn generate_walks_with(
    exec: Execution,
    g: &Graph,
    profile: &DensityProfile,
    cfg: &WalkConfig,
) -> Result<WalkCorpus, WalkError> {
    cfg.validate()?;
    if profile.len() != g.node_count() {
        return Err(WalkError::ProfileMismatch { profile: profile.len(), graph: g.node_count() });
    }
    let tau = resolve_threshold(profile, cfg.threshold_rule);
    let per = cfg.walks_per_node;
    let walks = exec.map_range(g.node_count() * per, |i| {
        let start = i / per;
        let mut rng = walk_rng(cfg.seed, i as u64);
        single_walk(g, &profile.phi, tau, start, cfg, &mut rng)
    });
    Ok(WalkCorpus { graph_id: None, walks })
}
