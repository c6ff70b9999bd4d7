use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{GraphError, LabeledGraphSet, Result, Split};

/// Train/validation/test proportions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        SplitFractions { train: 0.8, val: 0.1, test: 0.1 }
    }
}

impl SplitFractions {
    pub fn new(train: f64, val: f64, test: f64) -> Result<Self> {
        let f = SplitFractions { train, val, test };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
            return Err(GraphError::InvalidSplit(format!("fractions must be positive, got {parts:?}")));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(GraphError::InvalidSplit(format!("fractions sum to {sum}, expected 1")));
        }
        Ok(())
    }

    fn as_array(&self) -> [f64; 3] {
        [self.train, self.val, self.test]
    }
}

/// Largest-remainder apportionment of `n` items; every count is within one
/// of `n * fraction`.
fn apportion(n: usize, fractions: [f64; 3]) -> [usize; 3] {
    let exact = fractions.map(|f| f * n as f64);
    let mut counts = exact.map(|x| x.floor() as usize);
    let mut left = n - counts.iter().sum::<usize>();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

/// Assign splits class by class so each class is divided in the requested
/// proportions. Deterministic for a fixed seed.
pub fn stratified_split(set: &LabeledGraphSet, fractions: SplitFractions, seed: u64) -> Result<LabeledGraphSet> {
    fractions.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut splits = vec![Split::Train; set.len()];
    for class in 0..set.class_count() {
        let mut members: Vec<usize> = (0..set.len()).filter(|&i| set.labels()[i] == class).collect();
        if members.is_empty() {
            continue;
        }
        if members.len() < Split::ALL.len() {
            return Err(GraphError::InvalidSplit(format!(
                "class '{}' has {} graphs, need at least {}",
                set.class_names()[class],
                members.len(),
                Split::ALL.len()
            )));
        }
        members.shuffle(&mut rng);
        let counts = apportion(members.len(), fractions.as_array());
        let mut it = members.into_iter();
        for (split, count) in Split::ALL.into_iter().zip(counts) {
            for i in it.by_ref().take(count) {
                splits[i] = split;
            }
        }
    }
    set.clone().with_splits(splits)
}
