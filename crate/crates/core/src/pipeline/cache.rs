//! Content-addressed stage cache.
//!
//! Each entry lives at `<root>/<stage>/<key>.<ext>` and ends with a
//! `# sha256 <hex>` line over the preceding bytes. An entry whose checksum
//! or contents do not verify is treated as missing and recomputed.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use sha2::{Digest, Sha256};

use crate::density::{DensityMetric, DensityProfile};
use crate::embed::EmbeddingMatrix;
use crate::fsutil::write_atomic;
use crate::walk::WalkCorpus;
use crate::Graph;

const CHECKSUM_PREFIX: &str = "# sha256 ";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of a sequence of labeled parts; parts are length-prefixed so no two
/// sequences collide by concatenation.
pub fn stage_key(parts: &[&str]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    hex::encode(h.finalize())
}

/// Hash of everything about a graph that stages read: node count, edges and
/// feature values.
pub fn graph_hash(g: &Graph) -> String {
    let mut h = Sha256::new();
    h.update((g.node_count() as u64).to_le_bytes());
    for (u, v) in g.edges() {
        h.update((u as u64).to_le_bytes());
        h.update((v as u64).to_le_bytes());
    }
    match g.features() {
        Some(x) => {
            h.update([1u8]);
            h.update((x.ncols() as u64).to_le_bytes());
            for v in x.iter() {
                h.update(v.to_le_bytes());
            }
        }
        None => h.update([0u8]),
    }
    hex::encode(h.finalize())
}

#[derive(Debug, Clone)]
pub struct Cache {
    root: PathBuf,
}

impl Cache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Cache { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn entry_path(&self, stage: &str, key: &str, ext: &str) -> PathBuf {
        self.root.join(stage).join(format!("{key}.{ext}"))
    }

    /// Verified body of an entry, or `None` if it is absent or corrupt.
    pub fn load(&self, stage: &str, key: &str, ext: &str) -> Option<String> {
        let path = self.entry_path(stage, key, ext);
        let text = std::fs::read_to_string(&path).ok()?;
        let verified = text
            .strip_suffix('\n')
            .map(|t| {
                let start = t.rfind('\n').map_or(0, |i| i + 1);
                (&text[..start], &t[start..])
            })
            .and_then(|(body, last)| {
                let sum = last.strip_prefix(CHECKSUM_PREFIX)?;
                (sum == sha256_hex(body.as_bytes())).then_some(body)
            });
        if verified.is_none() {
            log::warn!("cache entry {} is corrupt; recomputing", path.display());
        }
        verified.map(str::to_owned)
    }

    pub fn store(&self, stage: &str, key: &str, ext: &str, body: &str) -> std::io::Result<()> {
        let mut text = String::with_capacity(body.len() + 80);
        text.push_str(body);
        if !text.is_empty() && !text.ends_with('\n') {
            text.push('\n');
        }
        let sum = sha256_hex(text.as_bytes());
        let _ = writeln!(text, "{CHECKSUM_PREFIX}{sum}");
        write_atomic(&self.entry_path(stage, key, ext), text.as_bytes())
    }
}

/// `node_id,raw,phi` rows.
pub fn encode_density(p: &DensityProfile) -> String {
    let mut s = String::from("node_id,raw,phi\n");
    for (v, (r, f)) in p.raw.iter().zip(&p.phi).enumerate() {
        let _ = writeln!(s, "{v},{r},{f}");
    }
    s
}

pub fn decode_density(text: &str, metric: DensityMetric, node_count: usize) -> Option<DensityProfile> {
    let mut lines = text.lines();
    if lines.next()? != "node_id,raw,phi" {
        return None;
    }
    let mut raw = Vec::with_capacity(node_count);
    let mut phi = Vec::with_capacity(node_count);
    for (i, line) in lines.enumerate() {
        let mut cols = line.split(',');
        if cols.next()?.parse::<usize>().ok()? != i {
            return None;
        }
        raw.push(cols.next()?.parse().ok()?);
        phi.push(cols.next()?.parse().ok()?);
        if cols.next().is_some() {
            return None;
        }
    }
    (raw.len() == node_count).then_some(DensityProfile { metric, raw, phi })
}

/// One walk per line, node ids separated by spaces.
pub fn encode_walks(c: &WalkCorpus) -> String {
    let mut s = String::new();
    for w in &c.walks {
        for (i, v) in w.iter().enumerate() {
            if i > 0 {
                s.push(' ');
            }
            let _ = write!(s, "{v}");
        }
        s.push('\n');
    }
    s
}

pub fn decode_walks(text: &str, node_count: usize) -> Option<Vec<Vec<usize>>> {
    text.lines()
        .map(|line| {
            line.split(' ')
                .map(|t| t.parse::<usize>().ok().filter(|&v| v < node_count))
                .collect::<Option<Vec<_>>>()
        })
        .collect()
}

/// Header `node_count dim`, then one tab-separated `node_id v0 .. v{d-1}`
/// row per node.
pub fn encode_embedding(e: &EmbeddingMatrix) -> String {
    let mut s = format!("{} {}\n", e.node_count(), e.dim());
    for (v, row) in e.rows.rows().into_iter().enumerate() {
        let _ = write!(s, "{v}");
        for x in row {
            let _ = write!(s, "\t{x}");
        }
        s.push('\n');
    }
    s
}

pub fn decode_embedding(text: &str) -> Option<EmbeddingMatrix> {
    let mut lines = text.lines();
    let mut header = lines.next()?.split(' ');
    let n: usize = header.next()?.parse().ok()?;
    let d: usize = header.next()?.parse().ok()?;
    if header.next().is_some() {
        return None;
    }
    let mut values = Vec::with_capacity(n * d);
    let mut rows = 0;
    for line in lines {
        let mut cols = line.split('\t');
        if cols.next()?.parse::<usize>().ok()? != rows {
            return None;
        }
        let before = values.len();
        for t in cols {
            values.push(t.parse::<f64>().ok()?);
        }
        if values.len() - before != d {
            return None;
        }
        rows += 1;
    }
    if rows != n {
        return None;
    }
    Some(EmbeddingMatrix { rows: Array2::from_shape_vec((n, d), values).ok()?, loss_history: Vec::new() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entries_roundtrip_and_detect_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Cache::new(dir.path());
        cache.store("density", "k1", "csv", "node_id,raw,phi\n0,1,0.5\n").unwrap();
        assert_eq!(cache.load("density", "k1", "csv").unwrap(), "node_id,raw,phi\n0,1,0.5\n");
        assert!(cache.load("density", "missing", "csv").is_none());
        let path = cache.entry_path("density", "k1", "csv");
        let text = std::fs::read_to_string(&path).unwrap().replace("0.5", "0.6");
        std::fs::write(&path, text).unwrap();
        assert!(cache.load("density", "k1", "csv").is_none());
    }

    #[test]
    fn formats_roundtrip_exactly() {
        let p = DensityProfile { metric: DensityMetric::Truss, raw: vec![2.0, 8.0 / 3.0, 0.0], phi: vec![0.75, 1.0, 0.0] };
        assert_eq!(decode_density(&encode_density(&p), DensityMetric::Truss, 3).unwrap(), p);
        assert!(decode_density(&encode_density(&p), DensityMetric::Truss, 4).is_none());

        let c = WalkCorpus { graph_id: None, walks: vec![vec![0, 1, 2, 1], vec![3]] };
        assert_eq!(decode_walks(&encode_walks(&c), 4).unwrap(), c.walks);
        assert!(decode_walks(&encode_walks(&c), 3).is_none());

        let e = EmbeddingMatrix {
            rows: Array2::from_shape_fn((3, 2), |(i, j)| (i as f64 + 0.1) / (j as f64 + 3.0)),
            loss_history: Vec::new(),
        };
        let text = encode_embedding(&e);
        assert!(text.starts_with("3 2\n0\t"));
        assert_eq!(decode_embedding(&text).unwrap(), e);
    }

    #[test]
    fn keys_separate_parts() {
        assert_ne!(stage_key(&["ab", "c"]), stage_key(&["a", "bc"]));
        let g = Graph::from_edges(3, [(0, 1)]).unwrap();
        let h = Graph::from_edges(3, [(1, 2)]).unwrap();
        assert_ne!(graph_hash(&g), graph_hash(&h));
    }
}
