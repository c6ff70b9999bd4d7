//! Acceptance checks. Prints one line per criterion and exits non-zero if
//! any gating criterion fails.
//!
//! Criteria 7 and 8 need the LEN dataset. Point `DECODE_LEN_ROOT` at its root
//! directory (or place it at `data/LEN` under the workspace); without it both
//! are reported as not available. `ACCEPTANCE_ONLY=3,6` runs a subset.

mod common;

use std::fmt;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use decode_core::density::{core_numbers, density_profile, edge_truss_numbers, DensityMetric, DensityProfile};
use decode_core::embed::{gradient_check_sgns, SgnsFixture};
use decode_core::eval::{confusion_matrix, macro_f1, roc_auc, MetricsReport, Task};
use decode_core::graph::{generate_scale_graph, generate_synthetic, load_dataset, write_dataset, GeneratorConfig};
use decode_core::mpnn::{gradient_check_mpnn, InputMode, Model, Variant};
use decode_core::pipeline::{prepare_task, run_pipeline, RunConfig, TaskKind};
use decode_core::walk::{generate_walks_with, resolve_threshold, transition_distribution, ThresholdRule, WalkConfig};
use decode_core::{Execution, Graph};
use ndarray::Array2;
use rand::Rng;

const ORACLE_GRAPHS: usize = 200;
const ORACLE_TIME_LIMIT: Duration = Duration::from_secs(30);
const SCALE_NODES: usize = 120_000;
const SCALE_EDGES: usize = 215_000;
const CORE_TIME_LIMIT: Duration = Duration::from_secs(5);
const TRUSS_TIME_LIMIT: Duration = Duration::from_secs(60);
const WALK_SAMPLES: usize = 10_000;
const WALK_FORMULA_TOL: f64 = 1e-15;
const SGNS_GRAD_TOL: f64 = 1e-6;
const MPNN_GRAD_TOL: f64 = 1e-4;
const RELABELINGS: usize = 50;
const PERMUTATION_TOL: f64 = 1e-9;
const PLANTED_MIN_ACCURACY: f64 = 0.95;
const PLANTED_TIME_LIMIT: Duration = Duration::from_secs(600);
const LEN_BAND: f64 = 0.05;
const REFERENCE_SAGE_BINARY_ACCURACY: f64 = 0.852;
const REFERENCE_SAGE_BINARY_F1: f64 = 0.877;
const REFERENCE_GIN_MULTICLASS_ACCURACY: f64 = 0.679;
const METRIC_FIXTURES: usize = 100;
const METRIC_TOL: f64 = 1e-12;

enum Outcome {
    Pass(String),
    Fail(String),
    NotAvailable(String),
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Pass(d) => write!(f, "PASS  {d}"),
            Outcome::Fail(d) => write!(f, "FAIL  {d}"),
            Outcome::NotAvailable(d) => write!(f, "N/A   {d}"),
        }
    }
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn secs(d: Duration) -> String {
    format!("{:.2}s", d.as_secs_f64())
}

// 1
fn density_oracles() -> Outcome {
    let mut rng = common::rng(1);
    let graphs: Vec<Graph> = (0..ORACLE_GRAPHS)
        .map(|i| {
            let n = rng.random_range(2..=50);
            common::gnp(n, [0.1, 0.3, 0.5][i % 3], &mut rng)
        })
        .collect();
    let start = Instant::now();
    let computed: Vec<_> = graphs.iter().map(|g| (core_numbers(g), edge_truss_numbers(g))).collect();
    let lib_time = start.elapsed();
    let mut mismatches = 0;
    for (g, (core, et)) in graphs.iter().zip(&computed) {
        mismatches += core.iter().zip(common::brute_core(g)).filter(|(a, b)| **a != *b).count();
        let expected = common::brute_truss(g);
        if expected.len() != et.edges.len() {
            mismatches += 1;
        }
        mismatches += expected.iter().filter(|((u, v), t)| et.get(*u, *v) != Some(*t)).count();
    }
    let total = start.elapsed();
    verdict(
        mismatches == 0 && total < ORACLE_TIME_LIMIT,
        format!(
            "{ORACLE_GRAPHS} graphs, {mismatches} mismatches, library {} / with oracles {} (limit {})",
            secs(lib_time),
            secs(total),
            secs(ORACLE_TIME_LIMIT)
        ),
    )
}

// 2
fn density_scale() -> Outcome {
    let g = generate_scale_graph(SCALE_NODES, SCALE_EDGES, 2).expect("scale graph");
    let start = Instant::now();
    let core = core_numbers(&g);
    let core_time = start.elapsed();
    let start = Instant::now();
    let et = edge_truss_numbers(&g);
    let truss_time = start.elapsed();
    let sane = core.len() == SCALE_NODES && et.truss.len() == SCALE_EDGES;
    verdict(
        sane && core_time < CORE_TIME_LIMIT && truss_time < TRUSS_TIME_LIMIT,
        format!(
            "{} nodes / {} edges: core {} (limit {}), truss {} (limit {}), max core {}, max truss {}",
            g.node_count(),
            g.edge_count(),
            secs(core_time),
            secs(CORE_TIME_LIMIT),
            secs(truss_time),
            secs(TRUSS_TIME_LIMIT),
            core.iter().max().unwrap_or(&0),
            et.truss.iter().max().unwrap_or(&0)
        ),
    )
}

struct WalkFixture {
    n: usize,
    edges: Vec<(usize, usize)>,
    /// `None` uses min-max scaled degree.
    phi: Option<Vec<f64>>,
    rule: ThresholdRule,
    from: usize,
    /// Worked out by hand, in neighbor order.
    hand: Option<Vec<f64>>,
}

fn fixture(
    n: usize,
    edges: &[(usize, usize)],
    phi: Option<&[f64]>,
    rule: ThresholdRule,
    from: usize,
    hand: Option<&[f64]>,
) -> WalkFixture {
    WalkFixture { n, edges: edges.to_vec(), phi: phi.map(<[f64]>::to_vec), rule, from, hand: hand.map(<[f64]>::to_vec) }
}

fn walk_fixtures() -> Vec<WalkFixture> {
    use ThresholdRule::{FixedHalf as Half, Median, Midpoint as Mid};
    let star3 = [(0, 1), (0, 2), (0, 3)];
    let star4 = [(0, 1), (0, 2), (0, 3), (0, 4)];
    let k4 = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
    let c5 = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)];
    let wheel = [(0, 1), (0, 2), (0, 3), (0, 4), (0, 5), (1, 2), (2, 3), (3, 4), (4, 5), (5, 1)];
    let k23 = [(0, 2), (0, 3), (0, 4), (1, 2), (1, 3), (1, 4)];
    let p5 = [(0, 1), (1, 2), (2, 3), (3, 4)];
    let diamond = [(0, 1), (0, 2), (1, 2), (1, 3), (2, 3)];
    let barbell: Vec<(usize, usize)> = common::barbell().edges().collect();
    vec![
        fixture(2, &[(0, 1)], Some(&[0.0, 1.0]), Half, 0, Some(&[1.0])),
        fixture(4, &star3, Some(&[1.0, 0.2, 0.4, 0.4]), Half, 0, Some(&[0.2, 0.4, 0.4])),
        fixture(4, &star3, Some(&[0.3, 0.2, 0.4, 0.4]), Half, 0, Some(&[0.4, 0.3, 0.3])),
        fixture(3, &[(0, 1), (0, 2), (1, 2)], Some(&[0.5, 0.5, 1.0]), Half, 0, Some(&[1.0, 0.0])),
        fixture(4, &k4, Some(&[0.9, 0.1, 0.5, 0.7]), Median, 0, Some(&[0.1 / 1.3, 0.5 / 1.3, 0.7 / 1.3])),
        fixture(4, &k4, Some(&[0.9, 0.1, 0.5, 0.7]), Median, 1, Some(&[0.1 / 0.9, 0.5 / 0.9, 0.3 / 0.9])),
        fixture(5, &c5, Some(&[0.0, 0.25, 0.5, 0.75, 1.0]), Mid, 2, Some(&[0.75, 0.25])),
        fixture(5, &c5, Some(&[0.0, 0.25, 0.5, 0.75, 1.0]), Mid, 3, Some(&[0.5 / 1.5, 1.0 / 1.5])),
        fixture(5, &star4, None, Half, 0, Some(&[0.25; 4])),
        fixture(5, &star4, None, Half, 1, Some(&[1.0])),
        fixture(11, &barbell, None, Median, 4, None),
        fixture(11, &barbell, None, Median, 10, None),
        fixture(11, &barbell, None, Median, 0, None),
        fixture(6, &wheel, None, Half, 0, Some(&[0.2; 5])),
        fixture(6, &wheel, None, Half, 1, Some(&[0.0, 0.5, 0.5])),
        fixture(5, &k23, Some(&[0.8, 0.6, 0.1, 0.3, 0.5]), Mid, 0, Some(&[0.1 / 0.9, 0.3 / 0.9, 0.5 / 0.9])),
        fixture(5, &k23, Some(&[0.8, 0.6, 0.1, 0.3, 0.5]), Mid, 2, Some(&[0.2 / 0.6, 0.4 / 0.6])),
        fixture(5, &p5, Some(&[0.0; 5]), Half, 2, Some(&[0.5, 0.5])),
        fixture(5, &p5, Some(&[1.0; 5]), Half, 2, Some(&[0.5, 0.5])),
        fixture(4, &diamond, Some(&[0.0, 1.0, 1.0, 0.0]), Median, 1, Some(&[0.0, 1.0, 0.0])),
    ]
}

fn independent_threshold(phi: &[f64], rule: ThresholdRule) -> f64 {
    let mut s = phi.to_vec();
    s.sort_by(f64::total_cmp);
    match rule {
        ThresholdRule::FixedHalf => 0.5,
        ThresholdRule::Median if s.len() % 2 == 1 => s[s.len() / 2],
        ThresholdRule::Median => (s[s.len() / 2 - 1] + s[s.len() / 2]) / 2.0,
        ThresholdRule::Midpoint => (s[0] + s[s.len() - 1]) / 2.0,
    }
}

// 3
fn walk_law() -> Outcome {
    let fixtures = walk_fixtures();
    let mut problems = Vec::new();
    let mut checked = 0;
    for (i, f) in fixtures.iter().enumerate() {
        let g = Graph::from_edges(f.n, f.edges.iter().copied()).unwrap();
        let phi = f.phi.clone().unwrap_or_else(|| {
            let deg: Vec<f64> = (0..f.n).map(|v| g.degree(v) as f64).collect();
            let (lo, hi) = (deg.iter().cloned().fold(f64::MAX, f64::min), deg.iter().cloned().fold(0.0, f64::max));
            deg.iter().map(|d| (d - lo) / (hi - lo)).collect()
        });
        let profile = DensityProfile { metric: DensityMetric::Degree, raw: phi.clone(), phi: phi.clone() };
        let tau = independent_threshold(&phi, f.rule);
        if resolve_threshold(&profile, f.rule) != tau {
            problems.push(format!("fixture {i}: threshold"));
        }
        let dist = transition_distribution(&g, &profile, f.from, tau).unwrap();
        let reference = common::reference_step(&g, &phi, f.from, tau);
        let expected = f.hand.as_ref().unwrap_or(&reference);
        if dist.len() != expected.len()
            || dist.iter().zip(expected).any(|(a, b)| (a - b).abs() > WALK_FORMULA_TOL)
            || dist.iter().zip(&reference).any(|(a, b)| (a - b).abs() > WALK_FORMULA_TOL)
        {
            problems.push(format!("fixture {i}: {dist:?} vs {expected:?}"));
        }

        let cfg = WalkConfig { walk_length: 1, walks_per_node: WALK_SAMPLES, seed: 1000 + i as u64, threshold_rule: f.rule };
        let corpus = generate_walks_with(Execution::default(), &g, &profile, &cfg).unwrap();
        let nbrs = g.neighbors(f.from);
        let mut counts = vec![0usize; nbrs.len()];
        for w in &corpus.walks[f.from * WALK_SAMPLES..(f.from + 1) * WALK_SAMPLES] {
            counts[nbrs.binary_search(&w[1]).unwrap()] += 1;
        }
        for (j, (&c, &p)) in counts.iter().zip(&dist).enumerate() {
            checked += 1;
            let freq = c as f64 / WALK_SAMPLES as f64;
            if (freq - p).abs() > common::three_sigma(p, WALK_SAMPLES) {
                problems.push(format!("fixture {i} neighbor {j}: {freq} vs {p:.4}"));
            }
        }
    }
    verdict(
        problems.is_empty(),
        format!(
            "{} fixtures exact to {WALK_FORMULA_TOL:e}, {checked} step frequencies within 3 sigma over {WALK_SAMPLES} samples{}",
            fixtures.len(),
            if problems.is_empty() { String::new() } else { format!("; {}", problems.join("; ")) }
        ),
    )
}

fn random_features(n: usize, d: usize, rng: &mut impl Rng) -> Array2<f64> {
    Array2::from_shape_fn((n, d), |_| rng.random_range(-1.0..1.0))
}

// 4
fn gradient_checks() -> Outcome {
    let g = common::barbell();
    let profile = density_profile(&g, DensityMetric::Degree);
    let mut sgns_worst = 0.0f64;
    for seed in 0..5 {
        let cfg = WalkConfig { walk_length: 8, walks_per_node: 1, seed, threshold_rule: ThresholdRule::Median };
        let corpus = generate_walks_with(Execution::Sequential, &g, &profile, &cfg).unwrap();
        let fixture = SgnsFixture::from_corpus(&corpus, g.node_count(), 8, 2, 5, 40, seed);
        sgns_worst = sgns_worst.max(gradient_check_sgns(&fixture, 1e-5));
    }

    let mut rng = common::rng(4);
    let fixtures: Vec<(Graph, Array2<f64>, usize)> = (0..4)
        .map(|i| {
            let g = common::gnp(5 + 2 * i, 0.4, &mut rng);
            let x = random_features(g.node_count(), 3, &mut rng);
            (g, x, i % 3)
        })
        .collect();
    let mut mpnn = Vec::new();
    for variant in Variant::ALL {
        let mut m = Model::new(variant, 3, 6, 2, 3, 17);
        // Zero-initialized biases would put ReLU inputs exactly on the kink.
        for t in m.tensors_mut() {
            t.mapv_inplace(|w| w + rng.random_range(-0.1..0.1));
        }
        let r = gradient_check_mpnn(&m, &fixtures, 1e-5);
        mpnn.push((variant, r.per_tensor.len(), r.max_relative_error));
    }
    let mpnn_ok = mpnn.iter().all(|&(_, _, e)| e < MPNN_GRAD_TOL);
    let detail: Vec<String> = mpnn.iter().map(|(v, t, e)| format!("{v} {e:.1e} over {t} tensors")).collect();
    verdict(
        sgns_worst < SGNS_GRAD_TOL && mpnn_ok,
        format!(
            "SGNS max rel err {sgns_worst:.1e} (limit {SGNS_GRAD_TOL:e}); MPNN {} (limit {MPNN_GRAD_TOL:e})",
            detail.join(", ")
        ),
    )
}

// 5
fn permutation_invariance() -> Outcome {
    let mut rng = common::rng(5);
    let mut worst = Vec::new();
    for variant in Variant::ALL {
        let g = common::gnp(30, 0.2, &mut rng);
        let x = random_features(30, 5, &mut rng);
        let m = Model::new(variant, 5, 16, 2, 3, 5);
        let base = m.probabilities(&g, &x).unwrap();
        let mut max_diff = 0.0f64;
        for _ in 0..RELABELINGS {
            let perm = common::random_permutation(30, &mut rng);
            let h = g.relabel(&perm).unwrap();
            let mut y = Array2::zeros(x.raw_dim());
            for v in 0..30 {
                y.row_mut(perm[v]).assign(&x.row(v));
            }
            let p = m.probabilities(&h, &y).unwrap();
            max_diff = base.iter().zip(&p).fold(max_diff, |acc, (a, b)| acc.max((a - b).abs()));
        }
        worst.push((variant, max_diff));
    }
    let detail: Vec<String> = worst.iter().map(|(v, d)| format!("{v} {d:.1e}")).collect();
    verdict(
        worst.iter().all(|&(_, d)| d < PERMUTATION_TOL),
        format!("{RELABELINGS} relabelings per variant, max change {} (limit {PERMUTATION_TOL:e})", detail.join(", ")),
    )
}

fn planted_config(data: &Path, out: &Path) -> RunConfig {
    RunConfig {
        dataset_root: data.to_path_buf(),
        output_dir: out.to_path_buf(),
        task: TaskKind::Binary,
        density_metrics: vec![DensityMetric::Degree],
        threshold_rules: vec![ThresholdRule::FixedHalf],
        input_modes: vec![InputMode::Rww],
        variants: Variant::ALL.to_vec(),
        hidden_dims: vec![128],
        learning_rates: vec![1e-3],
        seeds: vec![1, 2, 3],
        epochs: 60,
        patience: 10,
        ..RunConfig::default()
    }
}

// 6
fn planted_end_to_end() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let data_dir = dir.path().join("data");
    let start = Instant::now();
    let data = generate_synthetic(&GeneratorConfig::default()).expect("synthetic dataset");
    write_dataset(&data, &data_dir).expect("write dataset");
    let cfg = planted_config(&data_dir, &dir.path().join("out"));
    let outcome = match run_pipeline(&cfg, Execution::default()) {
        Ok(o) => o,
        Err(e) => return Outcome::Fail(format!("pipeline error: {e}")),
    };
    let elapsed = start.elapsed();
    let mut parts = Vec::new();
    let mut ok = outcome.sweep.failures.is_empty() && elapsed <= PLANTED_TIME_LIMIT;
    for variant in Variant::ALL {
        match outcome.sweep.reports.iter().find(|r| r.cell.variant == variant) {
            Some(r) => {
                ok &= r.accuracy.mean >= PLANTED_MIN_ACCURACY;
                parts.push(format!("{variant} {}", r.accuracy));
            }
            None => {
                ok = false;
                parts.push(format!("{variant} missing"));
            }
        }
    }
    verdict(
        ok,
        format!(
            "{} graphs, seeds {:?}, test accuracy {} (min {PLANTED_MIN_ACCURACY}), {} (limit {})",
            data.len(),
            cfg.seeds,
            parts.join(", "),
            secs(elapsed),
            secs(PLANTED_TIME_LIMIT)
        ),
    )
}

fn len_root() -> Option<PathBuf> {
    let candidates = std::env::var_os("DECODE_LEN_ROOT")
        .map(PathBuf::from)
        .into_iter()
        .chain([Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/LEN")]);
    candidates.into_iter().find(|p| p.join("labels.json").is_file())
}

const LEN_MISSING: &str = "LEN dataset not found (set DECODE_LEN_ROOT); not evaluated";

// 7
fn len_density_direction() -> Outcome {
    let Some(root) = len_root() else {
        return Outcome::NotAvailable(LEN_MISSING.into());
    };
    let raw = match load_dataset(&root) {
        Ok(d) => d,
        Err(e) => return Outcome::Fail(format!("cannot load {}: {e}", root.display())),
    };
    let cfg = RunConfig { dataset_root: root, ..RunConfig::default() };
    let data = match prepare_task(&raw, &cfg) {
        Ok(d) => d,
        Err(e) => return Outcome::Fail(format!("binary task mapping: {e}")),
    };
    let Some(pos) = data.class_names().iter().position(|c| c == "campaign") else {
        return Outcome::Fail(format!("no 'campaign' class in {:?}", data.class_names()));
    };
    // Mean over graphs of each graph's mean node value.
    let mean_by_class = |f: &dyn Fn(&Graph) -> Vec<usize>| -> (f64, f64) {
        let mut sums = [(0.0, 0usize); 2];
        for (g, &l) in data.graphs().iter().zip(data.labels()) {
            if g.node_count() == 0 {
                continue;
            }
            let v = f(g);
            let slot = usize::from(l != pos);
            sums[slot].0 += v.iter().sum::<usize>() as f64 / v.len() as f64;
            sums[slot].1 += 1;
        }
        (sums[0].0 / sums[0].1 as f64, sums[1].0 / sums[1].1 as f64)
    };
    let deg = mean_by_class(&|g| (0..g.node_count()).map(|v| g.degree(v)).collect());
    let core = mean_by_class(&|g| core_numbers(g));
    verdict(
        deg.0 > deg.1 && core.0 > core.1,
        format!(
            "mean degree campaign {:.3} vs other {:.3}; mean core campaign {:.3} vs other {:.3}",
            deg.0, deg.1, core.0, core.1
        ),
    )
}

fn cell<'a>(reports: &'a [MetricsReport], variant: Variant, mode: InputMode) -> Option<&'a MetricsReport> {
    reports.iter().find(|r| r.cell.variant == variant && r.cell.input_mode == mode)
}

// 8
fn len_reproduction() -> Outcome {
    let Some(root) = len_root() else {
        return Outcome::NotAvailable(LEN_MISSING.into());
    };
    let dir = tempfile::tempdir().unwrap();
    let base = RunConfig {
        dataset_root: root,
        cache_dir: Some(dir.path().join("cache")),
        density_metrics: vec![DensityMetric::Degree],
        input_modes: vec![InputMode::Nf, InputMode::Rww],
        variants: Variant::ALL.to_vec(),
        hidden_dims: vec![128],
        learning_rates: vec![1e-3],
        ..RunConfig::default()
    };
    let binary = RunConfig {
        task: TaskKind::Binary,
        threshold_rules: vec![ThresholdRule::FixedHalf],
        output_dir: dir.path().join("binary"),
        ..base.clone()
    };
    let multi = RunConfig {
        task: TaskKind::Multiclass,
        threshold_rules: vec![ThresholdRule::Midpoint],
        output_dir: dir.path().join("multiclass"),
        ..base
    };
    let (b, m) = match (run_pipeline(&binary, Execution::default()), run_pipeline(&multi, Execution::default())) {
        (Ok(b), Ok(m)) => (b.sweep.reports, m.sweep.reports),
        (Err(e), _) | (_, Err(e)) => return Outcome::Fail(format!("pipeline error: {e}")),
    };
    let mut ordering = Vec::new();
    for (task, reports) in [(Task::Binary, &b), (Task::Multiclass, &m)] {
        for v in Variant::ALL {
            if let (Some(nf), Some(rww)) = (cell(reports, v, InputMode::Nf), cell(reports, v, InputMode::Rww)) {
                if rww.accuracy.mean <= nf.accuracy.mean {
                    ordering.push(format!("{task} {v}: RWW {:.3} <= NF {:.3}", rww.accuracy.mean, nf.accuracy.mean));
                }
            } else {
                ordering.push(format!("{task} {v}: cell missing"));
            }
        }
    }
    let sage = cell(&b, Variant::Sage, InputMode::Rww);
    let gin = cell(&m, Variant::Gin, InputMode::Rww);
    let near = |x: f64, reference: f64| (x - reference).abs() <= LEN_BAND;
    let band = match (sage, gin) {
        (Some(s), Some(g)) => format!(
            "non-gating: SAGE binary acc {} ({}), F1 {} ({}); GIN multiclass acc {} ({})",
            s.accuracy,
            if near(s.accuracy.mean, REFERENCE_SAGE_BINARY_ACCURACY) { "in band" } else { "out of band" },
            s.f1.map_or("n/a".into(), |f| f.to_string()),
            if s.f1.is_some_and(|f| near(f.mean, REFERENCE_SAGE_BINARY_F1)) { "in band" } else { "out of band" },
            g.accuracy,
            if near(g.accuracy.mean, REFERENCE_GIN_MULTICLASS_ACCURACY) { "in band" } else { "out of band" },
        ),
        _ => "non-gating cells missing".into(),
    };
    verdict(
        ordering.is_empty(),
        format!(
            "RWW > NF for every variant: {}; {band}",
            if ordering.is_empty() { "yes".to_string() } else { ordering.join("; ") }
        ),
    )
}

// 9
fn metric_oracles() -> Outcome {
    let mut rng = common::rng(9);
    let mut auc_worst = 0.0f64;
    let mut f1_worst = 0.0f64;
    for _ in 0..METRIC_FIXTURES {
        let n = rng.random_range(4..200);
        let mut labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
        labels[0] = true;
        labels[1] = false;
        let levels = rng.random_range(2..50);
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64 / levels as f64).collect();
        let (_, auc) = roc_auc(&scores, &labels).unwrap();
        auc_worst = auc_worst.max((auc - common::mann_whitney_auc(&scores, &labels)).abs());

        let k = rng.random_range(2..8);
        let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let preds: Vec<usize> =
            truth.iter().map(|&t| if rng.random_bool(0.6) { t } else { rng.random_range(0..k) }).collect();
        let cm = confusion_matrix(&preds, &truth, k).unwrap();
        let m = macro_f1(&preds, &truth, k).unwrap();
        f1_worst = f1_worst.max((m - common::macro_f1_from_confusion(&cm)).abs());
    }
    verdict(
        auc_worst <= METRIC_TOL && f1_worst <= METRIC_TOL,
        format!(
            "{METRIC_FIXTURES} fixtures: |AUC - U/(n+ n-)| max {auc_worst:.1e}, macro-F1 vs confusion max {f1_worst:.1e} (limit {METRIC_TOL:e})"
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("density oracle equivalence", density_oracles),
        ("density scale check", density_scale),
        ("walk-law correctness", walk_law),
        ("gradient checks", gradient_checks),
        ("permutation invariance", permutation_invariance),
        ("planted end-to-end classification", planted_end_to_end),
        ("LEN density-separation direction", len_density_direction),
        ("LEN reproduction (ordering gating, bands not)", len_reproduction),
        ("metric oracle equivalence", metric_oracles),
    ];
    let only: Option<Vec<usize>> =
        std::env::var("ACCEPTANCE_ONLY").ok().map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.into_iter().enumerate() {
        let id = i + 1;
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|e| {
                let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
                Outcome::Fail(format!("panicked: {}", msg.unwrap_or_default()))
            });
        println!("criterion {id} [{name}] {outcome} ({})", secs(start.elapsed()));
        if matches!(outcome, Outcome::Fail(_)) {
            failed.push(id);
        }
    }
    if !failed.is_empty() {
        eprintln!("acceptance failed: criteria {failed:?}");
        std::process::exit(1);
    }
}
