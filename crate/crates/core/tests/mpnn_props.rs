mod common;

use decode_core::mpnn::{gradient_check_mpnn, mean_pool, Model, Variant};
use decode_core::Graph;
use ndarray::Array2;
use proptest::prelude::*;
use rand::Rng;

fn features(n: usize, d: usize, seed: u64) -> Array2<f64> {
    let mut rng = common::rng(seed);
    Array2::from_shape_fn((n, d), |_| rng.random_range(-1.0..1.0))
}

fn arb_variant() -> impl Strategy<Value = Variant> {
    prop::sample::select(Variant::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn relabeling_leaves_outputs_unchanged(variant in arb_variant(), n in 1..25usize, p in 0.05..0.6f64, seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let g = common::gnp(n, p, &mut rng);
        let x = features(n, 4, seed ^ 1);
        let perm = common::random_permutation(n, &mut rng);
        let h = g.relabel(&perm).unwrap();
        let mut y = Array2::zeros(x.raw_dim());
        for v in 0..n {
            y.row_mut(perm[v]).assign(&x.row(v));
        }
        let m = Model::new(variant, 4, 8, 2, 3, seed);
        let a = m.probabilities(&g, &x).unwrap();
        let b = m.probabilities(&h, &y).unwrap();
        for (s, t) in a.iter().zip(&b) {
            prop_assert!((s - t).abs() < 1e-9);
        }
    }

    #[test]
    fn probabilities_form_a_distribution(variant in arb_variant(), n in 1..20usize, seed in any::<u64>()) {
        let g = common::gnp(n, 0.3, &mut common::rng(seed));
        let m = Model::new(variant, 3, 6, 2, 4, seed);
        let p = m.probabilities(&g, &features(n, 3, seed)).unwrap();
        prop_assert!((p.sum() - 1.0).abs() < 1e-9);
        prop_assert!(p.iter().all(|&q| (0.0..=1.0).contains(&q)));
    }

    #[test]
    fn pooling_is_the_row_mean(n in 1..30usize, d in 1..6usize, seed in any::<u64>()) {
        let h = features(n, d, seed);
        let pooled = mean_pool(&h);
        for j in 0..d {
            let direct = (0..n).map(|i| h[[i, j]]).sum::<f64>() / n as f64;
            prop_assert!((pooled[j] - direct).abs() < 1e-12);
        }
    }
}

#[test]
fn every_tensor_passes_gradient_check() {
    let fixtures: Vec<(Graph, Array2<f64>, usize)> = (0..3)
        .map(|i| {
            let g = common::gnp(6 + i, 0.5, &mut common::rng(i as u64));
            let x = features(g.node_count(), 3, 100 + i as u64);
            (g, x, i % 2)
        })
        .collect();
    for variant in Variant::ALL {
        let mut m = Model::new(variant, 3, 5, 2, 2, 7);
        // Zero-initialized biases put ReLU inputs exactly on the kink.
        let mut rng = common::rng(99);
        for t in m.tensors_mut() {
            t.mapv_inplace(|w| w + rng.random_range(-0.1..0.1));
        }
        let report = gradient_check_mpnn(&m, &fixtures, 1e-5);
        assert!(report.max_relative_error < 1e-4, "{variant}: {:?}", report.per_tensor);
        assert_eq!(report.per_tensor.len(), m.tensors().len());
    }
}
