use ndarray::Array2;

use super::layers::Structure;
use super::model::Model;
use crate::embed::{relative_error, roundoff_floor};
use crate::Graph;

/// Worst relative error per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub per_tensor: Vec<(String, f64)>,
    pub max_relative_error: f64,
}

/// Compare the analytic gradient of the summed cross-entropy over `fixtures`
/// (graph, node inputs, label) with central differences of step `h`, for
/// every entry of every parameter tensor.
pub fn gradient_check_mpnn(model: &Model, fixtures: &[(Graph, Array2<f64>, usize)], h: f64) -> GradCheckReport {
    let prepared: Vec<(Structure, &Array2<f64>, usize)> =
        fixtures.iter().map(|(g, x, y)| (Structure::new(g), x, *y)).collect();
    let total_loss = |m: &Model| -> f64 {
        prepared.iter().map(|(s, x, y)| m.loss(s, x, *y, 1.0).expect("fixture dimensions")).sum()
    };
    let mut analytic = model.zeros_like();
    for (s, x, y) in &prepared {
        let (_, g) = model.loss_and_grad(s, x, *y, 1.0).expect("fixture dimensions");
        analytic.add_assign(&g);
    }

    let names: Vec<String> = model.tensors().into_iter().map(|(n, _)| n).collect();
    let analytic_tensors: Vec<Array2<f64>> = analytic.tensors().into_iter().map(|(_, t)| t.clone()).collect();
    let mut probe = model.clone();
    let mut per_tensor = Vec::with_capacity(names.len());
    for (t, name) in names.into_iter().enumerate() {
        let mut worst = 0.0f64;
        for idx in ndarray::indices(analytic_tensors[t].raw_dim()) {
            let original = probe.tensors_mut()[t][idx];
            probe.tensors_mut()[t][idx] = original + h;
            let up = total_loss(&probe);
            probe.tensors_mut()[t][idx] = original - h;
            let down = total_loss(&probe);
            probe.tensors_mut()[t][idx] = original;
            let numeric = (up - down) / (2.0 * h);
            worst = worst.max(relative_error(analytic_tensors[t][idx], numeric, roundoff_floor(up, down, h)));
        }
        per_tensor.push((name, worst));
    }
    let max_relative_error = per_tensor.iter().map(|(_, e)| *e).fold(0.0, f64::max);
    GradCheckReport { per_tensor, max_relative_error }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mpnn::Variant;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fixtures() -> Vec<(Graph, Array2<f64>, usize)> {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let graphs = [
            Graph::from_edges(5, [(0, 1), (1, 2), (2, 0), (2, 3)]).unwrap(),
            Graph::from_edges(6, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0), (0, 3)]).unwrap(),
        ];
        graphs
            .into_iter()
            .enumerate()
            .map(|(i, g)| {
                let x = Array2::from_shape_fn((g.node_count(), 3), |_| rng.random_range(-1.0..1.0));
                (g, x, i % 2)
            })
            .collect()
    }

    #[test]
    fn every_variant_and_tensor_passes() {
        for v in Variant::ALL {
            let mut model = Model::new(v, 3, 4, 2, 2, 5);
            // Move GIN's ε off zero.
            for t in model.tensors_mut() {
                if t.len() == 1 {
                    t.fill(0.3);
                }
            }
            let report = gradient_check_mpnn(&model, &fixtures(), 1e-5);
            assert_eq!(report.per_tensor.len(), model.tensors().len());
            assert!(report.max_relative_error < 1e-4, "{v}: {:?}", report.per_tensor);
        }
    }
}
