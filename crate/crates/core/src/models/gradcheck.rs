//! Finite-difference verification of analytic network gradients.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::nn::{Network, Shape};
use super::{CnnMode, ModelError, ModelKind, ModelSpec, Pooling, Result};
use crate::features::{InputData, ModelInput, TermVector};
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradCheck {
    pub checked: usize,
    pub max_rel_error: f64,
}

const STEP: f64 = 1e-5;
/// Below this magnitude errors are measured absolutely.
const FLOOR: f64 = 1e-6;

/// Compare analytic gradients of the regularised loss (dropout off) with
/// central differences on up to `samples` randomly chosen parameters.
pub fn gradient_check(
    net: &Network,
    xs: &[ModelInput],
    ys: &[f64],
    lambda: f64,
    samples: usize,
    seed: u64,
) -> Result<GradCheck> {
    let refs: Vec<&ModelInput> = xs.iter().collect();
    let analytic = net.loss_grad(&refs, ys, lambda)?;
    let coords: Vec<(usize, usize)> =
        analytic.iter().enumerate().flat_map(|(t, g)| (0..g.len()).map(move |i| (t, i))).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = index::sample(&mut rng, coords.len(), samples.min(coords.len()));
    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    for k in picks.iter() {
        let (t, i) = coords[k];
        let original = probe.param_tensors_mut()[t][i];
        probe.param_tensors_mut()[t][i] = original + STEP;
        let up = probe.loss(&refs, ys, lambda)?;
        probe.param_tensors_mut()[t][i] = original - STEP;
        let down = probe.loss(&refs, ys, lambda)?;
        probe.param_tensors_mut()[t][i] = original;
        let numeric = (up - down) / (2.0 * STEP);
        let a = analytic[t][i];
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(FLOOR);
        worst = worst.max(err);
    }
    Ok(GradCheck { checked: picks.len(), max_rel_error: worst })
}

/// Build a randomized small network of `kind` with a matching batch and run
/// [`gradient_check`] on it. Used by the gradient test suite.
pub fn random_trial(kind: ModelKind, seed: u64) -> Result<GradCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let aux = if rng.gen_bool(0.5) { 5 } else { 0 };
    let batch = rng.gen_range(2..=4);
    let (spec, shape) = match kind {
        ModelKind::Ffnn => {
            let spec = ModelSpec::Ffnn { hidden: [4, 3], dropout: 0.25 };
            (spec, Shape::Sparse(rng.gen_range(5..12)))
        }
        ModelKind::CnnBow => {
            let pool = if rng.gen_bool(0.5) { Pooling::Global } else { Pooling::Window(2) };
            let spec = ModelSpec::Cnn {
                mode: CnnMode::Bow,
                filters: rng.gen_range(1..=3),
                kernel: rng.gen_range(2..=4),
                pool: Some(pool),
                dropout: 0.5,
                dense: [4, 3],
            };
            (spec, Shape::Sparse(rng.gen_range(10..20)))
        }
        ModelKind::CnnEmbedding => {
            let pool = if rng.gen_bool(0.5) { Pooling::Global } else { Pooling::Window(2) };
            let spec = ModelSpec::Cnn {
                mode: CnnMode::Embedding,
                filters: rng.gen_range(1..=3),
                kernel: 3,
                pool: Some(pool),
                dropout: 0.5,
                dense: [4, 3],
            };
            (spec, Shape::Dense(rng.gen_range(6..10), rng.gen_range(2..5)))
        }
        ModelKind::Lstm => {
            let spec = ModelSpec::Lstm { units: 3, dense: [4, 3] };
            let shape = if rng.gen_bool(0.5) { Shape::Dense(4, 3) } else { Shape::OneHot(0, 6) };
            (spec, shape)
        }
        other => return Err(ModelError::Unsupported(format!("{other} has no gradient")))
    };
    let mut net = spec.build_network(shape, aux, &mut rng)?;
    // nonzero biases so no unit starts exactly at a ReLU kink
    for t in net.param_tensors_mut() {
        if t.len() < 16 {
            t.iter_mut().for_each(|v| *v += rng.gen_range(-0.1..0.1));
        }
    }
    let xs: Vec<ModelInput> = (0..batch)
        .map(|_| {
            let main = match shape {
                Shape::Sparse(n) => InputData::Sparse(TermVector::from_dense(
                    &(0..n).map(|_| if rng.gen_bool(0.6) { rng.gen_range(-1.0..1.0) } else { 0.0 }).collect::<Vec<_>>(),
                )),
                Shape::Dense(r, c) => {
                    InputData::Dense(Matrix::from_vec(r, c, (0..r * c).map(|_| rng.gen_range(-1.0..1.0)).collect()))
                }
                Shape::OneHot(_, dim) => {
                    let len = rng.gen_range(1..=4);
                    let ids = (0..len).map(|_| if rng.gen_bool(0.8) { Some(rng.gen_range(0..dim)) } else { None });
                    InputData::OneHot { ids: ids.collect(), dim }
                }
            };
            ModelInput { main, aux: (0..aux).map(|_| rng.gen_range(0.0..1.0)).collect() }
        })
        .collect();
    let ys: Vec<f64> = (0..batch).map(|i| (i % 2) as f64).collect();
    gradient_check(&net, &xs, &ys, 1e-3, 60, seed)
}
