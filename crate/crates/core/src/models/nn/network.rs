use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layers::{Act, Cache, Layer, Mode, Shape};
use crate::features::{InputData, ModelInput};
use crate::models::{ModelError, Result};
use crate::tensor::Matrix;

/// Sequential stack of layers ending in a single logit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub input: Shape,
    pub aux_width: usize,
    pub layers: Vec<Layer>,
}

/// Gradient buffers, one per parameter tensor in network order.
pub type Grads = Vec<Vec<f64>>;

/// Numerically stable binary cross-entropy on a logit.
pub fn bce_with_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn to_act(x: &ModelInput) -> Act {
    match &x.main {
        InputData::Sparse(v) => Act::Sparse(v.clone()),
        InputData::Dense(m) => Act::Dense(m.clone()),
        InputData::OneHot { ids, dim } => Act::OneHot { ids: ids.clone(), dim: *dim },
    }
}

impl Network {
    /// Check that the layer stack composes and ends in one logit.
    pub fn validate(&self) -> Result<()> {
        let mut shape = self.input;
        for layer in &self.layers {
            shape = layer.output_shape(shape)?;
        }
        if shape != Shape::Dense(1, 1) {
            return Err(ModelError::Shape(format!("network must end in a single output, ends in {shape:?}")));
        }
        for layer in &self.layers {
            if let Layer::Dropout { rate } = layer {
                if !(0.0..1.0).contains(rate) {
                    return Err(ModelError::InvalidConfig(format!("dropout rate {rate} outside [0, 1)")));
                }
            }
        }
        Ok(())
    }

    pub fn check_input(&self, x: &ModelInput) -> Result<()> {
        let actual = input_shape_of(x);
        if !self.input.accepts(actual) || x.aux.len() != self.aux_width {
            return Err(ModelError::Schema(format!(
                "model expects {:?} with {} user features, got {:?} with {}",
                self.input,
                self.aux_width,
                actual,
                x.aux.len()
            )));
        }
        Ok(())
    }

    pub fn zero_grads(&self) -> Grads {
        self.layers.iter().flat_map(|l| l.params().into_iter().map(|(_, _, p)| vec![0.0; p.len()])).collect()
    }

    pub fn param_tensors(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(|l| l.params().into_iter().map(|(_, _, p)| p)).collect()
    }

    pub fn param_tensors_mut(&mut self) -> Vec<&mut Vec<f64>> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    pub fn n_params(&self) -> usize {
        self.param_tensors().iter().map(|p| p.len()).sum()
    }

    /// Indices (into the flat tensor list) of L2-penalised tensors.
    pub fn l2_tensors(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut offset = 0;
        for layer in &self.layers {
            if let Some(i) = layer.l2_param() {
                out.push(offset + i);
            }
            offset += layer.param_count();
        }
        out
    }

    pub fn l2_penalty(&self, lambda: f64) -> f64 {
        let tensors = self.param_tensors();
        lambda * self.l2_tensors().into_iter().map(|i| tensors[i].iter().map(|w| w * w).sum::<f64>()).sum::<f64>()
    }

    fn forward_cached<R: Rng>(&self, x: &ModelInput, mode: &mut Mode<'_, R>) -> Result<(f64, Vec<Cache>)> {
        let mut act = to_act(x);
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (next, cache) = layer.forward(act, &x.aux, mode)?;
            act = next;
            caches.push(cache);
        }
        match act {
            Act::Dense(m) if m.len() == 1 => Ok((m.data()[0], caches)),
            other => Err(ModelError::Shape(format!("network output {:?}", other.shape()))),
        }
    }

    /// Inference logit (dropout off).
    pub fn logit(&self, x: &ModelInput) -> Result<f64> {
        Ok(self.forward_cached::<rand_chacha::ChaCha8Rng>(x, &mut Mode::Eval)?.0)
    }

    /// Per-sample cross-entropy; accumulates `scale * dL/dθ` into `grads`.
    pub fn accumulate<R: Rng>(
        &self,
        x: &ModelInput,
        target: f64,
        scale: f64,
        mode: &mut Mode<'_, R>,
        grads: &mut Grads,
    ) -> Result<f64> {
        let (z, caches) = self.forward_cached(x, mode)?;
        let loss = bce_with_logit(z, target);
        let mut g = Some(Matrix::row_vector(vec![scale * (sigmoid(z) - target)]));
        let mut end = grads.len();
        for (i, (layer, cache)) in self.layers.iter().zip(caches).enumerate().rev() {
            let start = end - layer.param_count();
            let Some(grad_out) = g.take() else { break };
            let upstream_params = self.layers[..i].iter().any(|l| l.param_count() > 0);
            g = layer.backward(cache, grad_out, &mut grads[start..end], upstream_params)?;
            end = start;
        }
        Ok(loss)
    }

    /// Add the L2 penalty gradient `2 * lambda * w`.
    pub fn add_l2_grad(&self, lambda: f64, grads: &mut Grads) {
        let tensors = self.param_tensors();
        for i in self.l2_tensors() {
            for (g, w) in grads[i].iter_mut().zip(tensors[i]) {
                *g += 2.0 * lambda * w;
            }
        }
    }

    /// Mean cross-entropy plus L2 penalty, dropout off.
    pub fn loss(&self, xs: &[&ModelInput], ys: &[f64], lambda: f64) -> Result<f64> {
        let mut total = 0.0;
        for (x, &y) in xs.iter().zip(ys) {
            total += bce_with_logit(self.logit(x)?, y);
        }
        Ok(total / xs.len() as f64 + self.l2_penalty(lambda))
    }

    /// Gradient of [`Network::loss`].
    pub fn loss_grad(&self, xs: &[&ModelInput], ys: &[f64], lambda: f64) -> Result<Grads> {
        let mut grads = self.zero_grads();
        let scale = 1.0 / xs.len() as f64;
        for (x, &y) in xs.iter().zip(ys) {
            self.accumulate::<rand_chacha::ChaCha8Rng>(x, y, scale, &mut Mode::Eval, &mut grads)?;
        }
        self.add_l2_grad(lambda, &mut grads);
        Ok(grads)
    }
}

/// Concrete shape of an input's word representation.
pub fn input_shape_of(x: &ModelInput) -> Shape {
    match &x.main {
        InputData::Sparse(v) => Shape::Sparse(v.dim()),
        InputData::Dense(m) => Shape::Dense(m.rows(), m.cols()),
        InputData::OneHot { ids, dim } => Shape::OneHot(ids.len(), *dim),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bce_matches_naive_formula() {
        for &(z, y) in &[(0.3, 1.0), (-2.0, 0.0), (4.0, 0.0), (-0.5, 1.0)] {
            let p = 1.0 / (1.0 + f64::exp(-z));
            let naive = -(y * p.ln() + (1.0 - y) * (1.0 - p).ln());
            assert!((bce_with_logit(z, y) - naive).abs() < 1e-12);
        }
        assert!(bce_with_logit(800.0, 0.0).is_finite());
        assert!(bce_with_logit(-800.0, 1.0).is_finite());
    }
}
