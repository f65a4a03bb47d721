//! Logistic regression and linear SVM over sparse feature vectors.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::nn::{bce_with_logit, sigmoid};
use super::{ModelError, ModelKind, Result, TrainConfig};
use crate::features::{TermVector, Vocabulary, REVIEWER_FEATURE_NAMES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub kind: ModelKind,
    pub weights: Vec<f64>,
    pub bias: f64,
    /// `(a, c)` of the margin-to-probability map `sigmoid(a * margin + c)`;
    /// identity `(1, 0)` for logistic regression.
    pub calibration: (f64, f64),
}

impl LinearModel {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// Pre-sigmoid score `w.x + b`.
    pub fn margin(&self, x: &TermVector) -> f64 {
        x.dot(&self.weights) + self.bias
    }

    pub fn probability(&self, x: &TermVector) -> f64 {
        let (a, c) = self.calibration;
        sigmoid(a * self.margin(x) + c)
    }

    pub fn weight_norm(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum::<f64>().sqrt()
    }
}

fn check_data(xs: &[TermVector], ys: &[f64]) -> Result<usize> {
    if xs.len() != ys.len() {
        return Err(ModelError::Shape(format!("{} inputs vs {} targets", xs.len(), ys.len())));
    }
    if xs.len() < 2 || !ys.contains(&1.0) || !ys.contains(&0.0) {
        return Err(ModelError::InvalidConfig("training needs at least two samples covering both classes".into()));
    }
    let dim = xs[0].dim();
    if let Some(x) = xs.iter().find(|x| x.dim() != dim) {
        return Err(ModelError::Shape(format!("mixed input dimensions {dim} and {}", x.dim())));
    }
    Ok(dim)
}

/// L2-regularised cross-entropy minimised by mini-batch gradient descent
/// with a fixed learning rate.
pub fn train_logistic_regression(xs: &[TermVector], ys: &[f64], cfg: &TrainConfig) -> Result<LinearModel> {
    cfg.validate()?;
    let dim = check_data(xs, ys)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut grad = vec![0.0; dim];
    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut grad_b = 0.0;
            let mut loss = 0.0;
            for &i in batch {
                let z = xs[i].dot(&w) + b;
                loss += bce_with_logit(z, ys[i]);
                let r = (sigmoid(z) - ys[i]) * scale;
                for &(j, v) in xs[i].entries() {
                    grad[j] += r * v;
                }
                grad_b += r;
            }
            if !loss.is_finite() {
                return Err(ModelError::Divergence { epoch });
            }
            let decay = 1.0 - 2.0 * cfg.learning_rate * cfg.l2_lambda;
            for (wj, gj) in w.iter_mut().zip(&grad) {
                *wj = decay * *wj - cfg.learning_rate * gj;
            }
            b -= cfg.learning_rate * grad_b;
        }
        if !b.is_finite() || w.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::Divergence { epoch });
        }
    }
    Ok(LinearModel { kind: ModelKind::LogisticRegression, weights: w, bias: b, calibration: (1.0, 0.0) })
}

/// Hinge loss with L2 penalty, minimised by mini-batch Pegasos subgradient
/// steps (learning rate `1 / (lambda * t)`). The bias is an extra weight on
/// a constant feature. Probabilities come from a sigmoid fitted to the
/// training margins.
pub fn train_linear_svm(xs: &[TermVector], ys: &[f64], cfg: &TrainConfig) -> Result<LinearModel> {
    cfg.validate()?;
    let dim = check_data(xs, ys)?;
    if cfg.l2_lambda <= 0.0 {
        return Err(ModelError::InvalidConfig("train.l2_lambda: the SVM needs a positive regulariser".into()));
    }
    let lambda = cfg.l2_lambda;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut step = vec![0.0; dim];
    let mut t = 0usize;
    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            step.iter_mut().for_each(|s| *s = 0.0);
            let mut step_b = 0.0;
            for &i in batch {
                let y = 2.0 * ys[i] - 1.0;
                if y * (xs[i].dot(&w) + b) < 1.0 {
                    for &(j, v) in xs[i].entries() {
                        step[j] += y * v;
                    }
                    step_b += y;
                }
            }
            let shrink = 1.0 - eta * lambda;
            let k = eta / batch.len() as f64;
            for (wj, sj) in w.iter_mut().zip(&step) {
                *wj = shrink * *wj + k * sj;
            }
            b = shrink * b + k * step_b;
        }
        if !b.is_finite() || w.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::Divergence { epoch });
        }
    }
    let margins: Vec<f64> = xs.iter().map(|x| x.dot(&w) + b).collect();
    let calibration = fit_platt(&margins, ys);
    Ok(LinearModel { kind: ModelKind::LinearSvm, weights: w, bias: b, calibration })
}

/// Fit `p = sigmoid(a * m + c)` to margins by Newton's method on the
/// cross-entropy, using smoothed targets so separable data stays finite.
pub fn fit_platt(margins: &[f64], ys: &[f64]) -> (f64, f64) {
    let n_pos = ys.iter().filter(|&&y| y >= 0.5).count() as f64;
    let n_neg = ys.len() as f64 - n_pos;
    let hi = (n_pos + 1.0) / (n_pos + 2.0);
    let lo = 1.0 / (n_neg + 2.0);
    let targets: Vec<f64> = ys.iter().map(|&y| if y >= 0.5 { hi } else { lo }).collect();
    let (mut a, mut c) = (1.0, 0.0);
    let objective = |a: f64, c: f64| -> f64 {
        margins.iter().zip(&targets).map(|(&m, &t)| bce_with_logit(a * m + c, t)).sum()
    };
    let mut current = objective(a, c);
    for _ in 0..100 {
        let (mut ga, mut gc, mut haa, mut hac, mut hcc) = (0.0, 0.0, 1e-12, 0.0, 1e-12);
        for (&m, &t) in margins.iter().zip(&targets) {
            let p = sigmoid(a * m + c);
            let d = p - t;
            let s = p * (1.0 - p);
            ga += d * m;
            gc += d;
            haa += s * m * m;
            hac += s * m;
            hcc += s;
        }
        let det = haa * hcc - hac * hac;
        if det.abs() < 1e-300 {
            break;
        }
        let da = (hcc * ga - hac * gc) / det;
        let dc = (haa * gc - hac * ga) / det;
        let mut step = 1.0;
        loop {
            let (na, nc) = (a - step * da, c - step * dc);
            let value = objective(na, nc);
            if value <= current + 1e-12 {
                a = na;
                c = nc;
                let improved = current - value;
                current = value;
                if improved < 1e-10 {
                    return (a, c);
                }
                break;
            }
            step *= 0.5;
            if step < 1e-10 {
                return (a, c);
            }
        }
    }
    (a, c)
}

/// One term's signed share of a linear score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contribution {
    pub term: String,
    pub contribution: f64,
}

/// Per-feature contributions `w_i * x_i` for the nonzero features of `x`,
/// ordered by absolute size. Indices past the vocabulary name the appended
/// reviewer features. Contributions plus the bias sum to the margin.
pub fn explain_linear(model: &LinearModel, x: &TermVector, vocab: Option<&Vocabulary>) -> Vec<Contribution> {
    let v_len = vocab.map_or(0, Vocabulary::len);
    let mut out: Vec<Contribution> = x
        .entries()
        .iter()
        .map(|&(i, v)| {
            let term = match vocab {
                Some(voc) if i < v_len => voc.term(i).map_or_else(|| format!("#{i}"), str::to_owned),
                Some(_) => REVIEWER_FEATURE_NAMES
                    .get(i - v_len)
                    .map_or_else(|| format!("#{i}"), |n| format!("reviewer:{n}")),
                None => format!("#{i}"),
            };
            Contribution { term, contribution: model.weights[i] * v }
        })
        .collect();
    out.sort_by(|a, b| b.contribution.abs().total_cmp(&a.contribution.abs()).then_with(|| a.term.cmp(&b.term)));
    out
}
