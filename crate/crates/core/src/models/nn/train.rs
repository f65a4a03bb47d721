use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Adam, Mode, Network};
use crate::features::ModelInput;
use crate::models::{ModelError, Result, TrainConfig};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

/// Split positions into (train, validation) keeping class proportions.
///
/// Returns no validation positions for a zero fraction, or when either class
/// has fewer than two members, since holding one out would leave a class
/// unrepresented.
pub fn stratified_holdout(ys: &[f64], fraction: f64, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
    let mut pos: Vec<usize> = (0..ys.len()).filter(|&i| ys[i] >= 0.5).collect();
    let mut neg: Vec<usize> = (0..ys.len()).filter(|&i| ys[i] < 0.5).collect();
    if fraction <= 0.0 || pos.len() < 2 || neg.len() < 2 {
        return ((0..ys.len()).collect(), Vec::new());
    }
    let mut train = Vec::new();
    let mut val = Vec::new();
    for class in [&mut pos, &mut neg] {
        class.shuffle(rng);
        let n_val = ((class.len() as f64 * fraction).round() as usize).clamp(1, class.len() - 1);
        val.extend_from_slice(&class[..n_val]);
        train.extend_from_slice(&class[n_val..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

/// Mini-batch Adam on cross-entropy plus L2, with early stopping on a
/// stratified validation holdout. The parameters of the best validation epoch
/// are restored at the end. A zero validation fraction trains for the full
/// epoch budget.
pub fn fit_network(net: &mut Network, xs: &[ModelInput], ys: &[f64], cfg: &TrainConfig) -> Result<TrainHistory> {
    cfg.validate()?;
    if xs.len() != ys.len() || xs.is_empty() {
        return Err(ModelError::Shape(format!("{} inputs vs {} targets", xs.len(), ys.len())));
    }
    for x in xs {
        net.check_input(x)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (mut train_idx, val_idx) = stratified_holdout(ys, cfg.validation_fraction, &mut rng);
    let val_x: Vec<&ModelInput> = val_idx.iter().map(|&i| &xs[i]).collect();
    let val_y: Vec<f64> = val_idx.iter().map(|&i| ys[i]).collect();

    let sizes: Vec<usize> = net.param_tensors().iter().map(|p| p.len()).collect();
    let mut opt = Adam::new(cfg.learning_rate, &sizes);
    let mut history = TrainHistory::default();
    let mut best: Option<(f64, Network)> = None;
    let mut waited = 0;

    for epoch in 0..cfg.max_epochs {
        train_idx.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in train_idx.chunks(cfg.batch_size) {
            let mut grads = net.zero_grads();
            let scale = 1.0 / batch.len() as f64;
            let mut batch_loss = 0.0;
            for &i in batch {
                batch_loss += net.accumulate(&xs[i], ys[i], scale, &mut Mode::Train(&mut rng), &mut grads)?;
            }
            net.add_l2_grad(cfg.l2_lambda, &mut grads);
            let loss = batch_loss * scale + net.l2_penalty(cfg.l2_lambda);
            if !loss.is_finite() || grads.iter().flatten().any(|g| !g.is_finite()) {
                return Err(ModelError::Divergence { epoch });
            }
            epoch_loss += batch_loss;
            opt.update(&mut net.param_tensors_mut(), &grads);
        }
        history.train_loss.push(epoch_loss / train_idx.len() as f64);

        if val_x.is_empty() {
            history.best_epoch = epoch;
            continue;
        }
        let val_loss = net.loss(&val_x, &val_y, cfg.l2_lambda)?;
        if !val_loss.is_finite() {
            return Err(ModelError::Divergence { epoch });
        }
        history.val_loss.push(val_loss);
        if best.as_ref().is_none_or(|(b, _)| val_loss < *b) {
            best = Some((val_loss, net.clone()));
            history.best_epoch = epoch;
            waited = 0;
        } else {
            waited += 1;
            if waited >= cfg.early_stop_patience {
                history.stopped_early = true;
                break;
            }
        }
    }
    if let Some((_, best_net)) = best {
        *net = best_net;
    }
    Ok(history)
}
