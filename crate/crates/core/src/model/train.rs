use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{
    loss_and_gradients, mean_loss, predict_proba_batch, rank_labels, TrainingExample,
};
use super::params::init_with_rng;
use super::{ModelConfig, ModelError, UnifiedModelParams};
use crate::scalar::Real;

/// One row of the training log. Epoch 0 describes the initial parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub val_top1: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub params: UnifiedModelParams<T>,
    pub best_epoch: usize,
    pub log: Vec<EpochLog>,
}

fn top1_accuracy<T: Real>(
    params: &UnifiedModelParams<T>,
    config: &ModelConfig,
    examples: &[TrainingExample<T>],
) -> Result<f64, ModelError> {
    let probs = predict_proba_batch(params, config, examples)?;
    let hits = probs
        .iter()
        .zip(examples)
        .filter(|(p, ex)| rank_labels(p)[0] == ex.target)
        .count();
    Ok(hits as f64 / examples.len() as f64)
}

fn validation<T: Real>(
    params: &UnifiedModelParams<T>,
    config: &ModelConfig,
    val: &[TrainingExample<T>],
) -> Result<(Option<f64>, Option<f64>), ModelError> {
    if val.is_empty() {
        return Ok((None, None));
    }
    let loss = mean_loss(params, config, val)?.to_f64_lossy();
    Ok((Some(loss), Some(top1_accuracy(params, config, val)?)))
}

/// Mini-batch gradient descent from a seeded Glorot initialization.
///
/// The same ChaCha8 stream initializes the weights and then shuffles the
/// training order each epoch. With a validation set the returned parameters
/// are those with the lowest validation loss (initial ones included);
/// without one they are the final parameters.
pub fn train<T: Real>(
    config: &ModelConfig,
    train: &[TrainingExample<T>],
    val: &[TrainingExample<T>],
    seed: u64,
) -> Result<TrainOutcome<T>, ModelError> {
    config.validate()?;
    if train.is_empty() {
        return Err(ModelError::NoTrainingData);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params: UnifiedModelParams<T> = init_with_rng(config, &mut rng);
    let lr = T::from_f64_lossy(config.learning_rate);

    let (val_loss, val_top1) = validation(&params, config, val)?;
    let mut log = vec![EpochLog {
        epoch: 0,
        train_loss: mean_loss(&params, config, train)?.to_f64_lossy(),
        val_loss,
        val_top1,
    }];
    let mut best = (0usize, val_loss, params.clone());

    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for (step, idx) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<&TrainingExample<T>> = idx.iter().map(|&i| &train[i]).collect();
            let (loss, grads) = loss_and_gradients(&params, config, &batch)?;
            let loss = loss.to_f64_lossy();
            if !loss.is_finite() {
                return Err(ModelError::Divergence { epoch, step, loss });
            }
            params.axpy(-lr, &grads);
            if !params.all_finite() {
                return Err(ModelError::Divergence { epoch, step, loss });
            }
            loss_sum += loss * batch.len() as f64;
        }
        let train_loss = loss_sum / train.len() as f64;
        let (val_loss, val_top1) = validation(&params, config, val)?;
        match (val_loss, val_top1) {
            (Some(l), Some(a)) => log::info!(
                "epoch {epoch}: train_loss {train_loss:.6} val_loss {l:.6} val_top1 {a:.4}"
            ),
            _ => log::info!("epoch {epoch}: train_loss {train_loss:.6}"),
        }
        log.push(EpochLog {
            epoch,
            train_loss,
            val_loss,
            val_top1,
        });
        let improved = match (val_loss, best.1) {
            (Some(v), Some(b)) => v < b,
            _ => true,
        };
        if improved {
            best = (epoch, val_loss, params.clone());
        }
    }
    Ok(TrainOutcome {
        params: best.2,
        best_epoch: best.0,
        log,
    })
}
