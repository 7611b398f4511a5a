#![allow(dead_code)]

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ucvf::model::{
    ChannelSpec, Conditioning, ModelConfig, TrainingExample, UnifiedModelParams, UserInput,
};
use ucvf::{DenseMatrix, ViewKind};

/// Two 6x4 channels, 2 filters, hidden width 8, three classes.
pub fn reduced_config() -> ModelConfig {
    ModelConfig {
        channels: vec![ChannelSpec::new("a", 6, 4), ChannelSpec::new("b", 6, 4)],
        filters: 2,
        kernel: 3,
        hidden: 8,
        indicator_dim: 2,
        context_dim: 3,
        classes: 3,
        target: ViewKind::RootCategory,
        conditioning: Conditioning::Indicator,
        learning_rate: 0.01,
        batch_size: 4,
        epochs: 1,
        seed: 0,
    }
}

pub fn random_examples(config: &ModelConfig, n: usize, seed: u64) -> Vec<TrainingExample<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let channels = config
                .channels
                .iter()
                .map(|c| {
                    let data = (0..c.rows * c.cols)
                        .map(|_| rng.random_range(0.0..1.0))
                        .collect();
                    DenseMatrix::from_vec(c.rows, c.cols, data).unwrap()
                })
                .collect();
            let mut indicator = vec![0.0; config.indicator_dim];
            indicator[rng.random_range(0..config.indicator_dim)] = 1.0;
            let mut context = vec![0.0; config.context_dim];
            context[rng.random_range(0..config.context_dim)] = 1.0;
            TrainingExample {
                input: Arc::new(UserInput {
                    user_id: format!("u{i}"),
                    channels,
                    indicator,
                }),
                context,
                target: rng.random_range(0..config.classes),
            }
        })
        .collect()
}

/// Every parameter drawn uniformly from [-0.5, 0.5], biases included.
pub fn randomize(params: &mut UnifiedModelParams<f64>, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in params.tensors_mut() {
        for x in t {
            *x = rng.random_range(-0.5..0.5);
        }
    }
}

/// Largest relative error between backpropagated and central-difference
/// gradients over every parameter.
pub fn max_gradient_error(
    config: &ModelConfig,
    examples: &[TrainingExample<f64>],
    seed: u64,
) -> f64 {
    let mut params = UnifiedModelParams::<f64>::zeros(config);
    randomize(&mut params, seed);
    let batch: Vec<_> = examples.iter().collect();
    let (_, grads) = ucvf::model::loss_and_gradients(&params, config, &batch).unwrap();
    let analytic: Vec<f64> = grads
        .tensors()
        .iter()
        .flat_map(|t| t.iter().copied())
        .collect();
    let loss_at =
        |p: &UnifiedModelParams<f64>| ucvf::model::mean_loss(p, config, examples).unwrap();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut flat = 0;
    for ti in 0..params.tensors().len() {
        for i in 0..params.tensors()[ti].len() {
            let orig = params.tensors()[ti][i];
            params.tensors_mut()[ti][i] = orig + h;
            let up = loss_at(&params);
            params.tensors_mut()[ti][i] = orig - h;
            let down = loss_at(&params);
            params.tensors_mut()[ti][i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic[flat];
            let scale = a.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max((a - numeric).abs() / scale);
            flat += 1;
        }
    }
    worst
}
