use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ModelConfig, ModelError};
use crate::matrix::DenseMatrix;
use crate::scalar::Real;

/// Kernels (`filters x k x k`, row-major) and biases of one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams<T> {
    pub kernels: Vec<T>,
    pub bias: Vec<T>,
}

/// All trainable weights. Also used as the gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct UnifiedModelParams<T> {
    pub conv: Vec<ConvParams<T>>,
    /// `dense_input_len x hidden`: row `i` holds the weights leaving input `i`.
    pub hidden_w: DenseMatrix<T>,
    pub hidden_b: Vec<T>,
    /// `classes x hidden`.
    pub output_w: DenseMatrix<T>,
    pub output_b: Vec<T>,
}

/// Half-width of the Glorot uniform range.
pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

impl<T: Real> UnifiedModelParams<T> {
    pub fn zeros(config: &ModelConfig) -> Self {
        let k2 = config.kernel * config.kernel;
        Self {
            conv: config
                .channels
                .iter()
                .map(|_| ConvParams {
                    kernels: vec![T::zero(); config.filters * k2],
                    bias: vec![T::zero(); config.filters],
                })
                .collect(),
            hidden_w: DenseMatrix::zeros(config.dense_input_len(), config.hidden),
            hidden_b: vec![T::zero(); config.hidden],
            output_w: DenseMatrix::zeros(config.classes, config.hidden),
            output_b: vec![T::zero(); config.classes],
        }
    }

    /// Tensor names in declaration order.
    pub fn tensor_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for i in 0..self.conv.len() {
            names.push(format!("conv{i}.kernels"));
            names.push(format!("conv{i}.bias"));
        }
        names.extend(
            [
                "hidden.weight",
                "hidden.bias",
                "output.weight",
                "output.bias",
            ]
            .map(String::from),
        );
        names
    }

    pub fn tensors(&self) -> Vec<&[T]> {
        let mut out: Vec<&[T]> = Vec::new();
        for c in &self.conv {
            out.push(&c.kernels);
            out.push(&c.bias);
        }
        out.push(self.hidden_w.as_slice());
        out.push(&self.hidden_b);
        out.push(self.output_w.as_slice());
        out.push(&self.output_b);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut out: Vec<&mut [T]> = Vec::new();
        for c in &mut self.conv {
            out.push(&mut c.kernels);
            out.push(&mut c.bias);
        }
        out.push(self.hidden_w.as_mut_slice());
        out.push(&mut self.hidden_b);
        out.push(self.output_w.as_mut_slice());
        out.push(&mut self.output_b);
        out
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        let (a, b) = (self.tensors(), other.tensors());
        a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| x.len() == y.len())
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: T, other: &Self) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (d, &s) in dst.iter_mut().zip(src) {
                *d += alpha * s;
            }
        }
    }

    pub fn scale(&mut self, alpha: T) {
        for t in self.tensors_mut() {
            for x in t {
                *x *= alpha;
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.iter().all(|x| x.is_finite()))
    }
}

/// Glorot-uniform weights and zero biases, drawn in declaration order from a
/// ChaCha8 stream seeded with `seed`.
pub fn init_params<T: Real>(
    config: &ModelConfig,
    seed: u64,
) -> Result<UnifiedModelParams<T>, ModelError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(init_with_rng(config, &mut rng))
}

pub(crate) fn init_with_rng<T: Real, R: Rng>(
    config: &ModelConfig,
    rng: &mut R,
) -> UnifiedModelParams<T> {
    let mut p = UnifiedModelParams::zeros(config);
    let k2 = config.kernel * config.kernel;
    let mut fill = |xs: &mut [T], bound: f64| {
        for x in xs {
            *x = T::from_f64_lossy(rng.random_range(-bound..=bound));
        }
    };
    let conv_bound = glorot_bound(k2, config.filters * k2);
    for c in &mut p.conv {
        fill(&mut c.kernels, conv_bound);
    }
    fill(
        p.hidden_w.as_mut_slice(),
        glorot_bound(config.dense_input_len(), config.hidden),
    );
    fill(
        p.output_w.as_mut_slice(),
        glorot_bound(config.hidden, config.classes),
    );
    p
}
