use std::sync::Arc;

use rayon::prelude::*;

use super::{ModelConfig, ModelError, UnifiedModelParams};
use crate::matrix::DenseMatrix;
use crate::scalar::Real;

/// Per-user part of a model input, shared by all of that user's examples.
#[derive(Debug, Clone, PartialEq)]
pub struct UserInput<T> {
    pub user_id: String,
    pub channels: Vec<DenseMatrix<T>>,
    pub indicator: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample<T> {
    pub input: Arc<UserInput<T>>,
    pub context: Vec<T>,
    pub target: usize,
}

impl<T> TrainingExample<T> {
    pub fn user_id(&self) -> &str {
        &self.input.user_id
    }
}

/// Intermediate values of one forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    conv_pre: Vec<Vec<T>>,
    pool_arg: Vec<Vec<usize>>,
    dense_in: Vec<T>,
    hidden_pre: Vec<T>,
    hidden: Vec<T>,
    pub logits: Vec<T>,
    pub probs: Vec<T>,
    log_norm: T,
}

impl<T: Real> ForwardCache<T> {
    /// Cross-entropy of `target` under the cached distribution.
    pub fn loss(&self, target: usize) -> T {
        self.log_norm - self.logits[target]
    }
}

fn shape_err(what: impl Into<String>) -> ModelError {
    ModelError::ShapeMismatch(what.into())
}

pub fn check_example<T>(config: &ModelConfig, ex: &TrainingExample<T>) -> Result<(), ModelError> {
    let input = &ex.input;
    if input.channels.len() != config.channels.len() {
        return Err(shape_err(format!(
            "{} channels given, {} expected",
            input.channels.len(),
            config.channels.len()
        )));
    }
    for (m, spec) in input.channels.iter().zip(&config.channels) {
        if m.shape() != (spec.rows, spec.cols) {
            return Err(shape_err(format!(
                "channel {} is {}x{}, expected {}x{}",
                spec.name,
                m.rows(),
                m.cols(),
                spec.rows,
                spec.cols
            )));
        }
    }
    if input.indicator.len() != config.indicator_dim {
        return Err(shape_err(format!(
            "indicator has {} entries, expected {}",
            input.indicator.len(),
            config.indicator_dim
        )));
    }
    if ex.context.len() != config.context_dim {
        return Err(shape_err(format!(
            "context has {} entries, expected {}",
            ex.context.len(),
            config.context_dim
        )));
    }
    if ex.target >= config.classes {
        return Err(shape_err(format!(
            "target {} outside {} classes",
            ex.target, config.classes
        )));
    }
    Ok(())
}

/// 'same' convolution of one input map with every filter, scattered from
/// the nonzero inputs.
fn conv_forward<T: Real>(input: &DenseMatrix<T>, kernels: &[T], bias: &[T], k: usize) -> Vec<T> {
    let (h, w) = input.shape();
    let pad = k / 2;
    let mut out = Vec::with_capacity(bias.len() * h * w);
    for &b in bias {
        out.extend(std::iter::repeat_n(b, h * w));
    }
    for (idx, &v) in input.as_slice().iter().enumerate() {
        if v == T::zero() {
            continue;
        }
        let (r, c) = (idx / w, idx % w);
        for di in 0..k {
            // output row i sees input row r through kernel row di when i + di = r + pad
            let Some(i) = (r + pad).checked_sub(di).filter(|&i| i < h) else {
                continue;
            };
            for dj in 0..k {
                let Some(j) = (c + pad).checked_sub(dj).filter(|&j| j < w) else {
                    continue;
                };
                for (f, kern) in kernels.chunks_exact(k * k).enumerate() {
                    out[f * h * w + i * w + j] += kern[di * k + dj] * v;
                }
            }
        }
    }
    out
}

/// ReLU then 2x2 max pooling (trailing odd row/column dropped). Returns the
/// pooled values and, for each, the flat index of the winning position.
fn relu_pool<T: Real>(
    pre: &[T],
    filters: usize,
    h: usize,
    w: usize,
    out: &mut Vec<T>,
) -> Vec<usize> {
    let (ph, pw) = (h / 2, w / 2);
    let mut args = Vec::with_capacity(filters * ph * pw);
    for f in 0..filters {
        let base = f * h * w;
        for pi in 0..ph {
            for pj in 0..pw {
                let mut best = base + 2 * pi * w + 2 * pj;
                let mut best_v = pre[best].max(T::zero());
                for (di, dj) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = base + (2 * pi + di) * w + 2 * pj + dj;
                    let v = pre[idx].max(T::zero());
                    if v > best_v {
                        best = idx;
                        best_v = v;
                    }
                }
                out.push(best_v);
                args.push(best);
            }
        }
    }
    args
}

/// Nonzero entries of a batch's dense inputs, grouped by input index so a
/// weight row is visited once per batch.
struct Columns<T> {
    starts: Vec<usize>,
    entries: Vec<(usize, T)>,
}

impl<T: Real> Columns<T> {
    fn new(inputs: &[&[T]], width: usize) -> Self {
        let mut starts = vec![0usize; width + 1];
        for x in inputs {
            for (i, v) in x.iter().enumerate() {
                if *v != T::zero() {
                    starts[i + 1] += 1;
                }
            }
        }
        for i in 0..width {
            starts[i + 1] += starts[i];
        }
        let mut fill = starts.clone();
        let mut entries = vec![(0, T::zero()); starts[width]];
        for (e, x) in inputs.iter().enumerate() {
            for (i, &v) in x.iter().enumerate() {
                if v != T::zero() {
                    entries[fill[i]] = (e, v);
                    fill[i] += 1;
                }
            }
        }
        Self { starts, entries }
    }

    fn col(&self, i: usize) -> &[(usize, T)] {
        &self.entries[self.starts[i]..self.starts[i + 1]]
    }
}

/// Forward pass over a batch. Each example's result equals what a
/// single-example pass produces.
pub fn forward_batch<T: Real>(
    params: &UnifiedModelParams<T>,
    config: &ModelConfig,
    batch: &[&TrainingExample<T>],
) -> Result<Vec<ForwardCache<T>>, ModelError> {
    let width = config.dense_input_len();
    let mut caches = Vec::with_capacity(batch.len());
    for ex in batch {
        check_example(config, ex)?;
        let mut dense_in = Vec::with_capacity(width);
        let mut conv_pre = Vec::with_capacity(config.channels.len());
        let mut pool_arg = Vec::with_capacity(config.channels.len());
        for ((m, spec), p) in ex
            .input
            .channels
            .iter()
            .zip(&config.channels)
            .zip(&params.conv)
        {
            let pre = conv_forward(m, &p.kernels, &p.bias, config.kernel);
            pool_arg.push(relu_pool(
                &pre,
                config.filters,
                spec.rows,
                spec.cols,
                &mut dense_in,
            ));
            conv_pre.push(pre);
        }
        dense_in.extend_from_slice(&ex.input.indicator);
        dense_in.extend_from_slice(&ex.context);
        caches.push(ForwardCache {
            conv_pre,
            pool_arg,
            dense_in,
            hidden_pre: params.hidden_b.clone(),
            hidden: Vec::new(),
            logits: Vec::new(),
            probs: Vec::new(),
            log_norm: T::zero(),
        });
    }

    let inputs: Vec<&[T]> = caches.iter().map(|c| c.dense_in.as_slice()).collect();
    let cols = Columns::new(&inputs, width);
    for i in 0..width {
        let w = params.hidden_w.row(i);
        for &(e, x) in cols.col(i) {
            axpy(&mut caches[e].hidden_pre, x, w);
        }
    }

    for c in &mut caches {
        c.hidden = c.hidden_pre.iter().map(|&z| z.max(T::zero())).collect();
        c.logits = params
            .output_b
            .iter()
            .enumerate()
            .map(|(k, &b)| b + dot(params.output_w.row(k), &c.hidden))
            .collect();
        let m = c.logits.iter().copied().fold(T::neg_infinity(), T::max);
        c.log_norm = m + c.logits.iter().map(|&z| (z - m).exp()).sum::<T>().ln();
        c.probs = c.logits.iter().map(|&z| (z - c.log_norm).exp()).collect();
    }
    Ok(caches)
}

pub fn forward<T: Real>(
    params: &UnifiedModelParams<T>,
    config: &ModelConfig,
    ex: &TrainingExample<T>,
) -> Result<ForwardCache<T>, ModelError> {
    Ok(forward_batch(params, config, &[ex])?
        .pop()
        .expect("one example"))
}

/// Dot product with eight interleaved partial sums.
fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [T::zero(); 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    let mut tail = T::zero();
    for (&x, &y) in ca.remainder().iter().zip(cb.remainder()) {
        tail += x * y;
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail
}

fn axpy<T: Real>(dst: &mut [T], alpha: T, src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += alpha * s;
    }
}

/// Adds the summed cross-entropy gradient of `batch` to `grads`.
fn backward_batch<T: Real>(
    params: &UnifiedModelParams<T>,
    config: &ModelConfig,
    batch: &[&TrainingExample<T>],
    caches: &[ForwardCache<T>],
    grads: &mut UnifiedModelParams<T>,
) {
    let mut d_hidden: Vec<Vec<T>> = Vec::with_capacity(batch.len());
    for (ex, cache) in batch.iter().zip(caches) {
        let mut d_logits = cache.probs.clone();
        d_logits[ex.target] -= T::one();
        let mut dh = vec![T::zero(); config.hidden];
        for (c, &g) in d_logits.iter().enumerate() {
            axpy(grads.output_w.row_mut(c), g, &cache.hidden);
            grads.output_b[c] += g;
            axpy(&mut dh, g, params.output_w.row(c));
        }
        for (g, &z) in dh.iter_mut().zip(&cache.hidden_pre) {
            if z <= T::zero() {
                *g = T::zero();
            }
        }
        axpy(&mut grads.hidden_b, T::one(), &dh);
        d_hidden.push(dh);
    }

    // a zero input contributes no weight gradient, and a zero pooled feature
    // passes no gradient back through its ReLU
    let width = config.dense_input_len();
    let feature_len = config.feature_len();
    let inputs: Vec<&[T]> = caches.iter().map(|c| c.dense_in.as_slice()).collect();
    let cols = Columns::new(&inputs, width);
    let mut d_features = vec![vec![T::zero(); feature_len]; batch.len()];
    #[allow(clippy::needless_range_loop)]
    for i in 0..width {
        let col = cols.col(i);
        if col.is_empty() {
            continue;
        }
        let grad_row = grads.hidden_w.row_mut(i);
        for &(e, x) in col {
            axpy(grad_row, x, &d_hidden[e]);
        }
        if i < feature_len {
            let w = params.hidden_w.row(i);
            for &(e, _) in col {
                d_features[e][i] = dot(w, &d_hidden[e]);
            }
        }
    }

    let k = config.kernel;
    let pad = k / 2;
    for ((ex, cache), d_feat) in batch.iter().zip(caches).zip(&d_features) {
        let mut offset = 0;
        for (ch, spec) in config.channels.iter().enumerate() {
            let (h, w) = (spec.rows, spec.cols);
            let (ph, pw) = spec.pooled();
            let x = ex.input.channels[ch].as_slice();
            let pre = &cache.conv_pre[ch];
            let g_conv = &mut grads.conv[ch];
            for (slot, &arg) in cache.pool_arg[ch].iter().enumerate() {
                let g = d_feat[offset + slot];
                if g == T::zero() || pre[arg] <= T::zero() {
                    continue;
                }
                let f = slot / (ph * pw);
                let (i, j) = ((arg - f * h * w) / w, (arg - f * h * w) % w);
                g_conv.bias[f] += g;
                let kern = &mut g_conv.kernels[f * k * k..(f + 1) * k * k];
                for di in 0..k {
                    let Some(r) = (i + di).checked_sub(pad).filter(|&r| r < h) else {
                        continue;
                    };
                    for dj in 0..k {
                        let Some(c) = (j + dj).checked_sub(pad).filter(|&c| c < w) else {
                            continue;
                        };
                        kern[di * k + dj] += g * x[r * w + c];
                    }
                }
            }
            offset += config.filters * ph * pw;
        }
    }
}

/// Examples per unit of parallel work. Partial gradients are summed in
/// chunk order, so the result does not depend on the worker count.
const CHUNK: usize = 32;

/// Mean cross-entropy over `batch` and its exact gradient.
pub fn loss_and_gradients<T: Real>(
    params: &UnifiedModelParams<T>,
    config: &ModelConfig,
    batch: &[&TrainingExample<T>],
) -> Result<(T, UnifiedModelParams<T>), ModelError> {
    if batch.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    let partials = batch
        .par_chunks(CHUNK)
        .map(|chunk| {
            let caches = forward_batch(params, config, chunk)?;
            let loss = chunk
                .iter()
                .zip(&caches)
                .fold(T::zero(), |acc, (ex, c)| acc + c.loss(ex.target));
            let mut grads = UnifiedModelParams::zeros(config);
            backward_batch(params, config, chunk, &caches, &mut grads);
            Ok((loss, grads))
        })
        .collect::<Result<Vec<_>, ModelError>>()?;
    let mut parts = partials.into_iter();
    let (mut loss, mut grads) = parts.next().expect("non-empty batch");
    for (l, g) in parts {
        loss += l;
        grads.axpy(T::one(), &g);
    }
    let inv = T::one() / T::from_count(batch.len() as u64);
    grads.scale(inv);
    Ok((loss * inv, grads))
}

/// Mean cross-entropy without gradients.
pub fn mean_loss<T: Real>(
    params: &UnifiedModelParams<T>,
    config: &ModelConfig,
    examples: &[TrainingExample<T>],
) -> Result<T, ModelError> {
    if examples.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    let refs: Vec<&TrainingExample<T>> = examples.iter().collect();
    let parts = refs
        .par_chunks(CHUNK)
        .map(|chunk| {
            let caches = forward_batch(params, config, chunk)?;
            Ok(chunk
                .iter()
                .zip(&caches)
                .fold(T::zero(), |acc, (ex, c)| acc + c.loss(ex.target)))
        })
        .collect::<Result<Vec<T>, ModelError>>()?;
    Ok(parts.into_iter().fold(T::zero(), |a, b| a + b) / T::from_count(examples.len() as u64))
}

/// Probability vectors for many examples at once.
pub fn predict_proba_batch<T: Real>(
    params: &UnifiedModelParams<T>,
    config: &ModelConfig,
    examples: &[TrainingExample<T>],
) -> Result<Vec<Vec<T>>, ModelError> {
    let refs: Vec<&TrainingExample<T>> = examples.iter().collect();
    let parts = refs
        .par_chunks(CHUNK)
        .map(|chunk| {
            Ok(forward_batch(params, config, chunk)?
                .into_iter()
                .map(|c| c.probs)
                .collect())
        })
        .collect::<Result<Vec<Vec<Vec<T>>>, ModelError>>()?;
    Ok(parts.into_iter().flatten().collect())
}

pub fn predict_proba<T: Real>(
    params: &UnifiedModelParams<T>,
    config: &ModelConfig,
    ex: &TrainingExample<T>,
) -> Result<Vec<T>, ModelError> {
    Ok(forward(params, config, ex)?.probs)
}

/// Label indices by descending score, ties by ascending index.
pub fn rank_labels<T: PartialOrd>(scores: &[T]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    idx
}

pub fn top_k<T: PartialOrd>(scores: &[T], k: usize) -> Result<Vec<usize>, ModelError> {
    if k == 0 || k > scores.len() {
        return Err(ModelError::BadK {
            k,
            classes: scores.len(),
        });
    }
    let mut ranked = rank_labels(scores);
    ranked.truncate(k);
    Ok(ranked)
}

pub fn predict_topk<T: Real>(
    params: &UnifiedModelParams<T>,
    config: &ModelConfig,
    ex: &TrainingExample<T>,
    k: usize,
) -> Result<Vec<usize>, ModelError> {
    if k == 0 || k > config.classes {
        return Err(ModelError::BadK {
            k,
            classes: config.classes,
        });
    }
    top_k(&predict_proba(params, config, ex)?, k)
}
