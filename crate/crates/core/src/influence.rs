//! Entropy, information gain and gain ratio of view labels partitioned by a
//! context attribute, and the screening of significant context-view pairs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{ContextKind, Dataset, FeatureSpace, HomeLocation, ViewKind};
use crate::scalar::Real;

/// Threshold used when none is configured.
pub const DEFAULT_DELTA: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InfluenceError {
    #[error("sample set is empty")]
    EmptySample,
    #[error("sample set has zero entropy; gain ratio is undefined")]
    ZeroEntropy,
    #[error("dataset has no records")]
    EmptyDataset,
    #[error("threshold must be non-negative, got {0}")]
    InvalidThreshold(f64),
    #[error(
        "sample index out of range: context {context} (< {contexts}), label {label} (< {labels})"
    )]
    IndexOutOfRange {
        context: usize,
        contexts: usize,
        label: usize,
        labels: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabeledSample {
    pub view_label: usize,
    pub context_value: usize,
}

impl LabeledSample {
    pub fn new(view_label: usize, context_value: usize) -> Self {
        Self {
            view_label,
            context_value,
        }
    }
}

/// `-sum p log2 p` over the non-zero counts.
pub fn entropy_from_counts<T: Real>(counts: &[u64]) -> T {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return T::zero();
    }
    let n = T::from_count(total);
    let mut h = T::zero();
    for &c in counts.iter().filter(|&&c| c > 0) {
        let p = T::from_count(c) / n;
        h -= p * p.log2();
    }
    h
}

/// Entropy in bits of a multiset of label indices.
pub fn entropy<T: Real>(labels: &[usize]) -> Result<T, InfluenceError> {
    if labels.is_empty() {
        return Err(InfluenceError::EmptySample);
    }
    let k = labels.iter().max().unwrap() + 1;
    let mut counts = vec![0u64; k];
    for &l in labels {
        counts[l] += 1;
    }
    Ok(entropy_from_counts(&counts))
}

/// Dense context-value x label count table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    contexts: usize,
    labels: usize,
    counts: Vec<u64>,
}

impl ContingencyTable {
    pub fn new(contexts: usize, labels: usize) -> Self {
        Self {
            contexts,
            labels,
            counts: vec![0; contexts * labels],
        }
    }

    /// Table sized to the largest indices present.
    pub fn from_samples(samples: &[LabeledSample]) -> Self {
        let contexts = samples
            .iter()
            .map(|s| s.context_value + 1)
            .max()
            .unwrap_or(0);
        let labels = samples.iter().map(|s| s.view_label + 1).max().unwrap_or(0);
        let mut t = Self::new(contexts, labels);
        for s in samples {
            t.counts[s.context_value * labels + s.view_label] += 1;
        }
        t
    }

    pub fn add(&mut self, sample: LabeledSample) -> Result<(), InfluenceError> {
        if sample.context_value >= self.contexts || sample.view_label >= self.labels {
            return Err(InfluenceError::IndexOutOfRange {
                context: sample.context_value,
                contexts: self.contexts,
                label: sample.view_label,
                labels: self.labels,
            });
        }
        self.counts[sample.context_value * self.labels + sample.view_label] += 1;
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    fn row(&self, v: usize) -> &[u64] {
        &self.counts[v * self.labels..(v + 1) * self.labels]
    }

    fn label_marginal(&self) -> Vec<u64> {
        let mut m = vec![0u64; self.labels];
        for v in 0..self.contexts {
            for (acc, c) in m.iter_mut().zip(self.row(v)) {
                *acc += c;
            }
        }
        m
    }

    pub fn entropy<T: Real>(&self) -> Result<T, InfluenceError> {
        if self.total() == 0 {
            return Err(InfluenceError::EmptySample);
        }
        Ok(entropy_from_counts(&self.label_marginal()))
    }

    /// Weighted entropy remaining after partitioning by context value.
    fn conditional_entropy<T: Real>(&self) -> T {
        let n = T::from_count(self.total());
        (0..self.contexts)
            .map(|v| (self.row(v).iter().sum::<u64>(), self.row(v)))
            .filter(|(nv, _)| *nv > 0)
            .map(|(nv, row)| T::from_count(nv) / n * entropy_from_counts::<T>(row))
            .fold(T::zero(), |a, b| a + b)
    }

    pub fn information_gain<T: Real>(&self) -> Result<T, InfluenceError> {
        Ok(self.entropy::<T>()? - self.conditional_entropy::<T>())
    }

    /// Gain divided by the unpartitioned entropy.
    pub fn gain_ratio<T: Real>(&self) -> Result<T, InfluenceError> {
        let h = self.entropy::<T>()?;
        if h <= T::zero() {
            return Err(InfluenceError::ZeroEntropy);
        }
        Ok((h - self.conditional_entropy::<T>()) / h)
    }
}

pub fn information_gain<T: Real>(samples: &[LabeledSample]) -> Result<T, InfluenceError> {
    ContingencyTable::from_samples(samples).information_gain()
}

pub fn gain_ratio<T: Real>(samples: &[LabeledSample]) -> Result<T, InfluenceError> {
    ContingencyTable::from_samples(samples).gain_ratio()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceResult<T> {
    pub context: ContextKind,
    pub view: ViewKind,
    pub entropy: T,
    pub gain: T,
    pub gain_ratio: T,
    pub selected: bool,
}

/// Scores every (context, view) combination over the pooled records of all
/// users. Results are context-major, view-minor. A zero-entropy view yields
/// `gain_ratio = 0` and is never selected.
pub fn influence_analysis<T: Real>(
    dataset: &Dataset,
    homes: &BTreeMap<String, HomeLocation>,
    space: &FeatureSpace,
    contexts: &[ContextKind],
    views: &[ViewKind],
    delta: T,
) -> Result<Vec<InfluenceResult<T>>, InfluenceError> {
    if delta < T::zero() || delta.is_nan() {
        return Err(InfluenceError::InvalidThreshold(delta.to_f64_lossy()));
    }
    if dataset.num_checkins() == 0 {
        return Err(InfluenceError::EmptyDataset);
    }

    let mut tables: BTreeMap<(ContextKind, ViewKind), ContingencyTable> = BTreeMap::new();
    for &c in contexts {
        for &v in views {
            tables.insert(
                (c, v),
                ContingencyTable::new(space.context(c).cardinality(), space.view(v).cardinality()),
            );
        }
    }
    for (user, records) in &dataset.users {
        let home = homes.get(user);
        for r in records {
            for (&(c, v), table) in tables.iter_mut() {
                if let Some(cv) = space.context_value(c, r, home) {
                    table.add(LabeledSample::new(space.view_value(v, r), cv))?;
                }
            }
        }
    }

    // entropy of each view, computed once per view
    let mut view_entropy = BTreeMap::new();
    for &v in views {
        let mut counts = vec![0u64; space.view(v).cardinality()];
        for r in dataset.records() {
            counts[space.view_value(v, r)] += 1;
        }
        view_entropy.insert(v, entropy_from_counts::<T>(&counts));
    }

    let mut out = Vec::with_capacity(contexts.len() * views.len());
    for &c in contexts {
        for &v in views {
            let table = &tables[&(c, v)];
            let h = view_entropy[&v];
            let gain = if table.total() == 0 {
                T::zero()
            } else {
                table.information_gain::<T>()?
            };
            let ratio = match table.gain_ratio::<T>() {
                Ok(r) => r,
                Err(InfluenceError::ZeroEntropy | InfluenceError::EmptySample) => T::zero(),
                Err(e) => return Err(e),
            };
            out.push(InfluenceResult {
                context: c,
                view: v,
                entropy: h,
                gain,
                gain_ratio: ratio,
                selected: ratio > delta,
            });
        }
    }
    Ok(out)
}
