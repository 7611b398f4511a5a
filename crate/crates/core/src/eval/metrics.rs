use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::ingest::{ContextKind, Dataset, FeatureSpace, HomeLocation, ViewKind};

/// One held-out check-in: who, when, how far from home, and what.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalQuery {
    pub user_id: String,
    pub time: usize,
    pub distance: usize,
    pub root: usize,
    pub leaf: usize,
}

impl EvalQuery {
    pub fn label(&self, view: ViewKind) -> usize {
        match view {
            ViewKind::RootCategory => self.root,
            ViewKind::LeafCategory => self.leaf,
        }
    }

    pub fn context(&self, kind: ContextKind) -> usize {
        match kind {
            ContextKind::Time => self.time,
            ContextKind::Distance => self.distance,
        }
    }
}

/// Queries for every record of `dataset` whose user has a home.
pub fn build_queries(
    dataset: &Dataset,
    homes: &BTreeMap<String, HomeLocation>,
    space: &FeatureSpace,
) -> Vec<EvalQuery> {
    let mut out = Vec::new();
    for (user, records) in &dataset.users {
        let Some(home) = homes.get(user) else {
            continue;
        };
        for r in records {
            out.push(EvalQuery {
                user_id: user.clone(),
                time: space
                    .context_value(ContextKind::Time, r, Some(home))
                    .unwrap(),
                distance: space
                    .context_value(ContextKind::Distance, r, Some(home))
                    .unwrap(),
                root: r.root,
                leaf: r.leaf,
            });
        }
    }
    out
}

/// Share of queries whose label is among the first `k` predicted labels.
/// Zero when there are no queries.
pub fn accuracy_at_k(
    predictions: &[Vec<usize>],
    labels: &[usize],
    k: usize,
) -> Result<f64, EvalError> {
    if predictions.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            predictions: predictions.len(),
            queries: labels.len(),
        });
    }
    if k == 0 {
        return Err(EvalError::BadK(k));
    }
    let mut hits = 0usize;
    for (i, (p, &y)) in predictions.iter().zip(labels).enumerate() {
        if p.len() < k {
            return Err(EvalError::ShortList {
                index: i,
                len: p.len(),
                k,
            });
        }
        if p[..k].contains(&y) {
            hits += 1;
        }
    }
    Ok(if labels.is_empty() {
        0.0
    } else {
        hits as f64 / labels.len() as f64
    })
}

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation (Pearson on average ranks). `None` when either
/// side is constant or the lengths differ.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}
