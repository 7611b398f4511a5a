use std::collections::BTreeMap;

use super::EvalError;
use crate::features::UserFeatureSet;
use crate::ingest::{ContextKind, Dataset, FeatureSpace, HomeLocation, Pair, ViewKind};

/// Orders labels by a list of count vectors compared lexicographically
/// (descending), then by ascending label index.
fn rank_by_keys(keys: &[&[u64]]) -> Vec<usize> {
    let n = keys[0].len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| {
        for k in keys {
            match k[b].cmp(&k[a]) {
                std::cmp::Ordering::Equal => continue,
                o => return o,
            }
        }
        a.cmp(&b)
    });
    idx
}

/// Per-user label counts in each (hour, distance band) cell of the train
/// split, backed off to the user's overall counts and then to global counts.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyBaseline {
    pub view: ViewKind,
    labels: usize,
    distance_buckets: usize,
    cells: BTreeMap<String, BTreeMap<(usize, usize), Vec<u64>>>,
    marginal: BTreeMap<String, Vec<u64>>,
    global: Vec<u64>,
}

impl FrequencyBaseline {
    pub fn fit(
        train: &Dataset,
        homes: &BTreeMap<String, HomeLocation>,
        space: &FeatureSpace,
        view: ViewKind,
    ) -> Result<Self, EvalError> {
        if train.num_checkins() == 0 {
            return Err(EvalError::EmptyTrain);
        }
        let labels = space.view(view).cardinality();
        let mut cells: BTreeMap<String, BTreeMap<(usize, usize), Vec<u64>>> = BTreeMap::new();
        let mut marginal: BTreeMap<String, Vec<u64>> = BTreeMap::new();
        let mut global = vec![0u64; labels];
        for (user, records) in &train.users {
            let home = homes.get(user);
            for r in records {
                let y = space.view_value(view, r);
                global[y] += 1;
                marginal
                    .entry(user.clone())
                    .or_insert_with(|| vec![0; labels])[y] += 1;
                let t = space.context_value(ContextKind::Time, r, home).unwrap();
                if let Some(d) = space.context_value(ContextKind::Distance, r, home) {
                    cells
                        .entry(user.clone())
                        .or_default()
                        .entry((t, d))
                        .or_insert_with(|| vec![0; labels])[y] += 1;
                }
            }
        }
        Ok(Self {
            view,
            labels,
            distance_buckets: space.distance.cardinality(),
            cells,
            marginal,
            global,
        })
    }

    pub fn labels(&self) -> usize {
        self.labels
    }

    /// All labels, best first.
    pub fn rank(&self, user: &str, time: usize, distance: usize) -> Vec<usize> {
        debug_assert!(distance < self.distance_buckets);
        let zeros = vec![0u64; self.labels];
        let cell = self
            .cells
            .get(user)
            .and_then(|c| c.get(&(time, distance)))
            .unwrap_or(&zeros);
        let marginal = self.marginal.get(user).unwrap_or(&zeros);
        rank_by_keys(&[cell, marginal, &self.global])
    }
}

/// Standalone predictor built from one pair's train-split matrices: the
/// row of the query's context value, then the user's column totals, then
/// global column totals.
#[derive(Debug, Clone, PartialEq)]
pub struct PairPredictor {
    pub pair: Pair,
    rows: BTreeMap<String, Vec<Vec<u64>>>,
    marginal: BTreeMap<String, Vec<u64>>,
    global: Vec<u64>,
}

impl PairPredictor {
    pub fn fit(
        pair: Pair,
        features: &BTreeMap<String, UserFeatureSet>,
        space: &FeatureSpace,
    ) -> Self {
        let labels = space.view(pair.view).cardinality();
        let mut rows = BTreeMap::new();
        let mut marginal = BTreeMap::new();
        let mut global = vec![0u64; labels];
        for (user, ufs) in features {
            let Some(m) = ufs.get(pair) else { continue };
            let (r, c) = m.shape();
            let mut col = vec![0u64; c];
            let mut user_rows = Vec::with_capacity(r);
            for i in 0..r {
                let row = m.counts.row(i).to_vec();
                for (j, &x) in row.iter().enumerate() {
                    col[j] += x;
                    global[j] += x;
                }
                user_rows.push(row);
            }
            rows.insert(user.clone(), user_rows);
            marginal.insert(user.clone(), col);
        }
        Self {
            pair,
            rows,
            marginal,
            global,
        }
    }

    pub fn rank(&self, user: &str, context_value: usize) -> Vec<usize> {
        let zeros = vec![0u64; self.global.len()];
        let row = self
            .rows
            .get(user)
            .and_then(|r| r.get(context_value))
            .unwrap_or(&zeros);
        let marginal = self.marginal.get(user).unwrap_or(&zeros);
        rank_by_keys(&[row, marginal, &self.global])
    }
}
