use std::collections::BTreeMap;

use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use super::baseline::PairPredictor;
use super::metrics::{build_queries, EvalQuery};
use super::split::{split_dataset, DatasetSplit, SplitSpec};
use super::EvalError;
use crate::applicability::{analyze, ApplicabilityOptions, ApplicabilityReport};
use crate::features::{build_all, UserFeatureSet};
use crate::ingest::{estimate_homes, Dataset, FeatureSpace, HomeLocation, Pair};
use crate::scalar::Numeric;

/// Everything the experiments need, all derived from the train split
/// except the test queries.
#[derive(Debug, Clone)]
pub struct Prepared<T> {
    pub split: DatasetSplit,
    pub homes: BTreeMap<String, HomeLocation>,
    pub features: BTreeMap<String, UserFeatureSet>,
    pub applicability: ApplicabilityReport<T>,
    pub queries: Vec<EvalQuery>,
}

pub fn prepare<T: Numeric>(
    dataset: &Dataset,
    space: &FeatureSpace,
    pairs: &[Pair],
    split: SplitSpec,
    options: ApplicabilityOptions,
) -> Result<Prepared<T>, EvalError> {
    let split = split_dataset(dataset, split)?;
    let homes = estimate_homes(&split.train);
    let features = build_all(&split.train, &homes, pairs, space)?;
    let applicability = analyze(&split.train, &homes, space, pairs, pairs, options)?;
    let queries = build_queries(&split.test, &homes, space);
    Ok(Prepared {
        split,
        homes,
        features,
        applicability,
        queries,
    })
}

/// How RQ1 groups users by difference value.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub enum BucketScheme {
    /// Equal-count groups by rank, `min(10, users)` of them.
    #[default]
    Deciles,
    /// `[0, w), [w, 2w), ...`, the last bucket open-ended.
    Absolute { width: f64, buckets: usize },
}

impl BucketScheme {
    /// The 10-to-100 grid: ten buckets of width 10.
    pub fn absolute_grid() -> Self {
        BucketScheme::Absolute {
            width: 10.0,
            buckets: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rq1Cell {
    pub pair: Pair,
    pub users: usize,
    pub min_diff: Option<f64>,
    pub max_diff: Option<f64>,
    pub queries: usize,
    /// `None` when the bucket has no queries.
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rq1Row {
    /// 1-based.
    pub bucket: usize,
    pub cells: Vec<Rq1Cell>,
}

/// Per user: (queries, top-1 hits) under the pair's standalone predictor,
/// scored in the pair's own label space.
fn hits_by_user(
    predictor: &PairPredictor,
    queries: &[EvalQuery],
) -> BTreeMap<String, (usize, usize)> {
    let mut out: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for q in queries {
        let top = predictor.rank(&q.user_id, q.context(predictor.pair.context))[0];
        let e = out.entry(q.user_id.clone()).or_default();
        e.0 += 1;
        e.1 += usize::from(top == q.label(predictor.pair.view));
    }
    out
}

/// Accuracy@1 of each pair's standalone predictor, with users grouped by
/// their difference value for that pair.
pub fn run_rq1<T: Numeric + ToPrimitive>(
    features: &BTreeMap<String, UserFeatureSet>,
    report: &ApplicabilityReport<T>,
    queries: &[EvalQuery],
    space: &FeatureSpace,
    scheme: BucketScheme,
) -> Vec<Rq1Row> {
    let n = report.assignments.len();
    let buckets = match scheme {
        BucketScheme::Deciles => n.min(10),
        BucketScheme::Absolute { buckets, .. } => buckets,
    };
    let mut rows: Vec<Rq1Row> = (1..=buckets)
        .map(|bucket| Rq1Row {
            bucket,
            cells: Vec::new(),
        })
        .collect();
    for &pair in &report.pairs {
        let hits = hits_by_user(&PairPredictor::fit(pair, features, space), queries);
        let mut acc = vec![(0usize, None::<f64>, None::<f64>, 0usize, 0usize); buckets];
        for a in &report.assignments {
            let Some(rec) = a.record(pair) else { continue };
            let diff = rec.sum_diff.to_f64().unwrap_or(f64::NAN);
            let b = match scheme {
                BucketScheme::Deciles => (rec.rank - 1) * buckets / n,
                BucketScheme::Absolute { width, buckets } => {
                    ((diff / width).floor().max(0.0) as usize).min(buckets - 1)
                }
            };
            let cell = &mut acc[b];
            cell.0 += 1;
            cell.1 = Some(cell.1.map_or(diff, |m: f64| m.min(diff)));
            cell.2 = Some(cell.2.map_or(diff, |m: f64| m.max(diff)));
            if let Some(&(q, h)) = hits.get(&a.user_id) {
                cell.3 += q;
                cell.4 += h;
            }
        }
        for (row, (users, lo, hi, q, h)) in rows.iter_mut().zip(acc) {
            row.cells.push(Rq1Cell {
                pair,
                users,
                min_diff: lo,
                max_diff: hi,
                queries: q,
                accuracy: (q > 0).then(|| h as f64 / q as f64),
            });
        }
    }
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rq2Result {
    /// Accuracy@1 of each pair's predictor over all queries.
    pub single: Vec<(Pair, f64)>,
    /// Accuracy@1 when each user is predicted by their assigned pair.
    pub partitioned: f64,
    pub queries: usize,
}

pub fn run_rq2(
    features: &BTreeMap<String, UserFeatureSet>,
    assignments: &BTreeMap<String, Pair>,
    pairs: &[Pair],
    queries: &[EvalQuery],
    space: &FeatureSpace,
) -> Rq2Result {
    let predictors: BTreeMap<Pair, PairPredictor> = pairs
        .iter()
        .map(|&p| (p, PairPredictor::fit(p, features, space)))
        .collect();
    let hit = |p: &PairPredictor, q: &EvalQuery| {
        p.rank(&q.user_id, q.context(p.pair.context))[0] == q.label(p.pair.view)
    };
    let rate = |h: usize| {
        if queries.is_empty() {
            0.0
        } else {
            h as f64 / queries.len() as f64
        }
    };
    let single = pairs
        .iter()
        .map(|p| {
            (
                *p,
                rate(queries.iter().filter(|q| hit(&predictors[p], q)).count()),
            )
        })
        .collect();
    let partitioned = queries
        .iter()
        .filter(|q| {
            assignments
                .get(&q.user_id)
                .and_then(|a| predictors.get(a))
                .is_some_and(|p| hit(p, q))
        })
        .count();
    Rq2Result {
        single,
        partitioned: rate(partitioned),
        queries: queries.len(),
    }
}
