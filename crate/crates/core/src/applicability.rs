//! Difference-value ranking: which feature model is most stable for a user
//! across fixed time units.

use std::collections::BTreeMap;

use chrono::Datelike;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{build_ucvf, normalize_matrix, FeatureError, FeatureMatrix};
use crate::ingest::{AnnotatedCheckIn, CheckIn, Dataset, FeatureSpace, HomeLocation, Pair};
use crate::matrix::DenseMatrix;
use crate::scalar::Numeric;

#[derive(Debug, Error)]
pub enum ApplicabilityError {
    #[error("user {0:?} has no records")]
    NoData(String),
    #[error("user {user:?} has no difference record for pair {pair}")]
    MissingRecord { user: String, pair: Pair },
    #[error("no candidate pairs to assign users to")]
    NoCandidates,
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum TimeUnit {
    #[default]
    Month,
    /// ISO week.
    Week,
}

impl std::str::FromStr for TimeUnit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "month" => Ok(TimeUnit::Month),
            "week" => Ok(TimeUnit::Week),
            _ => Err(format!("unknown time unit {s:?}")),
        }
    }
}

/// `(year, month)` or `(iso year, iso week)`.
pub type Period = (i32, u32);

pub fn period_of(c: &CheckIn, unit: TimeUnit) -> Period {
    match unit {
        TimeUnit::Month => c.year_month(),
        TimeUnit::Week => {
            let w = c.timestamp.date().iso_week();
            (w.year(), w.week())
        }
    }
}

pub fn split_by_period(
    records: &[AnnotatedCheckIn],
    unit: TimeUnit,
) -> Result<BTreeMap<Period, Vec<&AnnotatedCheckIn>>, ApplicabilityError> {
    if records.is_empty() {
        return Err(ApplicabilityError::NoData(String::new()));
    }
    let mut groups: BTreeMap<Period, Vec<&AnnotatedCheckIn>> = BTreeMap::new();
    for r in records {
        groups
            .entry(period_of(&r.checkin, unit))
            .or_default()
            .push(r);
    }
    Ok(groups)
}

pub fn split_by_month(
    records: &[AnnotatedCheckIn],
) -> Result<BTreeMap<Period, Vec<&AnnotatedCheckIn>>, ApplicabilityError> {
    split_by_period(records, TimeUnit::Month)
}

/// One user's matrices for one pair, per time unit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonthlyMatrices {
    pub user_id: String,
    pub pair: Pair,
    pub by_period: BTreeMap<Period, FeatureMatrix>,
}

impl MonthlyMatrices {
    pub fn build(
        user_id: &str,
        records: &[AnnotatedCheckIn],
        pair: Pair,
        space: &FeatureSpace,
        home: Option<&HomeLocation>,
        unit: TimeUnit,
    ) -> Result<Self, ApplicabilityError> {
        let groups = split_by_period(records, unit)
            .map_err(|_| ApplicabilityError::NoData(user_id.to_string()))?;
        let by_period = groups
            .into_iter()
            .map(|(p, rs)| Ok((p, build_ucvf(user_id, rs, pair, space, home)?)))
            .collect::<Result<_, ApplicabilityError>>()?;
        Ok(Self {
            user_id: user_id.to_string(),
            pair,
            by_period,
        })
    }

    /// Difference value over raw counts, or over L1-normalised matrices.
    pub fn difference<T: Numeric>(&self, normalize: bool) -> T {
        let ms: Vec<DenseMatrix<T>> = self
            .by_period
            .values()
            .map(|m| {
                if normalize {
                    normalize_matrix(&m.counts)
                } else {
                    m.counts.map(|&c| T::from_count(c))
                }
            })
            .collect();
        difference_value(&ms)
    }
}

/// Sum over periods of the elementwise L1 distance between each period's
/// matrix and the mean matrix. Zero for fewer than two periods.
pub fn difference_value<T: Numeric>(periods: &[DenseMatrix<T>]) -> T {
    let Some(first) = periods.first() else {
        return T::zero();
    };
    assert!(
        periods.iter().all(|m| m.same_shape(first)),
        "period matrices must share a shape"
    );
    let n = T::from_count(periods.len() as u64);
    let len = first.as_slice().len();
    let mut mean = vec![T::zero(); len];
    for m in periods {
        for (acc, &x) in mean.iter_mut().zip(m.as_slice()) {
            *acc = *acc + x;
        }
    }
    for x in &mut mean {
        *x = *x / n;
    }
    periods
        .iter()
        .flat_map(|m| {
            m.as_slice()
                .iter()
                .zip(&mean)
                .map(|(&x, &mu)| (x - mu).abs())
        })
        .fold(T::zero(), |a, b| a + b)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifferenceRecord<T> {
    pub user_id: String,
    pub pair: Pair,
    pub sum_diff: T,
    /// 1-based position in the pair's ascending ordering.
    pub rank: usize,
}

/// Orders one pair's users by ascending difference, ties by user id.
pub fn rank_users<T: Numeric>(
    pair: Pair,
    entries: impl IntoIterator<Item = (String, T)>,
) -> Vec<DifferenceRecord<T>> {
    let mut v: Vec<(String, T)> = entries.into_iter().collect();
    v.sort_by(|a, b| {
        a.1.partial_cmp(&b.1)
            .expect("difference values are comparable")
            .then_with(|| a.0.cmp(&b.0))
    });
    v.into_iter()
        .enumerate()
        .map(|(i, (user_id, sum_diff))| DifferenceRecord {
            user_id,
            pair,
            sum_diff,
            rank: i + 1,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApplicabilityAssignment<T> {
    pub user_id: String,
    pub assigned: Pair,
    /// One record per pair, in the caller's pair order.
    pub records: Vec<DifferenceRecord<T>>,
}

impl<T> ApplicabilityAssignment<T> {
    pub fn record(&self, pair: Pair) -> Option<&DifferenceRecord<T>> {
        self.records.iter().find(|r| r.pair == pair)
    }
}

/// Puts each user in the candidate pair where their rank is lowest; equal
/// ranks go to the earliest candidate. Users come out in id order.
pub fn assign_users<T: Numeric>(
    records: &[DifferenceRecord<T>],
    pairs: &[Pair],
    candidates: &[Pair],
) -> Result<Vec<ApplicabilityAssignment<T>>, ApplicabilityError> {
    if candidates.is_empty() {
        return Err(ApplicabilityError::NoCandidates);
    }
    let mut by_user: BTreeMap<&str, BTreeMap<Pair, &DifferenceRecord<T>>> = BTreeMap::new();
    for r in records {
        by_user.entry(&r.user_id).or_default().insert(r.pair, r);
    }
    let mut out = Vec::with_capacity(by_user.len());
    for (user, recs) in by_user {
        let missing = |pair: Pair| ApplicabilityError::MissingRecord {
            user: user.to_string(),
            pair,
        };
        let mut best: Option<(usize, Pair)> = None;
        for &p in candidates {
            let rank = recs.get(&p).ok_or_else(|| missing(p))?.rank;
            if best.is_none_or(|(r, _)| rank < r) {
                best = Some((rank, p));
            }
        }
        let records = pairs
            .iter()
            .map(|&p| recs.get(&p).map(|r| (*r).clone()).ok_or_else(|| missing(p)))
            .collect::<Result<_, _>>()?;
        out.push(ApplicabilityAssignment {
            user_id: user.to_string(),
            assigned: best.unwrap().1,
            records,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApplicabilityReport<T> {
    pub pairs: Vec<Pair>,
    pub assignments: Vec<ApplicabilityAssignment<T>>,
    /// Users observed in a single time unit; their assignment carries no
    /// information.
    pub single_period_users: Vec<String>,
}

impl<T> ApplicabilityReport<T> {
    /// Users per pair, in pair order. Sums to the number of users.
    pub fn counts(&self) -> Vec<(Pair, usize)> {
        self.pairs
            .iter()
            .map(|&p| {
                (
                    p,
                    self.assignments.iter().filter(|a| a.assigned == p).count(),
                )
            })
            .collect()
    }

    pub fn assignment_map(&self) -> BTreeMap<String, Pair> {
        self.assignments
            .iter()
            .map(|a| (a.user_id.clone(), a.assigned))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApplicabilityOptions {
    pub unit: TimeUnit,
    pub normalize_periods: bool,
}

/// Difference values, ranks and assignments for every user of `dataset`.
/// `candidates` restricts which pairs users may be assigned to.
pub fn analyze<T: Numeric>(
    dataset: &Dataset,
    homes: &BTreeMap<String, HomeLocation>,
    space: &FeatureSpace,
    pairs: &[Pair],
    candidates: &[Pair],
    options: ApplicabilityOptions,
) -> Result<ApplicabilityReport<T>, ApplicabilityError> {
    let per_user: Vec<(String, Vec<T>, usize)> = dataset
        .users
        .par_iter()
        .map(|(user, records)| {
            let home = homes.get(user);
            let mut diffs = Vec::with_capacity(pairs.len());
            let mut periods = 0;
            for &p in pairs {
                let mm = MonthlyMatrices::build(user, records, p, space, home, options.unit)?;
                periods = mm.by_period.len();
                diffs.push(mm.difference::<T>(options.normalize_periods));
            }
            Ok((user.clone(), diffs, periods))
        })
        .collect::<Result<_, ApplicabilityError>>()?;

    let mut records = Vec::with_capacity(per_user.len() * pairs.len());
    for (i, &p) in pairs.iter().enumerate() {
        records.extend(rank_users(
            p,
            per_user.iter().map(|(u, d, _)| (u.clone(), d[i])),
        ));
    }
    let assignments = assign_users(&records, pairs, candidates)?;
    let single_period_users = per_user
        .iter()
        .filter(|(_, _, n)| *n == 1)
        .map(|(u, _, _)| u.clone())
        .collect();
    Ok(ApplicabilityReport {
        pairs: pairs.to_vec(),
        assignments,
        single_period_users,
    })
}
