use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::ingest::Dataset;

/// Per-user chronological split fractions; the test share is the rest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: f64,
    pub validation: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train: 0.8,
            validation: 0.1,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), EvalError> {
        let ok = |x: f64| x.is_finite() && (0.0..=1.0).contains(&x);
        if !ok(self.train) || !ok(self.validation) || self.train + self.validation > 1.0 + 1e-12 {
            return Err(EvalError::InvalidSpec(format!(
                "split fractions {} / {} do not fit in 1",
                self.train, self.validation
            )));
        }
        Ok(())
    }

    /// End indices of the train and validation parts for `n` records:
    /// `floor(train * n)` and `floor((train + validation) * n)`, except that
    /// the train part never drops below one record.
    pub fn cuts(&self, n: usize) -> (usize, usize) {
        let floor = |f: f64| ((f * n as f64) + 1e-9).floor() as usize;
        let train_end = floor(self.train).max(1).min(n);
        let val_end = floor(self.train + self.validation).clamp(train_end, n);
        (train_end, val_end)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetSplit {
    pub train: Dataset,
    pub validation: Dataset,
    pub test: Dataset,
    /// Users too small for the fractions to apply (all records in train).
    pub degenerate_users: Vec<String>,
}

/// Sorts each user's records by time (stable) and cuts them per [`SplitSpec::cuts`].
pub fn split_dataset(dataset: &Dataset, spec: SplitSpec) -> Result<DatasetSplit, EvalError> {
    spec.validate()?;
    let mut out = DatasetSplit::default();
    for (user, records) in &dataset.users {
        if records.is_empty() {
            continue;
        }
        let mut sorted = records.clone();
        sorted.sort_by_key(|r| r.checkin.timestamp);
        let n = sorted.len();
        let (a, b) = spec.cuts(n);
        if ((spec.train * n as f64) + 1e-9).floor() < 1.0 {
            out.degenerate_users.push(user.clone());
        }
        let test: Vec<_> = sorted.split_off(b);
        let val: Vec<_> = sorted.split_off(a);
        out.train.users.insert(user.clone(), sorted);
        if !val.is_empty() {
            out.validation.users.insert(user.clone(), val);
        }
        if !test.is_empty() {
            out.test.users.insert(user.clone(), test);
        }
    }
    Ok(out)
}
