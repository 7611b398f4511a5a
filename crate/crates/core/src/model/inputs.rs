use std::collections::BTreeMap;
use std::sync::Arc;

use super::network::{TrainingExample, UserInput};
use super::Conditioning;
use crate::features::UserFeatureSet;
use crate::ingest::{ContextKind, Dataset, FeatureSpace, HomeLocation, Pair, ViewKind};
use crate::scalar::Real;

/// Hour one-hot followed by distance-band one-hot.
pub fn context_features<T: Real>(space: &FeatureSpace, time: usize, distance: usize) -> Vec<T> {
    let nt = space.time.cardinality();
    let mut v = vec![T::zero(); nt + space.distance.cardinality()];
    v[time] = T::one();
    v[nt + distance] = T::one();
    v
}

/// L1-normalized matrices for `pairs` plus a one-hot of the assigned pair.
/// Under [`Conditioning::Mask`] every other channel is zeroed.
pub fn user_input<T: Real>(
    ufs: &UserFeatureSet,
    pairs: &[Pair],
    space: &FeatureSpace,
    assigned: Pair,
    conditioning: Conditioning,
) -> UserInput<T> {
    let channels = pairs
        .iter()
        .map(|&p| match ufs.get(p) {
            Some(m) if conditioning == Conditioning::Indicator || p == assigned => {
                m.normalized::<T>()
            }
            _ => {
                let (r, c) = space.shape(p);
                crate::matrix::DenseMatrix::zeros(r, c)
            }
        })
        .collect();
    let indicator = pairs
        .iter()
        .map(|&p| if p == assigned { T::one() } else { T::zero() })
        .collect();
    UserInput {
        user_id: ufs.user_id.clone(),
        channels,
        indicator,
    }
}

/// Shared inputs for every user that has both a feature set and an
/// assignment.
pub fn user_inputs<T: Real>(
    features: &BTreeMap<String, UserFeatureSet>,
    assignments: &BTreeMap<String, Pair>,
    pairs: &[Pair],
    space: &FeatureSpace,
    conditioning: Conditioning,
) -> BTreeMap<String, Arc<UserInput<T>>> {
    features
        .iter()
        .filter_map(|(u, ufs)| {
            let a = *assignments.get(u)?;
            Some((
                u.clone(),
                Arc::new(user_input(ufs, pairs, space, a, conditioning)),
            ))
        })
        .collect()
}

/// One example per check-in of `dataset` whose user has an input and a home.
pub fn build_examples<T: Real>(
    dataset: &Dataset,
    homes: &BTreeMap<String, HomeLocation>,
    space: &FeatureSpace,
    inputs: &BTreeMap<String, Arc<UserInput<T>>>,
    target: ViewKind,
) -> Vec<TrainingExample<T>> {
    let mut out = Vec::new();
    for (u, records) in &dataset.users {
        let (Some(input), Some(home)) = (inputs.get(u), homes.get(u)) else {
            continue;
        };
        for r in records {
            let t = space
                .context_value(ContextKind::Time, r, Some(home))
                .expect("time bucket");
            let d = space
                .context_value(ContextKind::Distance, r, Some(home))
                .expect("home present");
            out.push(TrainingExample {
                input: Arc::clone(input),
                context: context_features(space, t, d),
                target: space.view_value(target, r),
            });
        }
    }
    out
}
