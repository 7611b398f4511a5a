//! Home location estimation from night-time check-ins.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::checkin::CheckIn;
use super::geo::GeoPoint;

/// Check-ins with a clock hour below this count as night-time.
pub const NIGHT_END_HOUR: u32 = 6;
/// Grid resolution in degrees.
pub const CELL_DEGREES: f64 = 0.001;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HomeError {
    #[error("user {0:?} has no check-ins")]
    NoData(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomeLocation {
    pub user_id: String,
    pub latitude: f64,
    pub longitude: f64,
    pub support_count: usize,
}

impl HomeLocation {
    pub fn point(&self) -> GeoPoint {
        GeoPoint::new(self.latitude, self.longitude)
    }
}

fn cell_key(lat: f64, lon: f64) -> (i64, i64) {
    (
        (lat / CELL_DEGREES).floor() as i64,
        (lon / CELL_DEGREES).floor() as i64,
    )
}

/// Centroid of the most populated grid cell among the user's 00:00-05:59
/// check-ins, or among all check-ins when none fall in that window. Ties go
/// to the smallest cell key.
pub fn estimate_home<'a, I>(user_id: &str, checkins: I) -> Result<HomeLocation, HomeError>
where
    I: IntoIterator<Item = &'a CheckIn>,
{
    let all: Vec<&CheckIn> = checkins.into_iter().collect();
    if all.is_empty() {
        return Err(HomeError::NoData(user_id.to_string()));
    }
    let night: Vec<&CheckIn> = all
        .iter()
        .copied()
        .filter(|c| c.hour() < NIGHT_END_HOUR)
        .collect();
    let pool = if night.is_empty() { &all } else { &night };

    let mut cells: BTreeMap<(i64, i64), Vec<(f64, f64)>> = BTreeMap::new();
    for c in pool {
        cells
            .entry(cell_key(c.latitude, c.longitude))
            .or_default()
            .push((c.latitude, c.longitude));
    }
    // max_by_key keeps the last maximum, so scan in reverse key order
    let (_, points) = cells
        .iter_mut()
        .rev()
        .max_by_key(|(_, pts)| pts.len())
        .expect("pool is non-empty");

    // fixed summation order makes the centroid independent of input order
    points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let n = points.len() as f64;
    let (lat_sum, lon_sum) = points
        .iter()
        .fold((0.0, 0.0), |(la, lo), &(a, b)| (la + a, lo + b));
    Ok(HomeLocation {
        user_id: user_id.to_string(),
        latitude: lat_sum / n,
        longitude: lon_sum / n,
        support_count: points.len(),
    })
}
