//! Context dimensions, analyst views and their discrete index spaces.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::checkin::CheckIn;
use super::dataset::AnnotatedCheckIn;
use super::geo::haversine_km;
use super::hierarchy::CategoryHierarchy;
use super::home::HomeLocation;

pub const TIME_BUCKETS: usize = 24;
pub const DISTANCE_BUCKETS: usize = 4;
/// Upper edges (km) of the half-open distance bands `[0,1) [1,10) [10,30) [30,inf)`.
pub const DISTANCE_EDGES_KM: [f64; 3] = [1.0, 10.0, 30.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ContextKind {
    Time,
    Distance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ViewKind {
    RootCategory,
    LeafCategory,
}

impl ContextKind {
    pub fn name(self) -> &'static str {
        match self {
            ContextKind::Time => "time",
            ContextKind::Distance => "distance",
        }
    }
}

impl ViewKind {
    pub fn name(self) -> &'static str {
        match self {
            ViewKind::RootCategory => "root",
            ViewKind::LeafCategory => "leaf",
        }
    }
}

impl FromStr for ContextKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "time" => Ok(ContextKind::Time),
            "distance" => Ok(ContextKind::Distance),
            _ => Err(format!("unknown context {s:?}")),
        }
    }
}

impl FromStr for ViewKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "root" => Ok(ViewKind::RootCategory),
            "leaf" => Ok(ViewKind::LeafCategory),
            _ => Err(format!("unknown view {s:?}")),
        }
    }
}

/// A (context, view) combination; one feature model per pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Pair {
    pub context: ContextKind,
    pub view: ViewKind,
}

impl Pair {
    pub const TIME_ROOT: Pair = Pair::new(ContextKind::Time, ViewKind::RootCategory);
    pub const TIME_LEAF: Pair = Pair::new(ContextKind::Time, ViewKind::LeafCategory);
    pub const DISTANCE_ROOT: Pair = Pair::new(ContextKind::Distance, ViewKind::RootCategory);
    pub const DISTANCE_LEAF: Pair = Pair::new(ContextKind::Distance, ViewKind::LeafCategory);

    /// Canonical order; also the tie-break order wherever pairs compete.
    pub const CANONICAL: [Pair; 4] = [
        Pair::TIME_ROOT,
        Pair::TIME_LEAF,
        Pair::DISTANCE_ROOT,
        Pair::DISTANCE_LEAF,
    ];

    pub const fn new(context: ContextKind, view: ViewKind) -> Self {
        Self { context, view }
    }

    /// Two-letter code used in report columns (`tr`, `tc`, `dr`, `dc`).
    pub fn code(self) -> &'static str {
        match (self.context, self.view) {
            (ContextKind::Time, ViewKind::RootCategory) => "tr",
            (ContextKind::Time, ViewKind::LeafCategory) => "tc",
            (ContextKind::Distance, ViewKind::RootCategory) => "dr",
            (ContextKind::Distance, ViewKind::LeafCategory) => "dc",
        }
    }

    pub fn canonical_index(self) -> usize {
        Pair::CANONICAL.iter().position(|p| *p == self).unwrap()
    }
}

impl fmt::Display for Pair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.context.name(), self.view.name())
    }
}

impl FromStr for Pair {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if let Some(p) = Pair::CANONICAL.iter().find(|p| p.code() == s) {
            return Ok(*p);
        }
        let (c, v) = s
            .split_once('-')
            .ok_or_else(|| format!("unknown pair {s:?}"))?;
        Ok(Pair::new(c.parse()?, v.parse()?))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextSpec {
    pub kind: ContextKind,
    pub labels: Vec<String>,
}

impl ContextSpec {
    pub fn time() -> Self {
        Self {
            kind: ContextKind::Time,
            labels: (0..TIME_BUCKETS).map(|h| format!("{h:02}h")).collect(),
        }
    }

    pub fn distance() -> Self {
        Self {
            kind: ContextKind::Distance,
            labels: ["<1km", "1-10km", "10-30km", ">=30km"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        }
    }

    pub fn cardinality(&self) -> usize {
        self.labels.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ViewSpec {
    pub kind: ViewKind,
    pub labels: Vec<String>,
}

impl ViewSpec {
    pub fn from_hierarchy(kind: ViewKind, hierarchy: &CategoryHierarchy) -> Self {
        let labels = match kind {
            ViewKind::RootCategory => hierarchy.root_labels().to_vec(),
            ViewKind::LeafCategory => hierarchy.leaf_labels().to_vec(),
        };
        Self { kind, labels }
    }

    pub fn cardinality(&self) -> usize {
        self.labels.len()
    }
}

/// Hour of the recorded clock time.
pub fn bucketize_time(c: &CheckIn) -> usize {
    c.hour() as usize
}

/// Band index of a home-to-venue distance.
pub fn distance_bucket(km: f64) -> usize {
    DISTANCE_EDGES_KM
        .iter()
        .take_while(|&&edge| km >= edge)
        .count()
}

pub fn bucketize_distance(home: &HomeLocation, c: &CheckIn) -> usize {
    distance_bucket(haversine_km(home.point(), c.point()))
}

/// The instantiated context and view dimensions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSpace {
    pub time: ContextSpec,
    pub distance: ContextSpec,
    pub root: ViewSpec,
    pub leaf: ViewSpec,
}

impl FeatureSpace {
    pub fn new(hierarchy: &CategoryHierarchy) -> Self {
        Self {
            time: ContextSpec::time(),
            distance: ContextSpec::distance(),
            root: ViewSpec::from_hierarchy(ViewKind::RootCategory, hierarchy),
            leaf: ViewSpec::from_hierarchy(ViewKind::LeafCategory, hierarchy),
        }
    }

    pub fn context(&self, kind: ContextKind) -> &ContextSpec {
        match kind {
            ContextKind::Time => &self.time,
            ContextKind::Distance => &self.distance,
        }
    }

    pub fn view(&self, kind: ViewKind) -> &ViewSpec {
        match kind {
            ViewKind::RootCategory => &self.root,
            ViewKind::LeafCategory => &self.leaf,
        }
    }

    /// `(rows, cols)` of the pair's feature matrix.
    pub fn shape(&self, pair: Pair) -> (usize, usize) {
        (
            self.context(pair.context).cardinality(),
            self.view(pair.view).cardinality(),
        )
    }

    /// `None` for a distance context when no home is known.
    pub fn context_value(
        &self,
        kind: ContextKind,
        record: &AnnotatedCheckIn,
        home: Option<&HomeLocation>,
    ) -> Option<usize> {
        match kind {
            ContextKind::Time => Some(bucketize_time(&record.checkin)),
            ContextKind::Distance => home.map(|h| bucketize_distance(h, &record.checkin)),
        }
    }

    pub fn view_value(&self, kind: ViewKind, record: &AnnotatedCheckIn) -> usize {
        match kind {
            ViewKind::RootCategory => record.root,
            ViewKind::LeafCategory => record.leaf,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn at_time(h: u32, m: u32, s: u32) -> CheckIn {
        CheckIn {
            user_id: "1".into(),
            poi_id: "p".into(),
            category_id: "c".into(),
            category_name: String::new(),
            latitude: 0.0,
            longitude: 0.0,
            timestamp: NaiveDate::from_ymd_opt(2012, 11, 5)
                .unwrap()
                .and_hms_opt(h, m, s)
                .unwrap(),
        }
    }

    #[test]
    fn time_buckets() {
        assert_eq!(bucketize_time(&at_time(17, 42, 24)), 17);
        assert_eq!(bucketize_time(&at_time(0, 0, 0)), 0);
        assert_eq!(bucketize_time(&at_time(23, 48, 22)), 23);
    }

    #[test]
    fn distance_bands_are_half_open() {
        assert_eq!(distance_bucket(0.5), 0);
        assert_eq!(distance_bucket(1.0), 1);
        assert_eq!(distance_bucket(9.999), 1);
        assert_eq!(distance_bucket(10.0), 2);
        assert_eq!(distance_bucket(30.0), 3);
        assert_eq!(distance_bucket(45.0), 3);
    }

    #[test]
    fn distance_bucket_from_home() {
        let home = HomeLocation {
            user_id: "1".into(),
            latitude: 0.0,
            longitude: 0.0,
            support_count: 1,
        };
        let mut c = at_time(1, 0, 0);
        assert_eq!(bucketize_distance(&home, &c), 0);
        // one degree of latitude is about 111 km
        c.latitude = 1.0;
        assert_eq!(bucketize_distance(&home, &c), 3);
    }

    #[test]
    fn pair_codes_parse() {
        for p in Pair::CANONICAL {
            assert_eq!(p.code().parse::<Pair>().unwrap(), p);
            assert_eq!(p.to_string().parse::<Pair>().unwrap(), p);
        }
        assert_eq!(Pair::DISTANCE_LEAF.to_string(), "distance-leaf");
        assert!("xx".parse::<Pair>().is_err());
    }

    #[test]
    fn context_cardinalities() {
        assert_eq!(ContextSpec::time().cardinality(), 24);
        assert_eq!(ContextSpec::distance().cardinality(), 4);
    }

    proptest! {
        #[test]
        fn buckets_are_total(km in 0.0f64..20_000.0, secs in 0u32..86_400) {
            prop_assert!(distance_bucket(km) < DISTANCE_BUCKETS);
            let c = at_time(secs / 3600, (secs / 60) % 60, secs % 60);
            prop_assert!(bucketize_time(&c) < TIME_BUCKETS);
        }
    }
}
