//! Check-in parsing, category resolution, home estimation and bucketing.

pub mod checkin;
pub mod dataset;
pub mod geo;
pub mod hierarchy;
pub mod home;
pub mod space;

pub use checkin::{parse_checkin_line, CheckIn, CheckInSchema, ParseError};
pub use dataset::{
    annotate, estimate_homes, load_dataset, read_dataset, AnnotatedCheckIn, Dataset, IngestError,
    IngestSummary,
};
pub use geo::{haversine_km, GeoPoint};
pub use hierarchy::{CategoryHierarchy, HierarchyError};
pub use home::{estimate_home, HomeError, HomeLocation};
pub use space::{
    bucketize_distance, bucketize_time, distance_bucket, ContextKind, ContextSpec, FeatureSpace,
    Pair, ViewKind, ViewSpec,
};
