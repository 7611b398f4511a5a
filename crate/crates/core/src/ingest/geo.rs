//! Great-circle geometry on a spherical Earth.

use crate::scalar::Real;

pub const EARTH_RADIUS_KM: f64 = 6371.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoPoint<T = f64> {
    pub lat: T,
    pub lon: T,
}

impl<T> GeoPoint<T> {
    pub fn new(lat: T, lon: T) -> Self {
        Self { lat, lon }
    }
}

/// Haversine distance in kilometres.
pub fn haversine_km<T: Real>(a: GeoPoint<T>, b: GeoPoint<T>) -> T {
    let two = T::from_f64_lossy(2.0);
    let radius = T::from_f64_lossy(EARTH_RADIUS_KM);
    let (lat1, lat2) = (a.lat.to_radians(), b.lat.to_radians());
    let half_dlat = (lat2 - lat1) / two;
    let half_dlon = (b.lon - a.lon).to_radians() / two;
    let h = half_dlat.sin().powi(2) + lat1.cos() * lat2.cos() * half_dlon.sin().powi(2);
    two * radius * h.sqrt().min(T::one()).asin()
}

/// Point reached by travelling `distance_km` from `origin` along the initial
/// `bearing_deg` (clockwise from north).
pub fn destination(origin: GeoPoint, distance_km: f64, bearing_deg: f64) -> GeoPoint {
    let delta = distance_km / EARTH_RADIUS_KM;
    let theta = bearing_deg.to_radians();
    let (phi1, lambda1) = (origin.lat.to_radians(), origin.lon.to_radians());
    let phi2 = (phi1.sin() * delta.cos() + phi1.cos() * delta.sin() * theta.cos()).asin();
    let lambda2 = lambda1
        + (theta.sin() * delta.sin() * phi1.cos()).atan2(delta.cos() - phi1.sin() * phi2.sin());
    let lon = (lambda2.to_degrees() + 540.0) % 360.0 - 180.0;
    GeoPoint::new(phi2.to_degrees(), lon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Spherical law of cosines on unit vectors, via the chord length.
    fn chord_oracle(a: GeoPoint, b: GeoPoint) -> f64 {
        let v = |p: GeoPoint| {
            let (phi, lam) = (p.lat.to_radians(), p.lon.to_radians());
            [phi.cos() * lam.cos(), phi.cos() * lam.sin(), phi.sin()]
        };
        let (u, w) = (v(a), v(b));
        let chord = ((u[0] - w[0]).powi(2) + (u[1] - w[1]).powi(2) + (u[2] - w[2]).powi(2)).sqrt();
        2.0 * (chord / 2.0).asin() * EARTH_RADIUS_KM
    }

    #[test]
    fn identical_points_are_zero() {
        let p = GeoPoint::new(40.0, -74.0);
        assert_eq!(haversine_km(p, p), 0.0);
    }

    #[test]
    fn manhattan_pair_matches_chord_oracle() {
        let a = GeoPoint::new(40.7128, -74.0060);
        let b = GeoPoint::new(40.7580, -73.9855);
        let d = haversine_km(a, b);
        assert!((d - chord_oracle(a, b)).abs() < 1e-6, "{d}");
        assert!((d - 5.3).abs() < 0.1);
    }

    #[test]
    fn works_in_single_precision() {
        let a = GeoPoint::new(40.7128f32, -74.0060);
        let b = GeoPoint::new(40.7580f32, -73.9855);
        assert!((haversine_km(a, b) as f64 - 5.3).abs() < 0.1);
    }

    proptest! {
        #[test]
        fn symmetric(
            lat1 in -90.0f64..90.0, lon1 in -180.0f64..180.0,
            lat2 in -90.0f64..90.0, lon2 in -180.0f64..180.0,
        ) {
            let (a, b) = (GeoPoint::new(lat1, lon1), GeoPoint::new(lat2, lon2));
            prop_assert_eq!(haversine_km(a, b), haversine_km(b, a));
            prop_assert!(haversine_km(a, b) >= 0.0);
        }

        #[test]
        fn destination_distance_recovered(
            lat in -60.0f64..60.0, lon in -179.0f64..179.0,
            d in 0.01f64..80.0, bearing in 0.0f64..360.0,
        ) {
            let o = GeoPoint::new(lat, lon);
            let p = destination(o, d, bearing);
            prop_assert!((haversine_km(o, p) - d).abs() < 1e-6);
        }
    }
}
