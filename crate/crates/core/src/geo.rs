//! Geographic primitives: WGS84 points, a local equirectangular projection
//! onto a plane measured in meters, and haversine distances.
//!
//! All noise magnitudes, attack displacements and trajectory distances in this
//! crate are metric, so geographic coordinates are projected once around a
//! corpus-level origin and every downstream computation happens in planar
//! meters. The projection is accurate to well under half a meter within the
//! ~50 km validity radius that a single city corpus occupies.

use serde::{Deserialize, Serialize};

/// Mean Earth radius in meters (spherical model).
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// A WGS84 longitude/latitude pair in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lon: f64,
    pub lat: f64,
}

impl GeoPoint {
    pub fn new(lon: f64, lat: f64) -> Self {
        GeoPoint { lon, lat }
    }

    /// True when the coordinates are inside the WGS84 domain.
    pub fn is_valid(&self) -> bool {
        self.lon.is_finite()
            && self.lat.is_finite()
            && (-180.0..=180.0).contains(&self.lon)
            && (-90.0..=90.0).contains(&self.lat)
    }
}

/// A point on the local projection plane, in meters east/north of the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarPoint {
    pub x: f64,
    pub y: f64,
}

impl PlanarPoint {
    pub fn new(x: f64, y: f64) -> Self {
        PlanarPoint { x, y }
    }

    pub fn dist(&self, other: &PlanarPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Local equirectangular projection of `p` around `origin`.
///
/// `x = R * dlon * cos(lat_origin)`, `y = R * dlat` with angles in radians.
/// Total on valid inputs; the inverse is [`unproject`].
pub fn project(p: GeoPoint, origin: GeoPoint) -> PlanarPoint {
    let lat0 = origin.lat.to_radians();
    let x = EARTH_RADIUS_M * (p.lon - origin.lon).to_radians() * lat0.cos();
    let y = EARTH_RADIUS_M * (p.lat - origin.lat).to_radians();
    PlanarPoint { x, y }
}

/// Inverse of [`project`]; composes with it to the identity to < 0.5 m within
/// 50 km of the origin.
pub fn unproject(p: PlanarPoint, origin: GeoPoint) -> GeoPoint {
    let lat0 = origin.lat.to_radians();
    let lon = origin.lon + (p.x / (EARTH_RADIUS_M * lat0.cos())).to_degrees();
    let lat = origin.lat + (p.y / EARTH_RADIUS_M).to_degrees();
    GeoPoint { lon, lat }
}

/// Great-circle distance in meters between two points (haversine formula).
pub fn haversine_m(a: GeoPoint, b: GeoPoint) -> f64 {
    let phi1 = a.lat.to_radians();
    let phi2 = b.lat.to_radians();
    let dphi = (b.lat - a.lat).to_radians();
    let dlambda = (b.lon - a.lon).to_radians();
    let s = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * s.sqrt().asin()
}
