use serde::{Deserialize, Serialize};

use super::{GeoError, GeoPoint, METERS_PER_DEGREE};

/// Axis-aligned longitude/latitude rectangle. Edges are inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub min_lon: f64,
    pub min_lat: f64,
    pub max_lon: f64,
    pub max_lat: f64,
}

impl BBox {
    pub fn new(min_lon: f64, min_lat: f64, max_lon: f64, max_lat: f64) -> Result<Self, GeoError> {
        if !(min_lon <= max_lon && min_lat <= max_lat) {
            return Err(GeoError::InvertedBBox(min_lon, min_lat, max_lon, max_lat));
        }
        Ok(Self { min_lon, min_lat, max_lon, max_lat })
    }

    pub fn from_point(p: GeoPoint) -> Self {
        Self { min_lon: p.lon, min_lat: p.lat, max_lon: p.lon, max_lat: p.lat }
    }

    /// Smallest bbox around the points, `None` for an empty iterator.
    pub fn from_points<I: IntoIterator<Item = GeoPoint>>(points: I) -> Option<Self> {
        let mut it = points.into_iter();
        let first = Self::from_point(it.next()?);
        Some(it.fold(first, |b, p| b.expand(p)))
    }

    pub fn expand(self, p: GeoPoint) -> Self {
        Self {
            min_lon: self.min_lon.min(p.lon),
            min_lat: self.min_lat.min(p.lat),
            max_lon: self.max_lon.max(p.lon),
            max_lat: self.max_lat.max(p.lat),
        }
    }

    pub fn contains(&self, p: GeoPoint) -> bool {
        (self.min_lon..=self.max_lon).contains(&p.lon) && (self.min_lat..=self.max_lat).contains(&p.lat)
    }

    pub fn intersects(&self, other: &BBox) -> bool {
        self.min_lon <= other.max_lon
            && other.min_lon <= self.max_lon
            && self.min_lat <= other.max_lat
            && other.min_lat <= self.max_lat
    }

    pub fn center(&self) -> GeoPoint {
        GeoPoint {
            lon: (self.min_lon + self.max_lon) / 2.0,
            lat: (self.min_lat + self.max_lat) / 2.0,
        }
    }
}

/// Grows a bbox outward by `meters` on every side.
///
/// Degrees per metre are taken at the bbox's centre latitude, so the
/// longitude margin widens by `1 / cos(lat)` away from the equator.
pub fn buffer_bbox(b: BBox, meters: f64) -> Result<BBox, GeoError> {
    if !(meters >= 0.0) {
        return Err(GeoError::NegativeBuffer(meters));
    }
    let center_lat = b.center().lat;
    if center_lat.abs() >= 89.9 {
        return Err(GeoError::BufferNearPole(center_lat));
    }
    let dlat = meters / METERS_PER_DEGREE;
    let dlon = meters / (METERS_PER_DEGREE * center_lat.to_radians().cos());
    Ok(BBox {
        min_lon: b.min_lon - dlon,
        min_lat: (b.min_lat - dlat).max(-90.0),
        max_lon: b.max_lon + dlon,
        max_lat: (b.max_lat + dlat).min(90.0),
    })
}
