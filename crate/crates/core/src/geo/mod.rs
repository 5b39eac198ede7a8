//! Geodesy and tile math on a spherical Earth.
//!
//! Distances are great-circle distances on a sphere of radius
//! [`EARTH_RADIUS_M`]. Point-to-line projection happens in a local
//! equirectangular plane centred on the query point, which at matching scale
//! (tens of metres) differs from the geodesic answer by well under a millimetre.

mod bbox;
mod index;
mod point;
mod polyline;
mod tile;

pub use bbox::{buffer_bbox, BBox};
pub use index::SegmentIndex;
pub use point::{haversine, GeoPoint, EARTH_RADIUS_M, METERS_PER_DEGREE};
pub use polyline::{point_to_polyline_distance, Polyline};
pub use tile::{lonlat_to_tile, tile_bbox, tiles_covering, TileId, MAX_MERCATOR_LAT};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeoError {
    #[error("longitude {0} out of range [-180, 180]")]
    LongitudeOutOfRange(f64),
    #[error("latitude out of range: {0} not in [-90, 90]")]
    LatitudeOutOfRange(f64),
    #[error("latitude {0} outside the Web-Mercator range of ±{MAX_MERCATOR_LAT}")]
    OutsideMercator(f64),
    #[error("polyline needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("polyline has identical consecutive points at index {0}")]
    RepeatedPoint(usize),
    #[error("invalid tile {z}/{x}/{y}")]
    InvalidTile { z: u8, x: u32, y: u32 },
    #[error("bbox buffer must be non-negative, got {0}")]
    NegativeBuffer(f64),
    #[error("cannot buffer a bbox centred at latitude {0}: longitude buffer degenerates near the pole")]
    BufferNearPole(f64),
    #[error("bbox corners inverted: min ({0}, {1}) exceeds max ({2}, {3})")]
    InvertedBBox(f64, f64, f64, f64),
}
