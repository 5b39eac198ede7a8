use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{BBox, GeoError, GeoPoint};

/// Northern/southern limit of the Web-Mercator square, `atan(sinh(π))`.
pub const MAX_MERCATOR_LAT: f64 = 85.051_128_779_806_59;

/// A slippy-map (XYZ) tile. `y = 0` is the northernmost row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TileId {
    pub z: u8,
    pub x: u32,
    pub y: u32,
}

impl TileId {
    pub fn new(z: u8, x: u32, y: u32) -> Result<Self, GeoError> {
        if z > 30 || x >= (1u32 << z) || y >= (1u32 << z) {
            return Err(GeoError::InvalidTile { z, x, y });
        }
        Ok(Self { z, x, y })
    }

    fn n(&self) -> f64 {
        f64::from(1u32 << self.z)
    }
}

impl fmt::Display for TileId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.z, self.x, self.y)
    }
}

/// The tile at zoom `z` that contains `p`.
///
/// ```
/// use surface_forge::geo::{lonlat_to_tile, GeoPoint, TileId};
/// let t = lonlat_to_tile(GeoPoint::new(0.0, 0.0).unwrap(), 8).unwrap();
/// assert_eq!(t, TileId::new(8, 128, 128).unwrap());
/// ```
pub fn lonlat_to_tile(p: GeoPoint, z: u8) -> Result<TileId, GeoError> {
    if !p.lat.is_finite() || p.lat.abs() > MAX_MERCATOR_LAT {
        return Err(GeoError::OutsideMercator(p.lat));
    }
    if z > 30 {
        return Err(GeoError::InvalidTile { z, x: 0, y: 0 });
    }
    let n = f64::from(1u32 << z);
    let max = (1u32 << z) - 1;
    let x = ((p.lon + 180.0) / 360.0 * n).floor().clamp(0.0, f64::from(max)) as u32;
    let phi = p.lat.to_radians();
    let merc = (phi.tan() + 1.0 / phi.cos()).ln();
    let y = ((1.0 - merc / PI) / 2.0 * n).floor().clamp(0.0, f64::from(max)) as u32;
    Ok(TileId { z, x, y })
}

fn row_lat(y: f64, n: f64) -> f64 {
    (PI * (1.0 - 2.0 * y / n)).sinh().atan().to_degrees()
}

/// Longitude/latitude bounds of a tile.
pub fn tile_bbox(t: TileId) -> BBox {
    let n = t.n();
    BBox {
        min_lon: f64::from(t.x) / n * 360.0 - 180.0,
        max_lon: f64::from(t.x + 1) / n * 360.0 - 180.0,
        min_lat: row_lat(f64::from(t.y + 1), n),
        max_lat: row_lat(f64::from(t.y), n),
    }
}

/// All tiles at zoom `z` whose bounds intersect `b`, in (x, y) order.
/// Latitudes beyond the Mercator limit are clamped.
pub fn tiles_covering(b: &BBox, z: u8) -> Result<Vec<TileId>, GeoError> {
    let clamp = |lat: f64| lat.clamp(-MAX_MERCATOR_LAT, MAX_MERCATOR_LAT);
    let nw = lonlat_to_tile(GeoPoint { lon: b.min_lon.clamp(-180.0, 180.0), lat: clamp(b.max_lat) }, z)?;
    let se = lonlat_to_tile(GeoPoint { lon: b.max_lon.clamp(-180.0, 180.0), lat: clamp(b.min_lat) }, z)?;
    let mut out = Vec::with_capacity(((se.x - nw.x + 1) * (se.y - nw.y + 1)) as usize);
    for x in nw.x..=se.x {
        for y in nw.y..=se.y {
            out.push(TileId { z, x, y });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::EARTH_RADIUS_M;
    use rand::{Rng, SeedableRng};

    fn p(lon: f64, lat: f64) -> GeoPoint {
        GeoPoint::new(lon, lat).unwrap()
    }

    #[test]
    fn center_and_corner() {
        assert_eq!(lonlat_to_tile(p(0.0, 0.0), 8).unwrap(), TileId { z: 8, x: 128, y: 128 });
        let eps = 1e-9;
        assert_eq!(lonlat_to_tile(p(-180.0 + eps, 85.05 - eps), 8).unwrap(), TileId { z: 8, x: 0, y: 0 });
        assert_eq!(lonlat_to_tile(p(180.0, -85.05), 8).unwrap(), TileId { z: 8, x: 255, y: 255 });
    }

    #[test]
    fn rejects_beyond_mercator() {
        assert!(matches!(lonlat_to_tile(p(0.0, 86.0), 8), Err(GeoError::OutsideMercator(_))));
        assert!(TileId::new(8, 256, 0).is_err());
    }

    #[test]
    fn equatorial_width_at_zoom_eight() {
        let circumference = 2.0 * PI * EARTH_RADIUS_M;
        let b = tile_bbox(TileId::new(8, 128, 128).unwrap());
        let width = (b.max_lon - b.min_lon).to_radians() * EARTH_RADIUS_M;
        assert!((width - circumference / 256.0).abs() < 1e-6);
        // 40,075,016.686 m on the WGS84 equator
        assert!((40_075_016.686f64 / 256.0 - 156_543.0).abs() < 1.0);
        assert!((width - 156_543.0).abs() < 1_000.0);
    }

    #[test]
    fn hemisphere_tile() {
        let b = tile_bbox(TileId::new(1, 0, 0).unwrap());
        assert_eq!((b.min_lon, b.max_lon), (-180.0, 0.0));
        assert!(b.min_lat.abs() < 1e-12);
        assert!((b.max_lat - MAX_MERCATOR_LAT).abs() < 1e-9);
    }

    #[test]
    fn center_tile_bounds() {
        let b = tile_bbox(TileId::new(8, 128, 128).unwrap());
        assert_eq!(b.min_lon, 0.0);
        assert!((b.max_lon - 1.40625).abs() < 1e-12);
        assert!(b.max_lat.abs() < 1e-12);
        assert!(b.min_lat < 0.0 && b.min_lat > -1.41);
    }

    #[test]
    fn random_round_trip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let z: u8 = rng.gen_range(0..=18);
            let n = 1u32 << z;
            let t = TileId::new(z, rng.gen_range(0..n), rng.gen_range(0..n)).unwrap();
            assert_eq!(lonlat_to_tile(tile_bbox(t).center(), z).unwrap(), t);
        }
    }

    #[test]
    fn neighbours_share_edges() {
        let t = TileId::new(8, 10, 20).unwrap();
        let b = tile_bbox(t);
        assert_eq!(b.max_lon, tile_bbox(TileId::new(8, 11, 20).unwrap()).min_lon);
        assert_eq!(b.min_lat, tile_bbox(TileId::new(8, 10, 21).unwrap()).max_lat);
    }

    #[test]
    fn every_point_in_exactly_one_tile() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let z = 3;
        let all: Vec<TileId> = (0..8).flat_map(|x| (0..8).map(move |y| TileId { z, x, y })).collect();
        for _ in 0..2000 {
            let q = p(rng.gen_range(-179.9..179.9), rng.gen_range(-85.0..85.0));
            let t = lonlat_to_tile(q, z).unwrap();
            assert!(tile_bbox(t).contains(q));
            // interiors do not overlap: no other tile strictly contains q
            let strict = all
                .iter()
                .filter(|o| {
                    let b = tile_bbox(**o);
                    q.lon > b.min_lon && q.lon < b.max_lon && q.lat > b.min_lat && q.lat < b.max_lat
                })
                .count();
            assert!(strict <= 1);
        }
    }

    #[test]
    fn covering_spans_rows_and_columns() {
        let b = BBox::new(-0.5, -0.5, 0.5, 0.5).unwrap();
        let tiles = tiles_covering(&b, 8).unwrap();
        assert_eq!(tiles.len(), 4);
        assert!(tiles.iter().all(|t| tile_bbox(*t).intersects(&b)));
    }
}
