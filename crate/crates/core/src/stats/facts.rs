use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;

use crate::geo::{tile_bbox, tiles_covering, GeoError, Polyline, TileId};
use crate::ingest::{Continent, Countries, ImageRecord, UrbanAreas};
use crate::matching::{MatchResult, RoadSegment};
use crate::surface::{SegmentLabel, SurfaceLabel};

/// The part of one segment inside one tile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub tile: TileId,
    pub length_m: f64,
    /// Longest matched sequence inside the tile, capped at `length_m`.
    pub covered_m: f64,
}

/// Everything the reports need about one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentFacts {
    pub osm_id: i64,
    pub highway: String,
    pub urban: bool,
    pub label: SurfaceLabel,
    pub country: Option<String>,
    pub continent: Option<Continent>,
    pub pieces: Vec<Piece>,
}

impl SegmentFacts {
    pub fn length_m(&self) -> f64 {
        self.pieces.iter().map(|p| p.length_m).sum()
    }

    pub fn covered_m(&self) -> f64 {
        self.pieces.iter().map(|p| p.covered_m).sum()
    }
}

/// Splits a segment into per-tile pieces and caps the coverage of each.
///
/// ```
/// use surface_forge::geo::{GeoPoint, Polyline, METERS_PER_DEGREE};
/// use surface_forge::stats::segment_pieces;
/// let p = |lon: f64| GeoPoint::new(lon, 10.0).unwrap();
/// let k = 1.0 / (METERS_PER_DEGREE * 10f64.to_radians().cos());
/// let segment = Polyline::new(vec![p(1.0), p(1.0 + 1000.0 * k)]).unwrap();
/// let sequence = Polyline::new(vec![p(1.0), p(1.0 + 500.0 * k)]).unwrap();
/// let pieces = segment_pieces(&segment, &[&sequence], 8).unwrap();
/// assert_eq!(pieces.len(), 1);
/// assert!((pieces[0].covered_m / pieces[0].length_m - 0.5).abs() < 1e-3);
/// ```
pub fn segment_pieces(segment: &Polyline, sequences: &[&Polyline], z: u8) -> Result<Vec<Piece>, GeoError> {
    let mut out = Vec::new();
    for tile in tiles_covering(&segment.bbox(), z)? {
        let b = tile_bbox(tile);
        let length_m = segment.clipped_length(&b);
        if length_m <= 0.0 {
            continue;
        }
        let longest = sequences.iter().map(|s| s.clipped_length(&b)).fold(0.0, f64::max);
        out.push(Piece { tile, length_m, covered_m: longest.min(length_m) });
    }
    Ok(out)
}

/// Sequence tracks from images ordered by capture time, then id.
pub fn sequence_tracks(images: &[ImageRecord]) -> BTreeMap<String, Polyline> {
    let mut groups: BTreeMap<&str, Vec<&ImageRecord>> = BTreeMap::new();
    for r in images {
        groups.entry(r.sequence.as_str()).or_default().push(r);
    }
    groups
        .into_iter()
        .filter_map(|(seq, mut rs)| {
            rs.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then(a.id.cmp(&b.id)));
            Polyline::from_track(rs.iter().map(|r| r.point)).map(|l| (seq.to_string(), l))
        })
        .collect()
}

/// Sequence ids with at least one image matched to each segment.
pub fn sequences_by_segment(matches: &[MatchResult], images: &[ImageRecord]) -> BTreeMap<i64, BTreeSet<String>> {
    let seq_of: HashMap<&str, &str> = images.iter().map(|r| (r.id.as_str(), r.sequence.as_str())).collect();
    let mut out: BTreeMap<i64, BTreeSet<String>> = BTreeMap::new();
    for m in matches {
        let Some(seq) = seq_of.get(m.image_id.as_str()) else { continue };
        for a in &m.assignments {
            out.entry(a.osm_id).or_default().insert(seq.to_string());
        }
    }
    out
}

pub struct FactInputs<'a> {
    pub segments: &'a [RoadSegment],
    pub labels: &'a [SegmentLabel],
    pub matched_sequences: &'a BTreeMap<i64, BTreeSet<String>>,
    pub tracks: &'a BTreeMap<String, Polyline>,
    pub urban: &'a UrbanAreas,
    pub countries: &'a Countries,
    pub zoom: u8,
}

/// Builds facts for every segment, in input order. Urban membership and
/// country come from the segment's midpoint.
pub fn build_segment_facts(inp: &FactInputs<'_>) -> Result<Vec<SegmentFacts>, GeoError> {
    let labels: HashMap<i64, SurfaceLabel> = inp.labels.iter().map(|l| (l.osm_id, l.label)).collect();
    let empty = BTreeSet::new();
    inp.segments
        .par_iter()
        .map(|s| {
            let seqs: Vec<&Polyline> = inp
                .matched_sequences
                .get(&s.osm_id)
                .unwrap_or(&empty)
                .iter()
                .filter_map(|id| inp.tracks.get(id))
                .collect();
            let mid = s.geometry.midpoint();
            let country = inp.countries.locate(mid);
            Ok(SegmentFacts {
                osm_id: s.osm_id,
                highway: s.highway.clone(),
                urban: inp.urban.locate(mid).is_some(),
                label: labels.get(&s.osm_id).copied().unwrap_or(SurfaceLabel::Unknown),
                country: country.map(|c| c.iso3.clone()),
                continent: country.map(|c| c.continent),
                pieces: segment_pieces(&s.geometry, &seqs, inp.zoom)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{GeoPoint, METERS_PER_DEGREE};

    fn line(lon0: f64, metres: f64, lat: f64) -> Polyline {
        let k = 1.0 / (METERS_PER_DEGREE * lat.to_radians().cos());
        Polyline::new(vec![GeoPoint::new(lon0, lat).unwrap(), GeoPoint::new(lon0 + metres * k, lat).unwrap()]).unwrap()
    }

    #[test]
    fn coverage_capped_at_segment_length() {
        let seg = line(1.0, 1000.0, 5.0);
        let seq = line(0.99, 2000.0 + 0.01 * METERS_PER_DEGREE * 5f64.to_radians().cos(), 5.0);
        let pieces = segment_pieces(&seg, &[&seq], 8).unwrap();
        assert_eq!(pieces[0].covered_m, pieces[0].length_m);
        assert_eq!(segment_pieces(&seg, &[], 8).unwrap()[0].covered_m, 0.0);
    }

    #[test]
    fn pieces_sum_to_length_across_tiles() {
        // 1.40625 degrees is one z8 tile edge in longitude
        let seg = line(1.3, 30_000.0, 0.5);
        let pieces = segment_pieces(&seg, &[], 8).unwrap();
        assert_eq!(pieces.len(), 2);
        let total: f64 = pieces.iter().map(|p| p.length_m).sum();
        assert!((total - seg.length_m()).abs() < 1e-6 * seg.length_m());
    }
}
