use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use super::RoadSegment;
use crate::geo::{point_to_polyline_distance, GeoError, GeoPoint, SegmentIndex};
use crate::ingest::ImageRecord;

/// Which distance band the nearest segment fell into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Tier {
    T10,
    T20,
    T30,
    Unmatched,
}

impl Tier {
    fn from_band(band: usize) -> Self {
        [Tier::T10, Tier::T20, Tier::T30][band]
    }

    pub fn band(self) -> Option<usize> {
        match self {
            Tier::T10 => Some(0),
            Tier::T20 => Some(1),
            Tier::T30 => Some(2),
            Tier::Unmatched => None,
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tier::T10 => "T10",
            Tier::T20 => "T20",
            Tier::T30 => "T30",
            Tier::Unmatched => "Unmatched",
        })
    }
}

impl FromStr for Tier {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "T10" => Ok(Tier::T10),
            "T20" => Ok(Tier::T20),
            "T30" => Ok(Tier::T30),
            "Unmatched" => Ok(Tier::Unmatched),
            _ => Err(format!("unknown tier {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub osm_id: i64,
    pub distance_m: f64,
    /// Metres farther than the nearest assignment.
    pub abs_diff_m: f64,
    pub percent_diff: f64,
    /// Foot of the shortest line; not kept when read back from `matches.csv`.
    pub closest_point: Option<GeoPoint>,
}

/// Assignments of one image, nearest first. The first one is the primary.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub image_id: String,
    pub assignments: Vec<Assignment>,
    pub tier: Tier,
}

impl MatchResult {
    pub fn primary(&self) -> Option<&Assignment> {
        self.assignments.first()
    }
}

/// Distance bands and the bbox buffer used for candidate search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchParams {
    pub radii_m: [f64; 3],
    pub bbox_buffer_m: f64,
}

impl Default for MatchParams {
    fn default() -> Self {
        Self { radii_m: [10.0, 20.0, 30.0], bbox_buffer_m: 30.0 }
    }
}

/// Normalized distance contrast between a candidate segment and the nearest
/// one: `(d_current - d_nearest) / (d_current + d_nearest)`.
///
/// Zero for the nearest segment itself, rising towards 1 for far candidates;
/// it reaches exactly 1 only when the nearest segment is at distance 0. Both
/// distances zero (a point on a junction of two ways) gives 0.
///
/// ```
/// use surface_forge::matching::percent_diff;
/// assert_eq!(percent_diff(10.0, 10.0), 0.0);
/// assert_eq!(percent_diff(30.0, 10.0), 0.5);
/// assert_eq!(percent_diff(0.0, 0.0), 0.0);
/// ```
///
/// # Panics
///
/// If `d_current < d_nearest`.
pub fn percent_diff(d_current: f64, d_nearest: f64) -> f64 {
    assert!(
        d_current >= d_nearest && d_nearest >= 0.0,
        "percent_diff needs d_current >= d_nearest >= 0, got ({d_current}, {d_nearest})"
    );
    let sum = d_current + d_nearest;
    if sum == 0.0 {
        0.0
    } else {
        (d_current - d_nearest) / sum
    }
}

/// Turns candidate `(osm_id, distance, closest)` triples into a tiered result.
/// Shared by the indexed matcher and the brute-force reference.
pub fn assign_tier(image_id: &str, mut candidates: Vec<(i64, f64, GeoPoint)>, radii: &[f64; 3]) -> MatchResult {
    candidates.retain(|c| c.1 <= radii[2]);
    candidates.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let Some(nearest) = candidates.first().map(|c| c.1) else {
        return MatchResult { image_id: image_id.to_string(), assignments: Vec::new(), tier: Tier::Unmatched };
    };
    let band = radii.iter().position(|r| nearest <= *r).expect("nearest within outer radius");
    let radius = radii[band];
    let assignments = candidates
        .into_iter()
        .take_while(|c| c.1 <= radius)
        .map(|(osm_id, d, closest)| Assignment {
            osm_id,
            distance_m: d,
            abs_diff_m: d - nearest,
            percent_diff: percent_diff(d, nearest),
            closest_point: Some(closest),
        })
        .collect();
    MatchResult { image_id: image_id.to_string(), assignments, tier: Tier::from_band(band) }
}

/// Segments with a spatial index over their buffered bounding boxes.
pub struct Matcher<'a> {
    segments: &'a [RoadSegment],
    index: SegmentIndex,
    params: MatchParams,
}

impl<'a> Matcher<'a> {
    pub fn new(segments: &'a [RoadSegment], params: MatchParams) -> Result<Self, GeoError> {
        let boxes: Vec<_> = segments.iter().map(|s| s.geometry.bbox()).collect();
        Ok(Self { segments, index: SegmentIndex::build(&boxes, params.bbox_buffer_m)?, params })
    }

    /// Matches one point: buffered-bbox candidates, exact distances, then the
    /// first band holding any candidate. Every candidate inside that band is
    /// assigned.
    pub fn match_point(&self, image_id: &str, p: GeoPoint) -> MatchResult {
        let candidates = self
            .index
            .query(p)
            .into_iter()
            .map(|i| {
                let s = &self.segments[i];
                let (d, closest) = point_to_polyline_distance(p, &s.geometry);
                (s.osm_id, d, closest)
            })
            .collect();
        assign_tier(image_id, candidates, &self.params.radii_m)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TierCounts {
    pub t10: usize,
    pub t20: usize,
    pub t30: usize,
    pub unmatched: usize,
}

impl TierCounts {
    pub fn from_results(results: &[MatchResult]) -> Self {
        let mut c = Self::default();
        for r in results {
            match r.tier {
                Tier::T10 => c.t10 += 1,
                Tier::T20 => c.t20 += 1,
                Tier::T30 => c.t30 += 1,
                Tier::Unmatched => c.unmatched += 1,
            }
        }
        c
    }

    pub fn matched(&self) -> usize {
        self.t10 + self.t20 + self.t30
    }
}

/// One result per image, sorted by image id. Runs on the current rayon pool.
pub fn match_all(images: &[ImageRecord], segments: &[RoadSegment], params: MatchParams) -> Result<Vec<MatchResult>, GeoError> {
    let matcher = Matcher::new(segments, params)?;
    let mut out: Vec<MatchResult> = images.par_iter().map(|img| matcher.match_point(&img.id, img.point)).collect();
    out.sort_by(|a, b| a.image_id.cmp(&b.image_id));
    Ok(out)
}
