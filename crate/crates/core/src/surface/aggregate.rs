use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use rayon::prelude::*;

use super::filter::{is_kept, FilterThresholds, PredLabel, PredictionRecord};
use super::normalize::SurfaceLabel;
use crate::fsutil;
use crate::ingest::IngestError;
use crate::matching::{MatchResult, RoadSegment};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregationParams {
    /// Distance at which the linear weight reaches zero before clamping.
    pub max_distance_m: f64,
    pub min_weight: f64,
    /// Label for an exact 0.5 score.
    pub tie: SurfaceLabel,
    /// Multiply each weight by the classifier's score.
    pub score_weighted: bool,
}

impl Default for AggregationParams {
    fn default() -> Self {
        Self { max_distance_m: 30.0, min_weight: 1.0 / 30.0, tie: SurfaceLabel::Unpaved, score_weighted: false }
    }
}

impl AggregationParams {
    pub fn weight(&self, distance_m: f64) -> f64 {
        (1.0 - distance_m / self.max_distance_m).max(self.min_weight)
    }
}

/// One image's vote for one segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contribution {
    pub distance_m: f64,
    pub pred_label: PredLabel,
    pub pred_score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentLabel {
    pub osm_id: i64,
    pub label: SurfaceLabel,
    /// Weighted fraction of paved votes.
    pub weighted_score: f64,
    pub n_points: usize,
    pub weights_sum: f64,
}

/// Distance-weighted vote over the images matched to one segment.
///
/// ```
/// use surface_forge::surface::*;
/// let c = |d, l| Contribution { distance_m: d, pred_label: l, pred_score: 0.9 };
/// let p = AggregationParams::default();
/// let s = aggregate_segment(7, &[c(5.0, PredLabel::Paved), c(29.0, PredLabel::Unpaved)], &p);
/// assert!((s.weighted_score - 25.0 / 26.0).abs() < 1e-12);
/// assert_eq!(s.label, SurfaceLabel::Paved);
/// let tie = aggregate_segment(7, &[c(10.0, PredLabel::Paved), c(10.0, PredLabel::Unpaved)], &p);
/// assert_eq!(tie.label, SurfaceLabel::Unpaved);
/// ```
pub fn aggregate_segment(osm_id: i64, contributions: &[Contribution], params: &AggregationParams) -> SegmentLabel {
    if contributions.is_empty() {
        return SegmentLabel { osm_id, label: SurfaceLabel::Unknown, weighted_score: 0.0, n_points: 0, weights_sum: 0.0 };
    }
    // fixed summation order keeps the result bit-identical under permutation
    let mut sorted = contributions.to_vec();
    sorted.sort_by(|a, b| {
        a.distance_m
            .total_cmp(&b.distance_m)
            .then(a.pred_label.cmp(&b.pred_label))
            .then(a.pred_score.total_cmp(&b.pred_score))
    });
    let (mut paved, mut total) = (0.0, 0.0);
    for c in &sorted {
        let mut w = params.weight(c.distance_m);
        if params.score_weighted {
            w *= c.pred_score;
        }
        total += w;
        if c.pred_label == PredLabel::Paved {
            paved += w;
        }
    }
    let score = if total > 0.0 { (paved / total).clamp(0.0, 1.0) } else { 0.0 };
    let label = if score > 0.5 {
        SurfaceLabel::Paved
    } else if score < 0.5 {
        SurfaceLabel::Unpaved
    } else {
        params.tie
    };
    SegmentLabel { osm_id, label, weighted_score: score, n_points: sorted.len(), weights_sum: total }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelDiagnostics {
    pub matched_images: usize,
    pub missing_prediction: usize,
    pub filtered_out: usize,
    /// Assignments to ids absent from the segment list.
    pub unknown_segment: usize,
    pub contributions: usize,
}

/// Labels every segment that has at least one surviving matched image,
/// ordered by osm_id.
pub fn label_all_segments(
    matches: &[MatchResult],
    predictions: &[PredictionRecord],
    segments: &[RoadSegment],
    thresholds: FilterThresholds,
    params: &AggregationParams,
) -> (Vec<SegmentLabel>, LabelDiagnostics) {
    let by_image: HashMap<&str, &PredictionRecord> = predictions.iter().map(|p| (p.image_id.as_str(), p)).collect();
    let known: HashSet<i64> = segments.iter().map(|s| s.osm_id).collect();
    let mut diag = LabelDiagnostics::default();
    let mut groups: BTreeMap<i64, Vec<Contribution>> = BTreeMap::new();
    for m in matches.iter().filter(|m| !m.assignments.is_empty()) {
        diag.matched_images += 1;
        let Some(p) = by_image.get(m.image_id.as_str()) else {
            diag.missing_prediction += 1;
            continue;
        };
        if !is_kept(p, thresholds) {
            diag.filtered_out += 1;
            continue;
        }
        for a in &m.assignments {
            if !known.contains(&a.osm_id) {
                diag.unknown_segment += 1;
                continue;
            }
            diag.contributions += 1;
            groups.entry(a.osm_id).or_default().push(Contribution {
                distance_m: a.distance_m,
                pred_label: p.pred_label,
                pred_score: p.pred_score,
            });
        }
    }
    let groups: Vec<(i64, Vec<Contribution>)> = groups.into_iter().collect();
    let labels = groups.par_iter().map(|(id, cs)| aggregate_segment(*id, cs, params)).collect();
    (labels, diag)
}

pub const LABEL_COLUMNS: [&str; 4] = ["osm_id", "label", "weighted_score", "n_points"];

pub fn write_segment_labels(path: &Path, labels: &[SegmentLabel]) -> Result<(), IngestError> {
    fsutil::write_atomic(path, |w| {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(LABEL_COLUMNS)?;
        for l in labels {
            wtr.write_record([
                l.osm_id.to_string(),
                l.label.to_string(),
                format!("{:.4}", l.weighted_score),
                l.n_points.to_string(),
            ])?;
        }
        wtr.flush()
    })
    .map_err(|e| IngestError::io(path, e))
}

/// Reads `segments_labeled.csv`. `weights_sum` is not stored and reads as 0.
pub fn read_segment_labels(path: &Path) -> Result<Vec<SegmentLabel>, IngestError> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| IngestError::csv(path, e))?;
    let headers = rdr.headers().map_err(|e| IngestError::csv(path, e))?;
    if headers.iter().ne(LABEL_COLUMNS) {
        return Err(IngestError::Csv { path: path.display().to_string(), message: format!("expected header {}", LABEL_COLUMNS.join(",")) });
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| IngestError::csv(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |m: String| IngestError::Csv { path: path.display().to_string(), message: format!("line {line}: {m}") };
        out.push(SegmentLabel {
            osm_id: rec[0].parse().map_err(|_| bad(format!("bad osm_id {:?}", &rec[0])))?,
            label: rec[1].parse().map_err(bad)?,
            weighted_score: rec[2].parse().map_err(|_| bad(format!("bad weighted_score {:?}", &rec[2])))?,
            n_points: rec[3].parse().map_err(|_| bad(format!("bad n_points {:?}", &rec[3])))?,
            weights_sum: 0.0,
        });
    }
    Ok(out)
}
