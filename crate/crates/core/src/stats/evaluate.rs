use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use super::StatsError;
use crate::fsutil;
use crate::ingest::{Continent, ImageRecord};
use crate::matching::{MatchResult, RoadSegment};
use crate::surface::{is_kept, normalize_surface, FilterThresholds, PredLabel, PredictionRecord, SurfaceLabel};

/// Confusion counts with Paved as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn record(&mut self, predicted_paved: bool, actual_paved: bool) {
        match (predicted_paved, actual_paved) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fn_ += 1,
        }
    }

    pub fn merge(&mut self, o: &ConfusionCounts) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.tn += o.tn;
        self.fn_ += o.fn_;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub mcc: f64,
}

fn div(n: f64, d: f64) -> f64 {
    if d == 0.0 {
        0.0
    } else {
        n / d
    }
}

/// Accuracy, precision, recall, F1 and MCC. A metric whose denominator is
/// zero is reported as 0.
///
/// ```
/// use surface_forge::stats::{confusion_metrics, ConfusionCounts};
/// let m = confusion_metrics(&ConfusionCounts { tp: 139_329, fp: 8_452, tn: 15_114, fn_: 18_591 }).unwrap();
/// assert!((m.accuracy - 0.851).abs() < 1e-3);
/// assert!((m.mcc - 0.453).abs() < 1e-3);
/// ```
pub fn confusion_metrics(c: &ConfusionCounts) -> Result<Metrics, StatsError> {
    if c.total() == 0 {
        return Err(StatsError::EmptyConfusion);
    }
    let (tp, fp, tn, fn_) = (c.tp as f64, c.fp as f64, c.tn as f64, c.fn_ as f64);
    let precision = div(tp, tp + fp);
    let recall = div(tp, tp + fn_);
    let denom = ((tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_)).sqrt();
    Ok(Metrics {
        accuracy: (tp + tn) / c.total() as f64,
        precision,
        recall,
        f1: div(2.0 * precision * recall, precision + recall),
        mcc: div(tp * tn - fp * fn_, denom),
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EvalDiagnostics {
    pub unmatched: usize,
    pub missing_prediction: usize,
    pub filtered_out: usize,
    pub unknown_surface: usize,
    pub no_continent: usize,
    pub evaluated: usize,
}

/// Compares each kept, matched image's prediction with the normalized OSM
/// surface of its nearest segment, per continent.
pub fn evaluate_against_osm(
    images: &[ImageRecord],
    predictions: &[PredictionRecord],
    matches: &[MatchResult],
    segments: &[RoadSegment],
    thresholds: FilterThresholds,
) -> (BTreeMap<Continent, ConfusionCounts>, EvalDiagnostics) {
    let preds: HashMap<&str, &PredictionRecord> = predictions.iter().map(|p| (p.image_id.as_str(), p)).collect();
    let continent: HashMap<&str, Option<Continent>> = images.iter().map(|r| (r.id.as_str(), r.continent)).collect();
    let surface: HashMap<i64, SurfaceLabel> =
        segments.iter().map(|s| (s.osm_id, normalize_surface(s.surface_tag.as_deref().unwrap_or("")))).collect();
    let mut out: BTreeMap<Continent, ConfusionCounts> = BTreeMap::new();
    let mut d = EvalDiagnostics::default();
    for m in matches {
        let Some(primary) = m.primary() else {
            d.unmatched += 1;
            continue;
        };
        let Some(p) = preds.get(m.image_id.as_str()) else {
            d.missing_prediction += 1;
            continue;
        };
        if !is_kept(p, thresholds) {
            d.filtered_out += 1;
            continue;
        }
        let actual = surface.get(&primary.osm_id).copied().unwrap_or(SurfaceLabel::Unknown);
        if actual == SurfaceLabel::Unknown {
            d.unknown_surface += 1;
            continue;
        }
        let Some(c) = continent.get(m.image_id.as_str()).copied().flatten() else {
            d.no_continent += 1;
            continue;
        };
        d.evaluated += 1;
        out.entry(c).or_default().record(p.pred_label == PredLabel::Paved, actual == SurfaceLabel::Paved);
    }
    (out, d)
}

pub const EVALUATION_COLUMNS: [&str; 11] =
    ["continent", "total", "tp", "fp", "tn", "fn", "accuracy", "f1", "precision", "recall", "mcc"];

pub fn write_evaluation(path: &Path, counts: &BTreeMap<Continent, ConfusionCounts>) -> std::io::Result<()> {
    fsutil::write_atomic(path, |w| {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(EVALUATION_COLUMNS)?;
        for (c, k) in counts {
            let Ok(m) = confusion_metrics(k) else { continue };
            wtr.write_record([
                c.name().to_string(),
                k.total().to_string(),
                k.tp.to_string(),
                k.fp.to_string(),
                k.tn.to_string(),
                k.fn_.to_string(),
                format!("{:.3}", m.accuracy),
                format!("{:.3}", m.f1),
                format!("{:.3}", m.precision),
                format!("{:.3}", m.recall),
                format!("{:.3}", m.mcc),
            ])?;
        }
        wtr.flush()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{GeoPoint, Polyline};
    use crate::matching::{Assignment, Tier};
    use crate::surface::ZeroShotClass;
    use proptest::prelude::*;

    #[test]
    fn perfect_and_degenerate() {
        let m = confusion_metrics(&ConfusionCounts { tp: 50, fp: 0, tn: 50, fn_: 0 }).unwrap();
        assert_eq!((m.accuracy, m.precision, m.recall, m.f1, m.mcc), (1.0, 1.0, 1.0, 1.0, 1.0));
        let m = confusion_metrics(&ConfusionCounts { tp: 10, fp: 0, tn: 0, fn_: 0 }).unwrap();
        assert_eq!(m.mcc, 0.0);
        assert!(confusion_metrics(&ConfusionCounts::default()).is_err());
    }

    proptest! {
        #[test]
        fn metrics_in_range(tp in 0u64..1000, fp in 0u64..1000, tn in 0u64..1000, fn_ in 0u64..1000) {
            prop_assume!(tp + fp + tn + fn_ > 0);
            let m = confusion_metrics(&ConfusionCounts { tp, fp, tn, fn_ }).unwrap();
            for v in [m.accuracy, m.precision, m.recall, m.f1] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            prop_assert!((-1.0..=1.0).contains(&m.mcc));
        }
    }

    fn image(id: &str, continent: Option<Continent>) -> ImageRecord {
        ImageRecord {
            id: id.into(),
            sequence: "s".into(),
            url: String::new(),
            point: GeoPoint::new(0.0, 0.0).unwrap(),
            height: 1,
            width: 1,
            altitude: None,
            make: None,
            model: None,
            creator: None,
            is_pano: false,
            timestamp: 0,
            country_iso: None,
            continent,
            urban_id: None,
            hdi: None,
        }
    }

    fn segment(id: i64, surface: Option<&str>) -> RoadSegment {
        RoadSegment {
            osm_id: id,
            highway: "primary".into(),
            surface_tag: surface.map(String::from),
            geometry: Polyline::new(vec![GeoPoint::new(0.0, 0.0).unwrap(), GeoPoint::new(0.001, 0.0).unwrap()]).unwrap(),
            changeset_timestamp: None,
        }
    }

    fn matched(image: &str, osm_ids: &[i64]) -> MatchResult {
        MatchResult {
            image_id: image.into(),
            assignments: osm_ids
                .iter()
                .enumerate()
                .map(|(i, &osm_id)| Assignment { osm_id, distance_m: i as f64, abs_diff_m: 0.0, percent_diff: 0.0, closest_point: None })
                .collect(),
            tier: if osm_ids.is_empty() { Tier::Unmatched } else { Tier::T10 },
        }
    }

    fn pred(image: &str, label: PredLabel) -> PredictionRecord {
        PredictionRecord {
            image_id: image.into(),
            pred_label: label,
            pred_class: label.class_name().into(),
            pred_score: 0.9,
            zs_pred_class: ZeroShotClass::Road,
            zs_pred_score: 0.9,
            road_pixel_percentage: 0.5,
            no_road_image_filter: None,
        }
    }

    #[test]
    fn eight_images_two_disagreements() {
        use PredLabel::*;
        let af = Some(Continent::Africa);
        let segs = [segment(1, Some("asphalt")), segment(2, Some("dirt")), segment(3, None)];
        let ids = ["a", "b", "c", "d", "e", "f", "g", "h"];
        let images: Vec<_> = ids.iter().map(|i| image(i, af)).collect();
        let matches: Vec<_> = ids.iter().enumerate().map(|(k, i)| matched(i, &[if k < 4 { 1 } else { 2 }])).collect();
        // a..d on asphalt, e..h on dirt; c and g disagree
        let labels = [Paved, Paved, Unpaved, Paved, Unpaved, Unpaved, Paved, Unpaved];
        let preds: Vec<_> = ids.iter().zip(labels).map(|(i, l)| pred(i, l)).collect();
        let (counts, d) = evaluate_against_osm(&images, &preds, &matches, &segs, FilterThresholds::default());
        assert_eq!(counts[&Continent::Africa], ConfusionCounts { tp: 3, fp: 1, tn: 3, fn_: 1 });
        assert_eq!(d.evaluated, 8);

        // only the nearest segment counts, and unknown surfaces are skipped
        let extra = vec![matched("x", &[3, 1]), matched("y", &[])];
        let images = vec![image("x", af), image("y", af)];
        let (counts, d) = evaluate_against_osm(&images, &[pred("x", Paved), pred("y", Paved)], &extra, &segs, FilterThresholds::default());
        assert!(counts.is_empty());
        assert_eq!((d.unknown_surface, d.unmatched), (1, 1));
    }
}
