use std::collections::BTreeMap;

use rayon::prelude::*;

use super::{ImageRecord, UrbanAreas};
use crate::geo::haversine;

/// Minimum spacing between kept images, in metres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThinGaps {
    pub urban_m: f64,
    pub rural_m: f64,
}

impl Default for ThinGaps {
    fn default() -> Self {
        Self { urban_m: 100.0, rural_m: 1000.0 }
    }
}

/// Distances within this many metres of the gap count as meeting it, so
/// points laid out exactly one gap apart survive rounding.
pub const GAP_TOLERANCE_M: f64 = 1e-6;

/// Greedy pass in capture order: keep the first image, then every image at
/// least `gap` metres (straight line) from the last kept one.
pub fn greedy_thin<'a>(images: &[&'a ImageRecord], gap: f64) -> Vec<&'a ImageRecord> {
    let mut kept: Vec<&ImageRecord> = Vec::new();
    for img in images {
        match kept.last() {
            Some(last) if haversine(last.point, img.point) < gap - GAP_TOLERANCE_M => {}
            _ => kept.push(img),
        }
    }
    kept
}

fn capture_order(images: &[ImageRecord]) -> Vec<&ImageRecord> {
    let mut ordered: Vec<&ImageRecord> = images.iter().collect();
    ordered.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.id.cmp(&b.id)));
    ordered
}

/// Whether a sequence mainly lies in urban areas.
///
/// The vote runs over the sequence thinned at the urban gap, so dense
/// stretches do not outvote sparse ones and the decision is stable when the
/// thinned output is fed back in. A strict majority is required.
pub fn is_mainly_urban(images: &[ImageRecord], urban: &UrbanAreas, gaps: ThinGaps) -> bool {
    let sample = greedy_thin(&capture_order(images), gaps.urban_m);
    let inside = sample.iter().filter(|r| urban.locate(r.point).is_some()).count();
    2 * inside > sample.len()
}

/// Thins one sequence's images (any order; sorted by capture time here).
///
/// ```
/// # use surface_forge::ingest::{thin_sequence, ThinGaps, UrbanAreas, ImageRecord};
/// # use surface_forge::geo::{GeoPoint, METERS_PER_DEGREE};
/// # let img = |i: usize| ImageRecord {
/// #     id: format!("i{i}"), sequence: "s".into(), url: String::new(),
/// #     point: GeoPoint::new(0.0, i as f64 * 500.0 / METERS_PER_DEGREE).unwrap(),
/// #     height: 1, width: 1, altitude: None, make: None, model: None, creator: None,
/// #     is_pano: false, timestamp: i as i64, country_iso: None, continent: None,
/// #     urban_id: None, hdi: None };
/// let images: Vec<ImageRecord> = (0..11).map(img).collect();
/// let kept = thin_sequence(&images, &UrbanAreas::new(vec![]), ThinGaps::default());
/// let ids: Vec<&str> = kept.iter().map(|r| r.id.as_str()).collect();
/// assert_eq!(ids, ["i0", "i2", "i4", "i6", "i8", "i10"]);
/// ```
pub fn thin_sequence(images: &[ImageRecord], urban: &UrbanAreas, gaps: ThinGaps) -> Vec<ImageRecord> {
    if images.is_empty() {
        return Vec::new();
    }
    let gap = if is_mainly_urban(images, urban, gaps) { gaps.urban_m } else { gaps.rural_m };
    greedy_thin(&capture_order(images), gap).into_iter().cloned().collect()
}

/// Groups records by sequence id, in sequence id order.
pub fn group_by_sequence(records: Vec<ImageRecord>) -> BTreeMap<String, Vec<ImageRecord>> {
    let mut out: BTreeMap<String, Vec<ImageRecord>> = BTreeMap::new();
    for r in records {
        out.entry(r.sequence.clone()).or_default().push(r);
    }
    out
}

/// Thins every sequence in parallel; output is ordered by sequence id then
/// capture order regardless of scheduling.
pub fn thin_all(records: Vec<ImageRecord>, urban: &UrbanAreas, gaps: ThinGaps) -> Vec<ImageRecord> {
    let groups: Vec<Vec<ImageRecord>> = group_by_sequence(records).into_values().collect();
    groups.par_iter().map(|g| thin_sequence(g, urban, gaps)).collect::<Vec<_>>().into_iter().flatten().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{GeoPoint, METERS_PER_DEGREE};
    use crate::ingest::{Rings, UrbanArea, UrbanSource};
    use proptest::prelude::*;

    fn img(i: usize, lon: f64, lat: f64) -> ImageRecord {
        ImageRecord {
            id: format!("i{i:03}"),
            sequence: "s".into(),
            url: String::new(),
            point: GeoPoint::new(lon, lat).unwrap(),
            height: 1,
            width: 1,
            altitude: None,
            make: None,
            model: None,
            creator: None,
            is_pano: false,
            timestamp: i as i64 * 1000,
            country_iso: None,
            continent: None,
            urban_id: None,
            hdi: None,
        }
    }

    fn line_of(n: usize, spacing_m: f64) -> Vec<ImageRecord> {
        (0..n).map(|i| img(i, 0.0, i as f64 * spacing_m / METERS_PER_DEGREE)).collect()
    }

    fn urban_box(x0: f64, y0: f64, x1: f64, y1: f64) -> UrbanAreas {
        let pts = [(x0, y0), (x1, y0), (x1, y1), (x0, y1), (x0, y0)];
        let ring = pts.iter().map(|&(x, y)| GeoPoint::new(x, y).unwrap()).collect();
        UrbanAreas::new(vec![UrbanArea { id: "u".into(), name: "u".into(), source: UrbanSource::GhsUcdb, polygon: Rings::new(vec![ring]).unwrap() }])
    }

    fn ids(v: &[ImageRecord]) -> Vec<&str> {
        v.iter().map(|r| r.id.as_str()).collect()
    }

    #[test]
    fn single_image_kept() {
        let one = line_of(1, 0.0);
        assert_eq!(ids(&thin_sequence(&one, &UrbanAreas::new(vec![]), ThinGaps::default())), ["i000"]);
    }

    #[test]
    fn rural_line_keeps_every_other() {
        let seq = line_of(11, 500.0);
        let kept = thin_sequence(&seq, &UrbanAreas::new(vec![]), ThinGaps::default());
        assert_eq!(ids(&kept), ["i000", "i002", "i004", "i006", "i008", "i010"]);
    }

    #[test]
    fn urban_line_keeps_all() {
        let seq = line_of(11, 500.0);
        let kept = thin_sequence(&seq, &urban_box(-1.0, -1.0, 1.0, 1.0), ThinGaps::default());
        assert_eq!(kept.len(), 11);
    }

    #[test]
    fn exact_half_is_rural() {
        // 4 points 500 m apart, the first two inside the urban box
        let seq = line_of(4, 500.0);
        let cut = 750.0 / METERS_PER_DEGREE;
        let urban = urban_box(-1.0, -1.0, 1.0, cut);
        assert!(!is_mainly_urban(&seq, &urban, ThinGaps::default()));
        assert_eq!(thin_sequence(&seq, &urban, ThinGaps::default()).len(), 2);
    }

    #[test]
    fn capture_order_not_input_order() {
        let mut seq = line_of(3, 2000.0);
        seq.reverse();
        let kept = thin_sequence(&seq, &UrbanAreas::new(vec![]), ThinGaps::default());
        assert_eq!(ids(&kept), ["i000", "i001", "i002"]);
    }

    #[test]
    fn thin_all_groups_and_orders() {
        let mut a = line_of(5, 600.0);
        for r in &mut a {
            r.sequence = "b".into();
        }
        let mut b = line_of(3, 600.0);
        for r in &mut b {
            r.sequence = "a".into();
            r.id = format!("a{}", r.id);
        }
        let all: Vec<ImageRecord> = a.into_iter().chain(b).collect();
        let out = thin_all(all, &UrbanAreas::new(vec![]), ThinGaps::default());
        assert_eq!(ids(&out), ["ai000", "ai002", "i000", "i002", "i004"]);
    }

    // Random walk with variable step lengths so both dense and sparse
    // stretches appear, half of it optionally inside an urban box.
    fn arb_sequence() -> impl Strategy<Value = (Vec<ImageRecord>, bool)> {
        (prop::collection::vec((1.0..700.0f64, -1.0..1.0f64), 1..80), any::<bool>()).prop_map(|(steps, with_urban)| {
            let (mut lon, mut lat) = (0.0f64, 0.0f64);
            let mut heading = 0.0f64;
            let mut out = Vec::new();
            for (i, (step, turn)) in steps.into_iter().enumerate() {
                out.push(img(i, lon, lat));
                heading += turn;
                lon += step * heading.cos() / METERS_PER_DEGREE;
                lat += step * heading.sin() / METERS_PER_DEGREE;
            }
            (out, with_urban)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn thinning_contract((seq, with_urban) in arb_sequence()) {
            let urban = if with_urban { urban_box(-0.01, -0.01, 0.01, 0.01) } else { UrbanAreas::new(vec![]) };
            let gaps = ThinGaps::default();
            let gap = if is_mainly_urban(&seq, &urban, gaps) { gaps.urban_m } else { gaps.rural_m };
            let kept = thin_sequence(&seq, &urban, gaps);
            prop_assert_eq!(&kept[0].id, &seq[0].id);
            for w in kept.windows(2) {
                prop_assert!(haversine(w[0].point, w[1].point) >= gap - GAP_TOLERANCE_M);
            }
            // maximal: every dropped image is closer than the gap to the last kept image before it
            for r in &seq {
                if kept.iter().any(|k| k.id == r.id) { continue; }
                let prev = kept.iter().filter(|k| k.timestamp < r.timestamp).last().unwrap();
                prop_assert!(haversine(prev.point, r.point) < gap - GAP_TOLERANCE_M);
            }
            prop_assert_eq!(thin_sequence(&kept, &urban, gaps), kept);
        }
    }
}
