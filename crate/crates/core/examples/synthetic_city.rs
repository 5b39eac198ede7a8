//! Generates the synthetic city fixture: an 11 x 11 street grid straddling a
//! zoom-8 tile edge and a country border, driven by street-view sequences,
//! plus mock classifier scores.
//!
//! ```text
//! cargo run --example synthetic_city -- crates/core/tests/fixtures/synthetic_city
//! ```

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use surface_forge::geo::{GeoPoint, Polyline, METERS_PER_DEGREE};
use surface_forge::ingest::{read_urban_areas, thin_all, write_image_records, ImageRecord, RecordFormat, ThinGaps, UrbanAreas};
use surface_forge::matching::{segments_to_geojson, RoadSegment};
use surface_forge::surface::{write_predictions, PredLabel, PredictionRecord, ZeroShotClass};

const N: usize = 11;
const BLOCK_M: f64 = 200.0;
const LAT0: f64 = 0.30;
/// A z8 tile edge.
const TILE_EDGE_LON: f64 = 33.75;

fn dlat() -> f64 {
    BLOCK_M / METERS_PER_DEGREE
}

fn dlon() -> f64 {
    BLOCK_M / (METERS_PER_DEGREE * LAT0.to_radians().cos())
}

fn round7(x: f64) -> f64 {
    (x * 1e7).round() / 1e7
}

/// Grid coordinates (in blocks) to a point. The tile edge runs through the
/// middle of the 5th block.
fn at(gx: f64, gy: f64) -> GeoPoint {
    GeoPoint::new(round7(TILE_EDGE_LON + (gx - 4.5) * dlon()), round7(LAT0 + gy * dlat())).unwrap()
}

fn highway(i: usize, j: usize, horizontal: bool) -> &'static str {
    let line = if horizontal { j } else { i };
    match line {
        5 => "primary",
        0 | 10 => "track",
        2 | 8 => "secondary",
        _ => "residential",
    }
}

fn pick<'a>(rng: &mut ChaCha8Rng, xs: &[&'a str]) -> &'a str {
    xs[rng.gen_range(0..xs.len())]
}

struct Street {
    segment: RoadSegment,
    truly_paved: bool,
}

fn streets(rng: &mut ChaCha8Rng) -> Vec<Street> {
    let mut out = Vec::new();
    for horizontal in [true, false] {
        for a in 0..N {
            for b in 0..N - 1 {
                let (i, j) = if horizontal { (b, a) } else { (a, b) };
                let (p, q) = if horizontal { (at(i as f64, j as f64), at(i as f64 + 1.0, j as f64)) } else { (at(i as f64, j as f64), at(i as f64, j as f64 + 1.0)) };
                let osm_id = if horizontal { 100_000 + 100 * j as i64 + i as i64 } else { 200_000 + 100 * i as i64 + j as i64 };
                let hw = highway(i, j, horizontal);
                let central = (2..=8).contains(&i) && (2..=8).contains(&j);
                let truly_paved = match hw {
                    "primary" | "secondary" => true,
                    "residential" => rng.gen_bool(if central { 0.8 } else { 0.4 }),
                    _ => rng.gen_bool(0.1),
                };
                let r: f64 = rng.gen();
                let surface = if hw != "primary" && r < 0.25 {
                    None
                } else if r < 0.28 {
                    Some(pick(rng, &["paving stones", "asphalt;gravel", "unknown"]))
                } else {
                    // OSM occasionally disagrees with the ground
                    let paved = truly_paved != rng.gen_bool(0.08);
                    Some(if paved {
                        pick(rng, &["asphalt", "asphalt", "concrete", "paving_stones", "paved", "Sett"])
                    } else {
                        pick(rng, &["gravel", "dirt", "ground", "compacted", "unpaved", "Sand "])
                    })
                };
                out.push(Street {
                    segment: RoadSegment {
                        osm_id,
                        highway: hw.into(),
                        surface_tag: surface.map(String::from),
                        geometry: Polyline::new(vec![p, q]).unwrap(),
                        changeset_timestamp: Some(1_600_000_000_000 + osm_id * 1000),
                    },
                    truly_paved,
                });
            }
        }
    }
    out.sort_by_key(|s| s.segment.osm_id);
    out
}

fn square(a: GeoPoint, b: GeoPoint, props: serde_json::Value) -> serde_json::Value {
    let ring = [[a.lon, a.lat], [b.lon, a.lat], [b.lon, b.lat], [a.lon, b.lat], [a.lon, a.lat]];
    json!({"type": "Feature", "geometry": {"type": "Polygon", "coordinates": [ring]}, "properties": props})
}

fn write_json(path: &Path, v: &serde_json::Value) {
    std::fs::write(path, serde_json::to_string_pretty(v).unwrap() + "\n").unwrap();
}

/// One drive along a straight route in grid units, with GPS scatter.
struct Drive {
    from: (f64, f64),
    to: (f64, f64),
    on_street: bool,
}

fn main() {
    let out: PathBuf = std::env::args().nth(1).unwrap_or_else(|| "synthetic_city".into()).into();
    std::fs::create_dir_all(&out).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_917);

    let streets = streets(&mut rng);
    let segments: Vec<RoadSegment> = streets.iter().map(|s| s.segment.clone()).collect();
    write_json(&out.join("segments.geojson"), &segments_to_geojson(&segments));

    // urban core over the central blocks plus a small town in the north-east
    let urban = json!({"type": "FeatureCollection", "features": [
        square(at(0.5, 0.5), at(9.5, 9.5), json!({"id": "U1", "name": "Core", "source": "GHS-UCDB"})),
        square(at(9.6, 9.6), at(10.6, 10.6), json!({"id": "U2", "name": "North-east", "source": "Africapolis"})),
    ]});
    write_json(&out.join("urban_areas.geojson"), &urban);

    let lo = at(-3.0, -3.0);
    let hi = at(13.0, 13.0);
    let mid = GeoPoint::new(TILE_EDGE_LON, lo.lat).unwrap();
    let mid_hi = GeoPoint::new(TILE_EDGE_LON, hi.lat).unwrap();
    let countries = json!({"type": "FeatureCollection", "features": [
        square(lo, mid_hi, json!({"iso3": "UGA", "name": "Westland", "continent": "Africa", "hdi": 0.5})),
        square(mid, hi, json!({"iso3": "KEN", "name": "Eastland", "continent": "Africa", "hdi": 0.5})),
    ]});
    write_json(&out.join("countries.geojson"), &countries);
    std::fs::write(out.join("hdi.csv"), "iso3,hdi\nKEN,0.601\nUGA,0.550\n").unwrap();

    let mut drives = Vec::new();
    for k in 0..N {
        let c = k as f64;
        let passes = if (2..=8).contains(&k) { 3 } else { 2 };
        for pass in 0..passes {
            let (a, b) = if pass % 2 == 0 { (0.0, 10.0) } else { (10.0, 0.0) };
            drives.push(Drive { from: (a, c), to: (b, c), on_street: true });
            // column 3 is never driven end to end
            if k != 3 {
                drives.push(Drive { from: (c, a), to: (c, b), on_street: true });
            }
        }
    }
    drives.push(Drive { from: (3.0, 4.1), to: (3.0, 4.6), on_street: true });
    // footpaths through blocks, mostly far from any street
    drives.push(Drive { from: (2.5, 2.5), to: (7.5, 7.5), on_street: false });
    drives.push(Drive { from: (2.5, 7.5), to: (7.5, 2.5), on_street: false });
    drives.push(Drive { from: (0.5, 0.5), to: (0.5, 3.5), on_street: false });

    let by_id: BTreeMap<i64, &Street> = streets.iter().map(|s| (s.segment.osm_id, s)).collect();
    let street_at = |gx: f64, gy: f64, horizontal: bool| -> Option<&Street> {
        let (i, j) = (gx.floor().clamp(0.0, 9.0) as i64, gy.floor().clamp(0.0, 9.0) as i64);
        let id = if horizontal { 100_000 + 100 * gy.round() as i64 + i } else { 200_000 + 100 * gx.round() as i64 + j };
        by_id.get(&id).copied()
    };

    let mut images = Vec::new();
    let mut truth: BTreeMap<String, bool> = BTreeMap::new();
    let mut counter = 0u64;
    for (n, d) in drives.iter().enumerate() {
        let seq = format!("seq-{n:03}");
        let (dx, dy) = (d.to.0 - d.from.0, d.to.1 - d.from.1);
        let len_m = (dx * dx + dy * dy).sqrt() * BLOCK_M;
        let steps = (len_m / 20.0).round() as usize;
        let horizontal = dy == 0.0;
        let creator = format!("mapper_{}", n % 7);
        let pano = n % 3 == 0;
        for s in 0..=steps {
            let t = s as f64 / steps as f64;
            let (mut gx, mut gy) = (d.from.0 + t * dx, d.from.1 + t * dy);
            let scatter: f64 = rng.gen_range(-1.0f64..1.0).powi(3) * 24.0 / BLOCK_M;
            if horizontal {
                gy += scatter;
            } else {
                gx += scatter;
            }
            let along = rng.gen_range(-3.0..3.0) / BLOCK_M;
            if horizontal { gx += along } else { gy += along }
            counter += 1;
            let id = format!("{:010}", 3_000_000_000u64 + counter * 7);
            let paved = if d.on_street {
                street_at(gx, gy, horizontal).map(|st| st.truly_paved).unwrap_or(true)
            } else {
                rng.gen_bool(0.5)
            };
            truth.insert(id.clone(), paved);
            images.push(ImageRecord {
                url: format!("https://images.example.org/{id}.jpg"),
                id,
                sequence: seq.clone(),
                point: at(gx, gy),
                height: if pano { 2880 } else { 3000 },
                width: if pano { 5760 } else { 4000 },
                altitude: Some(((1130.0 + 12.0 * gy) * 10.0).round() / 10.0),
                make: Some(if pano { "GoPro" } else { "samsung" }.into()),
                model: Some(if pano { "MAX" } else { "SM-A515F" }.into()),
                creator: Some(creator.clone()),
                is_pano: pano,
                timestamp: 1_650_000_000_000 + n as i64 * 3_600_000 + s as i64 * 2_000,
                country_iso: None,
                continent: None,
                urban_id: None,
                hdi: None,
            });
        }
    }
    write_image_records(&out.join("images.csv"), RecordFormat::Csv, &images).unwrap();

    // mock classifier scores for the images that survive thinning
    let areas = read_urban_areas(&out.join("urban_areas.geojson")).unwrap();
    let thinned = thin_all(images.clone(), &UrbanAreas::new(areas), ThinGaps::default());
    let footpath: BTreeSet<String> =
        drives.iter().enumerate().filter(|(_, d)| !d.on_street).map(|(n, _)| format!("seq-{n:03}")).collect();
    let mut preds = Vec::new();
    for r in &thinned {
        if rng.gen_bool(0.01) {
            continue;
        }
        let paved = truth[&r.id] != rng.gen_bool(0.12);
        let label = if paved { PredLabel::Paved } else { PredLabel::Unpaved };
        let off_road = footpath.contains(&r.sequence);
        let (zs, zs_score, road) = if off_road {
            (ZeroShotClass::NoRoad, rng.gen_range(0.6..0.99), rng.gen_range(0.0..0.12))
        } else if rng.gen_bool(0.05) {
            (ZeroShotClass::NoRoad, rng.gen_range(0.5..0.97), rng.gen_range(0.02..0.5))
        } else {
            (ZeroShotClass::Road, rng.gen_range(0.55..0.99), rng.gen_range(0.08..0.65))
        };
        let r3 = |x: f64| (x * 1000.0).round() / 1000.0;
        preds.push(PredictionRecord {
            image_id: r.id.clone(),
            pred_label: label,
            pred_class: label.class_name().into(),
            pred_score: r3(rng.gen_range(0.5..0.999)),
            zs_pred_class: zs,
            zs_pred_score: r3(zs_score),
            road_pixel_percentage: r3(road),
            no_road_image_filter: None,
        });
    }
    write_predictions(&out.join("predictions.csv"), &preds).unwrap();

    std::fs::write(
        out.join("config.toml"),
        "stage_dir = \"stage\"\n\n[inputs]\nimages = \"images.csv\"\nsegments = \"segments.geojson\"\npredictions = \"predictions.csv\"\nurban_areas = \"urban_areas.geojson\"\ncountries = \"countries.geojson\"\nhdi = \"hdi.csv\"\n",
    )
    .unwrap();
    eprintln!("{} segments, {} images, {} after thinning, {} predictions", segments.len(), images.len(), thinned.len(), preds.len());
}
