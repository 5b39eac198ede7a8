use std::collections::BTreeMap;

use surface_forge::geo::TileId;
use surface_forge::ingest::Continent;
use surface_forge::stats::{breakdown_by_highway_class, compute_tile_stats, country_report, Piece, SegmentFacts};
use surface_forge::surface::SurfaceLabel;

fn seg(osm_id: i64, country: &str, continent: Continent, urban: bool, label: SurfaceLabel, km: f64) -> SegmentFacts {
    SegmentFacts {
        osm_id,
        highway: "residential".into(),
        urban,
        label,
        country: Some(country.into()),
        continent: Some(continent),
        pieces: vec![Piece { tile: TileId::new(8, 10, 10).unwrap(), length_m: km * 1000.0, covered_m: km * 1000.0 }],
    }
}

/// Paved and unpaved kilometres for one country split.
fn split(out: &mut Vec<SegmentFacts>, country: &str, continent: Continent, urban: bool, paved_km: f64, unpaved_km: f64) {
    let id = out.len() as i64 * 2;
    out.push(seg(id, country, continent, urban, SurfaceLabel::Paved, paved_km));
    out.push(seg(id + 1, country, continent, urban, SurfaceLabel::Unpaved, unpaved_km));
}

#[test]
fn single_country_row_round_trips() {
    let mut facts = Vec::new();
    // 800 km urban at 0.210, 300 km rural at 0.221
    split(&mut facts, "SLE", Continent::Africa, true, 168.0, 632.0);
    split(&mut facts, "SLE", Continent::Africa, false, 66.3, 233.7);
    let report = country_report(&facts, &BTreeMap::new());
    let row = &report.countries[0];
    let r = |x: Option<f64>| (x.unwrap() * 1000.0).round() / 1000.0;
    assert_eq!(r(row.lengths.total.paved_ratio()), 0.213);
    assert_eq!(r(row.lengths.urban.paved_ratio()), 0.210);
    assert_eq!(r(row.lengths.rural.paved_ratio()), 0.221);
    assert!((row.labeled_length_km() - 1100.0).abs() < 1e-9);
}

#[test]
fn continent_average_is_length_weighted() {
    let mut facts = Vec::new();
    // three countries whose weighted mean is 0.768: (0.9*500 + 0.7*300 + 0.54*200) / 1000
    split(&mut facts, "AAA", Continent::Africa, false, 450.0, 50.0);
    split(&mut facts, "BBB", Continent::Africa, true, 210.0, 90.0);
    split(&mut facts, "CCC", Continent::Africa, false, 108.0, 92.0);
    let report = country_report(&facts, &BTreeMap::new());
    let africa = report.continents.iter().find(|c| c.continent == Continent::Africa).unwrap();
    let got = africa.lengths.total.paved_ratio().unwrap();
    assert!((got - 0.768).abs() < 1e-12, "{got}");
    let unweighted: f64 = report.countries.iter().map(|c| c.lengths.total.paved_ratio().unwrap()).sum::<f64>() / 3.0;
    assert!((unweighted - 0.768).abs() > 0.01);
    // urban-only country has no rural ratio
    let bbb = report.countries.iter().find(|c| c.iso3 == "BBB").unwrap();
    assert_eq!(bbb.lengths.rural.paved_ratio(), None);
    assert_eq!(report.lowest(1)[0].iso3, "CCC");
}

#[test]
fn class_breakdown_blends_by_length() {
    let mut facts = vec![
        seg(1, "X", Continent::Europe, false, SurfaceLabel::Paved, 3.0),
        seg(2, "X", Continent::Europe, false, SurfaceLabel::Unpaved, 1.0),
    ];
    facts[0].highway = "motorway".into();
    facts[1].highway = "track".into();
    let rows = breakdown_by_highway_class(&facts);
    let names: Vec<&str> = rows.iter().map(|r| r.highway.as_str()).collect();
    assert_eq!(names, ["motorway", "track"]);
    assert_eq!(rows[0].lengths.paved_ratio(), Some(1.0));
    assert_eq!(rows[1].lengths.paved_ratio(), Some(0.0));
    let tiles = compute_tile_stats(&facts);
    assert_eq!(tiles.len(), 1);
    assert_eq!(tiles[0].lengths.total.paved_ratio(), Some(0.75));
}
