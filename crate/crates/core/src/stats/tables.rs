use std::collections::BTreeMap;
use std::path::Path;

use super::facts::SegmentFacts;
use super::tiles::{fmt_opt, Split, Tally};
use crate::fsutil;
use crate::ingest::Continent;

/// OSM highway values from most to least important.
pub const HIGHWAY_ORDER: [&str; 24] = [
    "motorway",
    "motorway_link",
    "trunk",
    "trunk_link",
    "primary",
    "primary_link",
    "secondary",
    "secondary_link",
    "tertiary",
    "tertiary_link",
    "unclassified",
    "residential",
    "living_street",
    "service",
    "pedestrian",
    "road",
    "busway",
    "track",
    "footway",
    "cycleway",
    "bridleway",
    "steps",
    "corridor",
    "path",
];

fn highway_rank(h: &str) -> (usize, &str) {
    (HIGHWAY_ORDER.iter().position(|c| *c == h).unwrap_or(HIGHWAY_ORDER.len()), h)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassRow {
    pub highway: String,
    pub n_segments: usize,
    pub lengths: Tally,
}

/// One row per highway class present, motorway first; unranked classes
/// follow alphabetically.
pub fn breakdown_by_highway_class(facts: &[SegmentFacts]) -> Vec<ClassRow> {
    let mut rows: BTreeMap<&str, ClassRow> = BTreeMap::new();
    for f in facts {
        let row = rows.entry(f.highway.as_str()).or_insert_with(|| ClassRow { highway: f.highway.clone(), n_segments: 0, lengths: Tally::default() });
        row.n_segments += 1;
        row.lengths.add(f.length_m(), f.covered_m(), f.label);
    }
    let mut out: Vec<ClassRow> = rows.into_values().collect();
    out.sort_by(|a, b| highway_rank(&a.highway).cmp(&highway_rank(&b.highway)));
    out
}

pub fn write_highway_classes(path: &Path, rows: &[ClassRow]) -> std::io::Result<()> {
    fsutil::write_atomic(path, |w| {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["highway", "n_segments", "length_km", "covered_km", "coverage_pct", "paved_ratio"])?;
        for r in rows {
            wtr.write_record([
                r.highway.clone(),
                r.n_segments.to_string(),
                format!("{:.3}", r.lengths.osm_length_m / 1000.0),
                format!("{:.3}", r.lengths.covered_length_m / 1000.0),
                r.lengths.coverage_ratio().map(|c| format!("{:.2}", c * 100.0)).unwrap_or_default(),
                fmt_opt(r.lengths.paved_ratio()),
            ])?;
        }
        wtr.flush()
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountryRow {
    pub iso3: String,
    pub continent: Continent,
    pub hdi: Option<f64>,
    pub lengths: Split,
}

impl CountryRow {
    pub fn labeled_length_km(&self) -> f64 {
        self.lengths.total.labeled_length_m / 1000.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinentRow {
    pub continent: Continent,
    pub lengths: Split,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CountryReport {
    /// Sorted by iso3.
    pub countries: Vec<CountryRow>,
    /// In `Continent::ALL` order, present continents only.
    pub continents: Vec<ContinentRow>,
}

impl CountryReport {
    /// The `n` countries with the lowest total pavedness, ascending.
    pub fn lowest(&self, n: usize) -> Vec<&CountryRow> {
        let mut rows: Vec<&CountryRow> = self.countries.iter().filter(|r| r.lengths.total.paved_ratio().is_some()).collect();
        rows.sort_by(|a, b| {
            a.lengths.total.paved_ratio().unwrap().total_cmp(&b.lengths.total.paved_ratio().unwrap()).then(a.iso3.cmp(&b.iso3))
        });
        rows.truncate(n);
        rows
    }
}

/// Length-weighted paved ratios per country and continent. Segments outside
/// every country are left out. `hdi` maps iso3 to index.
pub fn country_report(facts: &[SegmentFacts], hdi: &BTreeMap<String, f64>) -> CountryReport {
    let mut countries: BTreeMap<&str, CountryRow> = BTreeMap::new();
    for f in facts {
        let (Some(iso), Some(continent)) = (f.country.as_deref(), f.continent) else { continue };
        countries
            .entry(iso)
            .or_insert_with(|| CountryRow { iso3: iso.to_string(), continent, hdi: hdi.get(iso).copied(), lengths: Split::default() })
            .lengths
            .add_segment(f);
    }
    let countries: Vec<CountryRow> = countries.into_values().collect();
    let continents = Continent::ALL
        .iter()
        .filter_map(|&c| {
            let mut lengths = Split::default();
            let mut any = false;
            for r in countries.iter().filter(|r| r.continent == c) {
                lengths.merge(&r.lengths);
                any = true;
            }
            any.then_some(ContinentRow { continent: c, lengths })
        })
        .collect();
    CountryReport { countries, continents }
}

pub fn write_countries(path: &Path, report: &CountryReport) -> std::io::Result<()> {
    fsutil::write_atomic(path, |w| {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["iso3", "continent", "total_paved_ratio", "urban_paved_ratio", "rural_paved_ratio", "labeled_length_km"])?;
        for r in &report.countries {
            wtr.write_record([
                r.iso3.clone(),
                r.continent.name().to_string(),
                fmt_opt(r.lengths.total.paved_ratio()),
                fmt_opt(r.lengths.urban.paved_ratio()),
                fmt_opt(r.lengths.rural.paved_ratio()),
                format!("{:.3}", r.labeled_length_km()),
            ])?;
        }
        wtr.flush()
    })
}

pub fn write_continents(path: &Path, report: &CountryReport) -> std::io::Result<()> {
    fsutil::write_atomic(path, |w| {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["continent", "total_paved_ratio", "urban_paved_ratio", "rural_paved_ratio", "labeled_length_km", "osm_length_km", "covered_length_km"])?;
        for r in &report.continents {
            let t = &r.lengths.total;
            wtr.write_record([
                r.continent.name().to_string(),
                fmt_opt(t.paved_ratio()),
                fmt_opt(r.lengths.urban.paved_ratio()),
                fmt_opt(r.lengths.rural.paved_ratio()),
                format!("{:.3}", t.labeled_length_m / 1000.0),
                format!("{:.3}", t.osm_length_m / 1000.0),
                format!("{:.3}", t.covered_length_m / 1000.0),
            ])?;
        }
        wtr.flush()
    })
}

/// `part / total` as a percentage; 0 for an empty total.
pub fn share_percent(part: f64, total: f64) -> f64 {
    if total > 0.0 {
        100.0 * part / total
    } else {
        0.0
    }
}
