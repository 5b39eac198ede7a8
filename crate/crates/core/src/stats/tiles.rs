use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde_json::{json, Value};

use super::facts::{Piece, SegmentFacts};
use crate::fsutil;
use crate::geo::{tile_bbox, TileId};
use crate::surface::SurfaceLabel;

/// Lengths behind the coverage and pavedness ratios.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Tally {
    pub osm_length_m: f64,
    pub covered_length_m: f64,
    pub labeled_length_m: f64,
    pub paved_length_m: f64,
}

impl Tally {
    pub fn add(&mut self, length_m: f64, covered_m: f64, label: SurfaceLabel) {
        self.osm_length_m += length_m;
        self.covered_length_m += covered_m;
        match label {
            SurfaceLabel::Paved => {
                self.labeled_length_m += length_m;
                self.paved_length_m += length_m;
            }
            SurfaceLabel::Unpaved => self.labeled_length_m += length_m,
            SurfaceLabel::Unknown => {}
        }
    }

    pub fn merge(&mut self, other: &Tally) {
        self.osm_length_m += other.osm_length_m;
        self.covered_length_m += other.covered_length_m;
        self.labeled_length_m += other.labeled_length_m;
        self.paved_length_m += other.paved_length_m;
    }

    /// Absent when there is no road at all.
    pub fn coverage_ratio(&self) -> Option<f64> {
        ratio(self.covered_length_m, self.osm_length_m)
    }

    /// Absent when nothing is labeled.
    pub fn paved_ratio(&self) -> Option<f64> {
        ratio(self.paved_length_m, self.labeled_length_m)
    }
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den > 0.0).then(|| (num / den).clamp(0.0, 1.0))
}

/// A tally for all roads and for the urban and rural subsets.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Split {
    pub total: Tally,
    pub urban: Tally,
    pub rural: Tally,
}

impl Split {
    pub fn add(&mut self, urban: bool, length_m: f64, covered_m: f64, label: SurfaceLabel) {
        self.total.add(length_m, covered_m, label);
        if urban {
            self.urban.add(length_m, covered_m, label);
        } else {
            self.rural.add(length_m, covered_m, label);
        }
    }

    pub fn add_piece(&mut self, f: &SegmentFacts, p: &Piece) {
        self.add(f.urban, p.length_m, p.covered_m, f.label);
    }

    pub fn add_segment(&mut self, f: &SegmentFacts) {
        self.add(f.urban, f.length_m(), f.covered_m(), f.label);
    }

    pub fn merge(&mut self, other: &Split) {
        self.total.merge(&other.total);
        self.urban.merge(&other.urban);
        self.rural.merge(&other.rural);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TileStats {
    pub tile: TileId,
    pub lengths: Split,
    pub n_segments: usize,
}

/// Coverage and pavedness of one tile from the pieces of the given segments
/// that fall in it.
pub fn tile_stats(tile: TileId, segments: &[&SegmentFacts]) -> TileStats {
    let mut lengths = Split::default();
    let mut n_segments = 0;
    for f in segments {
        let mut hit = false;
        for p in f.pieces.iter().filter(|p| p.tile == tile) {
            lengths.add_piece(f, p);
            hit = true;
        }
        n_segments += usize::from(hit);
    }
    TileStats { tile, lengths, n_segments }
}

/// Stats for every tile touched by a segment, sorted by tile.
pub fn compute_tile_stats(facts: &[SegmentFacts]) -> Vec<TileStats> {
    let mut by_tile: BTreeMap<TileId, Vec<&SegmentFacts>> = BTreeMap::new();
    for f in facts {
        for p in &f.pieces {
            let v = by_tile.entry(p.tile).or_default();
            if !v.last().is_some_and(|last| std::ptr::eq(*last, f)) {
                v.push(f);
            }
        }
    }
    let groups: Vec<_> = by_tile.into_iter().collect();
    groups.par_iter().map(|(t, fs)| tile_stats(*t, fs)).collect()
}

pub const TILE_COLUMNS: [&str; 16] = [
    "z",
    "x",
    "y",
    "osm_length_m",
    "covered_length_m",
    "coverage_ratio",
    "paved_ratio",
    "urban_osm_length_m",
    "urban_covered_length_m",
    "urban_coverage_ratio",
    "urban_paved_ratio",
    "rural_osm_length_m",
    "rural_covered_length_m",
    "rural_coverage_ratio",
    "rural_paved_ratio",
    "n_segments",
];

pub(crate) fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_default()
}

fn tally_cells(t: &Tally) -> [String; 4] {
    [
        format!("{:.2}", t.osm_length_m),
        format!("{:.2}", t.covered_length_m),
        fmt_opt(t.coverage_ratio()),
        fmt_opt(t.paved_ratio()),
    ]
}

fn tile_row(s: &TileStats) -> Vec<String> {
    let mut row = vec![s.tile.z.to_string(), s.tile.x.to_string(), s.tile.y.to_string()];
    row.extend(tally_cells(&s.lengths.total));
    row.extend(tally_cells(&s.lengths.urban));
    row.extend(tally_cells(&s.lengths.rural));
    row.push(s.n_segments.to_string());
    row
}

pub fn write_tiles_csv(path: &Path, stats: &[TileStats]) -> std::io::Result<()> {
    fsutil::write_atomic(path, |w| {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(TILE_COLUMNS)?;
        for s in stats {
            wtr.write_record(tile_row(s))?;
        }
        wtr.flush()
    })
}

/// One polygon per tile carrying the `tiles.csv` columns as properties.
/// Absent ratios become `null`.
pub fn tiles_geojson(stats: &[TileStats]) -> Value {
    let features: Vec<Value> = stats
        .iter()
        .map(|s| {
            let b = tile_bbox(s.tile);
            let ring = [(b.min_lon, b.min_lat), (b.max_lon, b.min_lat), (b.max_lon, b.max_lat), (b.min_lon, b.max_lat), (b.min_lon, b.min_lat)];
            let mut props = serde_json::Map::new();
            for (name, cell) in TILE_COLUMNS.iter().zip(tile_row(s)) {
                let v = if cell.is_empty() {
                    Value::Null
                } else {
                    cell.parse::<f64>().map(|x| json!(x)).unwrap_or(Value::String(cell))
                };
                props.insert(name.to_string(), v);
            }
            props.insert("tile".into(), json!(s.tile.to_string()));
            json!({
                "type": "Feature",
                "geometry": {"type": "Polygon", "coordinates": [ring.iter().map(|(x, y)| json!([x, y])).collect::<Vec<_>>()]},
                "properties": props,
            })
        })
        .collect();
    json!({"type": "FeatureCollection", "features": features})
}

pub fn write_tiles_geojson(path: &Path, stats: &[TileStats]) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(&tiles_geojson(stats)).map_err(std::io::Error::other)?;
    text.push('\n');
    fsutil::write_atomic_bytes(path, text.as_bytes())
}
