//! Tile coverage and pavedness, per-class and per-country tables, evaluation
//! against OSM surface tags, and the HDI regression.

mod evaluate;
mod facts;
mod regression;
mod tables;
mod tiles;

pub use evaluate::{confusion_metrics, evaluate_against_osm, write_evaluation, ConfusionCounts, EvalDiagnostics, Metrics, EVALUATION_COLUMNS};
pub use facts::{build_segment_facts, segment_pieces, sequence_tracks, sequences_by_segment, FactInputs, Piece, SegmentFacts};
pub use regression::{hdi_regression, RegressionPoint, RegressionResult};
pub use tables::{
    breakdown_by_highway_class, country_report, share_percent, write_continents, write_countries, write_highway_classes, ClassRow,
    ContinentRow, CountryReport, CountryRow, HIGHWAY_ORDER,
};
pub use tiles::{compute_tile_stats, tile_stats, tiles_geojson, write_tiles_csv, write_tiles_geojson, Split, Tally, TileStats, TILE_COLUMNS};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("confusion counts are all zero")]
    EmptyConfusion,
    #[error("regression is degenerate: {0}")]
    Degenerate(String),
}
