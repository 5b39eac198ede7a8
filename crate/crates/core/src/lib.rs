//! Road-surface enrichment for OpenStreetMap from street-level imagery.
//!
//! The pipeline thins GPS image sequences, matches image points onto OSM road
//! segments with a tiered distance rule, drops images that show no road,
//! aggregates per-image paved/unpaved predictions into per-segment labels and
//! summarizes coverage and pavedness on a zoom-8 tile grid.
//!
//! Modules follow the stages:
//!
//! * [`geo`]: haversine distance, polylines, slippy-map tiles, the segment index.
//! * [`ingest`]: record schemas, readers/writers, thinning, spatial joins, harvesting.
//! * [`matching`]: point-to-segment assignment and the distance confidence index.
//! * [`surface`]: OSM surface normalization, the no-road filter, label aggregation.
//! * [`stats`]: tile statistics, breakdowns, evaluation metrics, HDI regression.
//! * [`pipeline`]: the stage runners behind the `surface-forge` binary.

pub mod config;
pub mod fsutil;
pub mod geo;
pub mod ingest;
pub mod manifest;
pub mod matching;
pub mod pipeline;
pub mod stats;
pub mod surface;

pub use geo::{haversine, BBox, GeoPoint, Polyline, TileId};
