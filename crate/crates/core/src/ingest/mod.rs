//! Input records, readers and writers, sequence thinning, spatial joins and
//! the API harvesters.

mod areas;
pub mod harvest;
mod join;
mod records;
mod thin;

pub use areas::{
    parse_polygon, read_countries, read_hdi, read_urban_areas, Area, AreaLookup, Countries, CountryRecord, Rings,
    UrbanArea, UrbanAreas, UrbanSource,
};
pub use join::{classify_urban, join_country_hdi, join_urban, JoinReport};
pub use records::{
    read_image_records, write_image_records, write_rejects, Continent, ImageRecord, ReadReport, RecordFormat, Reject,
    IMAGE_COLUMNS,
};
pub use thin::{greedy_thin, group_by_sequence, GAP_TOLERANCE_M, is_mainly_urban, thin_all, thin_sequence, ThinGaps};

use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Csv { path: String, message: String },
    #[error("{path}: unknown column {column:?}")]
    UnknownColumn { path: String, column: String },
    #[error("{path}: missing required column {column:?}")]
    MissingColumn { path: String, column: String },
    #[error("{0}: cannot tell the record format from the extension (expected .csv or .ndjson)")]
    UnknownFormat(String),
    #[error("{path}: {message}")]
    GeoJson { path: String, message: String },
    #[error("{0}")]
    Invalid(String),
}

impl IngestError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.display().to_string(), source }
    }

    pub(crate) fn csv(path: &Path, e: csv::Error) -> Self {
        Self::Csv { path: path.display().to_string(), message: e.to_string() }
    }

    pub(crate) fn geojson(path: &Path, message: impl Into<String>) -> Self {
        Self::GeoJson { path: path.display().to_string(), message: message.into() }
    }
}
