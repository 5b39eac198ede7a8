//! OSM surface tag normalization, the non-road image filter and per-segment
//! label aggregation.

mod aggregate;
mod filter;
mod normalize;

pub use aggregate::{
    aggregate_segment, label_all_segments, read_segment_labels, write_segment_labels, AggregationParams, Contribution,
    LabelDiagnostics, SegmentLabel, LABEL_COLUMNS,
};
pub use filter::{
    combination_filter, is_kept, read_predictions, write_predictions, FilterDecision, FilterThresholds, PredLabel,
    PredictionRecord, ZeroShotClass, NO_ROAD_CLASS, PREDICTION_COLUMNS, ROAD_CLASS,
};
pub use normalize::{assert_token_sets_disjoint, normalize_surface, SurfaceLabel, PAVED_SURFACES, UNPAVED_SURFACES};
