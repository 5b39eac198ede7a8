//! Assigning image points to nearby road segments.
//!
//! Candidates come from the segments whose bounding box, grown by a buffer
//! (30 m by default), contains the point. Exact distances then decide the
//! band: a point is assigned to every segment within 10 m if there is one,
//! else to every segment within 20 m, else within 30 m. Points with nothing
//! inside 30 m stay unmatched.

mod io;
mod matcher;
mod segment;

pub use io::{read_matches, write_matches, MATCH_COLUMNS};
pub use matcher::{assign_tier, match_all, percent_diff, Assignment, MatchParams, MatchResult, Matcher, Tier, TierCounts};
pub use segment::{read_segments, segments_to_geojson, RoadSegment};
