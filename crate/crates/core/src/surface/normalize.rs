use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SurfaceLabel {
    Paved,
    Unpaved,
    Unknown,
}

impl SurfaceLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            SurfaceLabel::Paved => "paved",
            SurfaceLabel::Unpaved => "unpaved",
            SurfaceLabel::Unknown => "unknown",
        }
    }
}

impl fmt::Display for SurfaceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SurfaceLabel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "paved" => Ok(SurfaceLabel::Paved),
            "unpaved" => Ok(SurfaceLabel::Unpaved),
            "unknown" | "" => Ok(SurfaceLabel::Unknown),
            other => Err(format!("unknown surface label {other:?}")),
        }
    }
}

pub const PAVED_SURFACES: [&str; 13] = [
    "paved",
    "asphalt",
    "chipseal",
    "concrete",
    "concrete:lanes",
    "concrete:plates",
    "paving_stones",
    "sett",
    "unhewn_cobblestone",
    "cobblestone",
    "bricks",
    "metal",
    "wood",
];

pub const UNPAVED_SURFACES: [&str; 19] = [
    "unpaved",
    "compacted",
    "fine_gravel",
    "gravel",
    "shells",
    "rock",
    "pebblestone",
    "ground",
    "dirt",
    "earth",
    "grass",
    "grass_paver",
    "metal_grid",
    "mud",
    "sand",
    "woodchips",
    "snow",
    "ice",
    "salt",
];

/// Maps a raw OSM `surface` value onto paved/unpaved.
///
/// Matching is exact per token after trimming and lower-casing; anything
/// else, including an empty tag, is `Unknown`.
///
/// ```
/// use surface_forge::surface::{normalize_surface, SurfaceLabel};
/// assert_eq!(normalize_surface("Asphalt "), SurfaceLabel::Paved);
/// assert_eq!(normalize_surface("gravel"), SurfaceLabel::Unpaved);
/// assert_eq!(normalize_surface("paving stones"), SurfaceLabel::Unknown);
/// ```
pub fn normalize_surface(tag: &str) -> SurfaceLabel {
    let t = tag.trim().to_ascii_lowercase();
    if PAVED_SURFACES.contains(&t.as_str()) {
        SurfaceLabel::Paved
    } else if UNPAVED_SURFACES.contains(&t.as_str()) {
        SurfaceLabel::Unpaved
    } else {
        SurfaceLabel::Unknown
    }
}

/// Panics if a token appears in both lists. Called once at pipeline start.
pub fn assert_token_sets_disjoint() {
    for t in PAVED_SURFACES {
        assert!(!UNPAVED_SURFACES.contains(&t), "surface token {t:?} is both paved and unpaved");
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn lists() {
        assert_token_sets_disjoint();
        for t in PAVED_SURFACES {
            assert_eq!(normalize_surface(t), SurfaceLabel::Paved);
        }
        for t in UNPAVED_SURFACES {
            assert_eq!(normalize_surface(t), SurfaceLabel::Unpaved);
        }
        assert_eq!(normalize_surface(""), SurfaceLabel::Unknown);
        assert_eq!(normalize_surface("CONCRETE:PLATES"), SurfaceLabel::Paved);
        assert_eq!(normalize_surface("asphalt;gravel"), SurfaceLabel::Unknown);
    }

    proptest! {
        #[test]
        fn total_and_idempotent(tag in ".{0,20}") {
            let label = normalize_surface(&tag);
            prop_assert_eq!(normalize_surface(label.as_str()), if label == SurfaceLabel::Unknown { SurfaceLabel::Unknown } else { label });
        }
    }
}
