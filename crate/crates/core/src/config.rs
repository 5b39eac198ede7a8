//! Pipeline configuration, read from TOML.
//!
//! Every tunable constant has a default here; a config file only needs the
//! `[inputs]` table. Relative paths resolve against the config file's
//! directory.
//!
//! ```
//! use surface_forge::config::PipelineConfig;
//! let cfg = PipelineConfig::from_toml_str(r#"
//!     [inputs]
//!     images = "images.csv"
//!     segments = "segments.geojson"
//!     predictions = "predictions.csv"
//!     urban_areas = "urban.geojson"
//!     countries = "countries.geojson"
//!     [matching]
//!     radii_m = [5.0, 15.0, 30.0]
//! "#, "/data".as_ref()).unwrap();
//! assert_eq!(cfg.zoom, 8);
//! assert_eq!(cfg.matching.radii_m, [5.0, 15.0, 30.0]);
//! assert_eq!(cfg.inputs.segments, std::path::Path::new("/data/segments.geojson"));
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::BBox;
use crate::ingest::harvest::{Budget, HarvestSettings, DEFAULT_IMAGE_FIELDS};
use crate::ingest::ThinGaps;
use crate::matching::MatchParams;
use crate::surface::{AggregationParams, FilterThresholds, SurfaceLabel};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config value for `{field}`: {message}")]
    Invalid { field: &'static str, message: String },
}

fn invalid(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field, message: message.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inputs {
    /// Raw image records; unused when a `[harvest]` table is present.
    #[serde(default)]
    pub images: Option<PathBuf>,
    pub segments: PathBuf,
    pub predictions: PathBuf,
    pub urban_areas: PathBuf,
    pub countries: PathBuf,
    #[serde(default)]
    pub hdi: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thinning {
    pub urban_gap_m: f64,
    pub rural_gap_m: f64,
}

impl Default for Thinning {
    fn default() -> Self {
        let g = ThinGaps::default();
        Self { urban_gap_m: g.urban_m, rural_gap_m: g.rural_m }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Matching {
    pub radii_m: [f64; 3],
    pub bbox_buffer_m: f64,
}

impl Default for Matching {
    fn default() -> Self {
        let p = MatchParams::default();
        Self { radii_m: p.radii_m, bbox_buffer_m: p.bbox_buffer_m }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Filter {
    pub road_pixel_threshold: f64,
    pub no_road_probability: f64,
}

impl Default for Filter {
    fn default() -> Self {
        let t = FilterThresholds::default();
        Self { road_pixel_threshold: t.road_pixel, no_road_probability: t.no_road_prob }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Aggregation {
    /// `linear-<N>m`: weight `1 - d/N`, floored at `1/N`.
    pub weight: String,
    /// `unpaved` or `paved`.
    pub tie: String,
    pub score_weighted: bool,
}

impl Default for Aggregation {
    fn default() -> Self {
        Self { weight: "linear-30m".into(), tie: "unpaved".into(), score_weighted: false }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Stats {
    /// Weight the HDI regression by labeled road length.
    pub regression_weighted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Harvest {
    /// `[min_lon, min_lat, max_lon, max_lat]`; covered by zoom-level tiles.
    pub region: [f64; 4],
    #[serde(default = "defaults::tiles_url")]
    pub tiles_url: String,
    #[serde(default = "defaults::images_url")]
    pub images_url: String,
    #[serde(default = "defaults::tile_requests_per_day")]
    pub tile_requests_per_day: usize,
    #[serde(default = "defaults::image_requests_per_minute")]
    pub image_requests_per_minute: usize,
    #[serde(default = "defaults::max_retries")]
    pub max_retries: u32,
}

mod defaults {
    use crate::ingest::harvest::HarvestSettings;

    pub fn tiles_url() -> String {
        HarvestSettings::default().tiles_url
    }
    pub fn images_url() -> String {
        HarvestSettings::default().images_url
    }
    pub fn tile_requests_per_day() -> usize {
        HarvestSettings::default().tile_budget.max_requests
    }
    pub fn image_requests_per_minute() -> usize {
        HarvestSettings::default().image_budget.max_requests
    }
    pub fn max_retries() -> u32 {
        HarvestSettings::default().max_retries
    }
    pub fn zoom() -> u8 {
        8
    }
    pub fn workers() -> usize {
        1
    }
    pub fn stage_dir() -> std::path::PathBuf {
        "stage".into()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default = "defaults::zoom")]
    pub zoom: u8,
    #[serde(default = "defaults::workers")]
    pub workers: usize,
    #[serde(default = "defaults::stage_dir")]
    pub stage_dir: PathBuf,
    pub inputs: Inputs,
    #[serde(default)]
    pub thinning: Thinning,
    #[serde(default)]
    pub matching: Matching,
    #[serde(default)]
    pub filter: Filter,
    #[serde(default)]
    pub aggregation: Aggregation,
    #[serde(default)]
    pub stats: Stats,
    #[serde(default)]
    pub harvest: Option<Harvest>,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read { path: path.display().to_string(), source: e })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base)
    }

    /// Parses, resolves relative paths against `base` and validates.
    pub fn from_toml_str(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut cfg: PipelineConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let i = &mut cfg.inputs;
        for p in [&mut i.segments, &mut i.predictions, &mut i.urban_areas, &mut i.countries] {
            resolve(p);
        }
        for p in [i.images.as_mut(), i.hdi.as_mut()].into_iter().flatten() {
            resolve(p);
        }
        resolve(&mut cfg.stage_dir);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.zoom > 22 {
            return Err(invalid("zoom", format!("{} is above 22", self.zoom)));
        }
        if self.workers == 0 {
            return Err(invalid("workers", "must be at least 1"));
        }
        let r = self.matching.radii_m;
        if !(r[0] > 0.0 && r[0] < r[1] && r[1] < r[2] && r[2].is_finite()) {
            return Err(invalid("matching.radii_m", format!("{r:?} must be positive and strictly increasing")));
        }
        if !(self.matching.bbox_buffer_m >= 0.0 && self.matching.bbox_buffer_m.is_finite()) {
            return Err(invalid("matching.bbox_buffer_m", "must be a non-negative number"));
        }
        for (field, v) in [("thinning.urban_gap_m", self.thinning.urban_gap_m), ("thinning.rural_gap_m", self.thinning.rural_gap_m)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(field, format!("{v} must be positive")));
            }
        }
        for (field, v) in [
            ("filter.road_pixel_threshold", self.filter.road_pixel_threshold),
            ("filter.no_road_probability", self.filter.no_road_probability),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(field, format!("{v} is outside [0, 1]")));
            }
        }
        self.aggregation_params()?;
        if self.harvest.is_none() && self.inputs.images.is_none() {
            return Err(invalid("inputs.images", "required unless a [harvest] table is given"));
        }
        if let Some(h) = &self.harvest {
            let [a, b, c, d] = h.region;
            BBox::new(a, b, c, d).map_err(|e| invalid("harvest.region", e.to_string()))?;
            for tpl in ["{z}", "{x}", "{y}"] {
                if !h.tiles_url.contains(tpl) {
                    return Err(invalid("harvest.tiles_url", format!("missing {tpl} placeholder")));
                }
            }
            if h.tile_requests_per_day == 0 || h.image_requests_per_minute == 0 {
                return Err(invalid("harvest", "request budgets must be positive"));
            }
        }
        Ok(())
    }

    pub fn thin_gaps(&self) -> ThinGaps {
        ThinGaps { urban_m: self.thinning.urban_gap_m, rural_m: self.thinning.rural_gap_m }
    }

    pub fn match_params(&self) -> MatchParams {
        MatchParams { radii_m: self.matching.radii_m, bbox_buffer_m: self.matching.bbox_buffer_m }
    }

    pub fn filter_thresholds(&self) -> FilterThresholds {
        FilterThresholds { road_pixel: self.filter.road_pixel_threshold, no_road_prob: self.filter.no_road_probability }
    }

    pub fn aggregation_params(&self) -> Result<AggregationParams, ConfigError> {
        let a = &self.aggregation;
        let max = a
            .weight
            .strip_prefix("linear-")
            .and_then(|s| s.strip_suffix('m'))
            .and_then(|s| s.parse::<f64>().ok())
            .filter(|m| *m > 0.0 && m.is_finite())
            .ok_or_else(|| invalid("aggregation.weight", format!("{:?} is not of the form linear-<N>m", a.weight)))?;
        let tie = match a.tie.as_str() {
            "unpaved" => SurfaceLabel::Unpaved,
            "paved" => SurfaceLabel::Paved,
            other => return Err(invalid("aggregation.tie", format!("{other:?} is neither paved nor unpaved"))),
        };
        Ok(AggregationParams { max_distance_m: max, min_weight: 1.0 / max, tie, score_weighted: a.score_weighted })
    }

    pub fn harvest_settings(&self) -> Option<HarvestSettings> {
        self.harvest.as_ref().map(|h| HarvestSettings {
            tiles_url: h.tiles_url.clone(),
            images_url: h.images_url.clone(),
            image_fields: DEFAULT_IMAGE_FIELDS.iter().map(|s| s.to_string()).collect(),
            tile_budget: Budget::per_day(h.tile_requests_per_day),
            image_budget: Budget::per_minute(h.image_requests_per_minute),
            max_retries: h.max_retries,
            ..HarvestSettings::default()
        })
    }

    /// Digest of the parameters that shape outputs. Paths, worker count and
    /// stage directory are left out; inputs are covered by file digests.
    pub fn params_sha256(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        let obj = v.as_object_mut().expect("object");
        for k in ["inputs", "workers", "stage_dir"] {
            obj.remove(k);
        }
        crate::fsutil::sha256_bytes(v.to_string().as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[inputs]
images = "images.csv"
segments = "segments.geojson"
predictions = "predictions.csv"
urban_areas = "urban.geojson"
countries = "countries.geojson"
"#;

    #[test]
    fn defaults_match_constants() {
        let c = PipelineConfig::from_toml_str(BASE, Path::new("/x")).unwrap();
        assert_eq!(c.match_params(), MatchParams::default());
        assert_eq!(c.thin_gaps(), ThinGaps::default());
        assert_eq!(c.filter_thresholds(), FilterThresholds::default());
        assert_eq!(c.aggregation_params().unwrap(), AggregationParams::default());
        assert_eq!(c.stage_dir, Path::new("/x/stage"));
    }

    #[test]
    fn errors_name_the_field() {
        let bad = |extra: &str| PipelineConfig::from_toml_str(&format!("{BASE}\n{extra}"), Path::new(".")).unwrap_err().to_string();
        assert!(bad("[matching]\nradii_m = [30.0, 20.0, 10.0]").contains("matching.radii_m"));
        assert!(bad("[filter]\nno_road_probability = 1.5").contains("filter.no_road_probability"));
        assert!(bad("[aggregation]\nweight = \"gaussian\"").contains("aggregation.weight"));
        assert!(bad("[aggregation]\ntie = \"coin\"").contains("aggregation.tie"));
        assert!(bad("[matching]\nradius = 3").contains("radius"));
    }

    #[test]
    fn params_hash_ignores_paths_and_workers() {
        let a = PipelineConfig::from_toml_str(BASE, Path::new("/a")).unwrap();
        let mut b = PipelineConfig::from_toml_str(BASE, Path::new("/b")).unwrap();
        b.workers = 8;
        assert_eq!(a.params_sha256(), b.params_sha256());
        b.matching.bbox_buffer_m = 20.0;
        assert_ne!(a.params_sha256(), b.params_sha256());
    }
}
