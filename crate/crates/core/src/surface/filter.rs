use std::fmt;
use std::path::Path;

use crate::fsutil;
use crate::ingest::IngestError;

/// Classifier output for one image: 0 paved, 1 unpaved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PredLabel {
    Paved = 0,
    Unpaved = 1,
}

impl PredLabel {
    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(PredLabel::Paved),
            1 => Some(PredLabel::Unpaved),
            _ => None,
        }
    }

    pub fn class_name(self) -> &'static str {
        match self {
            PredLabel::Paved => "paved",
            PredLabel::Unpaved => "unpaved",
        }
    }
}

pub const ROAD_CLASS: &str = "a photo of a road";
pub const NO_ROAD_CLASS: &str = "a photo with no road in it";

/// Zero-shot "is there a road" class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZeroShotClass {
    Road,
    NoRoad,
}

impl ZeroShotClass {
    pub fn prompt(self) -> &'static str {
        match self {
            ZeroShotClass::Road => ROAD_CLASS,
            ZeroShotClass::NoRoad => NO_ROAD_CLASS,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            ROAD_CLASS => Some(ZeroShotClass::Road),
            NO_ROAD_CLASS => Some(ZeroShotClass::NoRoad),
            _ => None,
        }
    }
}

impl fmt::Display for ZeroShotClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.prompt())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord {
    pub image_id: String,
    pub pred_label: PredLabel,
    pub pred_class: String,
    pub pred_score: f64,
    pub zs_pred_class: ZeroShotClass,
    pub zs_pred_score: f64,
    /// Share of pixels segmented as road, in [0, 1].
    pub road_pixel_percentage: f64,
    /// Stored filter outcome, `true` when the image shows a road and is kept.
    pub no_road_image_filter: Option<bool>,
}

impl PredictionRecord {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [("pred_score", self.pred_score), ("zs_pred_score", self.zs_pred_score), ("road_pixel_percentage", self.road_pixel_percentage)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("{name} {v} outside [0, 1]"));
            }
        }
        if !self.pred_class.trim().eq_ignore_ascii_case(self.pred_label.class_name()) {
            return Err(format!("pred_class {:?} disagrees with pred_label {}", self.pred_class, self.pred_label as u8));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterThresholds {
    /// Road-pixel share below which a "no road" call removes the image.
    pub road_pixel: f64,
    /// "No road" probability above which the image is removed regardless.
    pub no_road_prob: f64,
}

impl Default for FilterThresholds {
    fn default() -> Self {
        Self { road_pixel: 0.10, no_road_prob: 0.90 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterDecision {
    Keep,
    Remove,
}

/// Drops images that likely show no road: the zero-shot classifier says
/// "no road" and either few pixels are road, or it is very confident.
///
/// ```
/// use surface_forge::surface::*;
/// let mut r = PredictionRecord {
///     image_id: "x".into(), pred_label: PredLabel::Paved, pred_class: "paved".into(),
///     pred_score: 0.9, zs_pred_class: ZeroShotClass::NoRoad, zs_pred_score: 0.55,
///     road_pixel_percentage: 0.05, no_road_image_filter: None,
/// };
/// let t = FilterThresholds::default();
/// assert_eq!(combination_filter(&r, t), FilterDecision::Remove);
/// r.road_pixel_percentage = 0.40;
/// assert_eq!(combination_filter(&r, t), FilterDecision::Keep);
/// r.zs_pred_score = 0.95;
/// assert_eq!(combination_filter(&r, t), FilterDecision::Remove);
/// ```
pub fn combination_filter(r: &PredictionRecord, t: FilterThresholds) -> FilterDecision {
    let no_road = r.zs_pred_class == ZeroShotClass::NoRoad;
    if no_road && (r.road_pixel_percentage < t.road_pixel || r.zs_pred_score > t.no_road_prob) {
        FilterDecision::Remove
    } else {
        FilterDecision::Keep
    }
}

/// Stored outcome if present, otherwise the rule.
pub fn is_kept(r: &PredictionRecord, t: FilterThresholds) -> bool {
    r.no_road_image_filter.unwrap_or_else(|| combination_filter(r, t) == FilterDecision::Keep)
}

pub const PREDICTION_COLUMNS: [&str; 8] = [
    "image_id",
    "pred_label",
    "pred_class",
    "pred_score",
    "zs_pred_class",
    "zs_pred_score",
    "road_pixel_percentage",
    "no_road_image_filter",
];

/// Reads `predictions.csv`. The `no_road_image_filter` column is optional.
pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRecord>, IngestError> {
    let bad = |line: u64, m: String| IngestError::Csv { path: path.display().to_string(), message: format!("line {line}: {m}") };
    let mut rdr = csv::Reader::from_path(path).map_err(|e| IngestError::csv(path, e))?;
    let headers = rdr.headers().map_err(|e| IngestError::csv(path, e))?.clone();
    let names: Vec<&str> = headers.iter().collect();
    if let Some(c) = names.iter().find(|c| !PREDICTION_COLUMNS.contains(c)) {
        return Err(IngestError::UnknownColumn { path: path.display().to_string(), column: c.to_string() });
    }
    let col = |name: &str| names.iter().position(|c| *c == name);
    let mut idx = [0usize; 7];
    for (i, name) in PREDICTION_COLUMNS[..7].iter().enumerate() {
        idx[i] = col(name).ok_or_else(|| IngestError::MissingColumn { path: path.display().to_string(), column: name.to_string() })?;
    }
    let filter_col = col("no_road_image_filter");
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| IngestError::csv(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let num = |i: usize| rec[idx[i]].trim().parse::<f64>().map_err(|_| bad(line, format!("{} is not a number", PREDICTION_COLUMNS[i])));
        let label = rec[idx[1]]
            .trim()
            .parse::<u8>()
            .ok()
            .and_then(PredLabel::from_code)
            .ok_or_else(|| bad(line, format!("pred_label must be 0 or 1, got {:?}", &rec[idx[1]])))?;
        let zs = ZeroShotClass::parse(&rec[idx[4]]).ok_or_else(|| bad(line, format!("unknown zs_pred_class {:?}", &rec[idx[4]])))?;
        let filter = match filter_col.map(|i| rec[i].trim()) {
            None | Some("") => None,
            Some("1") => Some(true),
            Some("0") => Some(false),
            Some(other) => return Err(bad(line, format!("no_road_image_filter must be 0 or 1, got {other:?}"))),
        };
        let r = PredictionRecord {
            image_id: rec[idx[0]].to_string(),
            pred_label: label,
            pred_class: rec[idx[2]].to_string(),
            pred_score: num(3)?,
            zs_pred_class: zs,
            zs_pred_score: num(5)?,
            road_pixel_percentage: num(6)?,
            no_road_image_filter: filter,
        };
        r.validate().map_err(|m| bad(line, m))?;
        out.push(r);
    }
    Ok(out)
}

pub fn write_predictions(path: &Path, records: &[PredictionRecord]) -> Result<(), IngestError> {
    fsutil::write_atomic(path, |w| {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(PREDICTION_COLUMNS)?;
        for r in records {
            wtr.write_record([
                r.image_id.clone(),
                (r.pred_label as u8).to_string(),
                r.pred_class.clone(),
                r.pred_score.to_string(),
                r.zs_pred_class.prompt().to_string(),
                r.zs_pred_score.to_string(),
                r.road_pixel_percentage.to_string(),
                r.no_road_image_filter.map(|k| u8::from(k).to_string()).unwrap_or_default(),
            ])?;
        }
        wtr.flush()
    })
    .map_err(|e| IngestError::Io { path: path.display().to_string(), source: e })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn pred(id: &str, road: f64, class: ZeroShotClass, score: f64) -> PredictionRecord {
        PredictionRecord {
            image_id: id.into(),
            pred_label: PredLabel::Paved,
            pred_class: "paved".into(),
            pred_score: 0.8,
            zs_pred_class: class,
            zs_pred_score: score,
            road_pixel_percentage: road,
            no_road_image_filter: None,
        }
    }

    #[test]
    fn examples() {
        let t = FilterThresholds::default();
        assert_eq!(combination_filter(&pred("a", 0.05, ZeroShotClass::NoRoad, 0.55), t), FilterDecision::Remove);
        assert_eq!(combination_filter(&pred("b", 0.40, ZeroShotClass::NoRoad, 0.95), t), FilterDecision::Remove);
        assert_eq!(combination_filter(&pred("c", 0.05, ZeroShotClass::Road, 0.99), t), FilterDecision::Keep);
        // boundaries: exactly 10 % road and exactly 0.90 are not removed
        assert_eq!(combination_filter(&pred("d", 0.10, ZeroShotClass::NoRoad, 0.90), t), FilterDecision::Keep);
    }

    #[test]
    fn stored_outcome_wins() {
        let mut r = pred("a", 0.05, ZeroShotClass::NoRoad, 0.55);
        r.no_road_image_filter = Some(true);
        assert!(is_kept(&r, FilterThresholds::default()));
    }

    #[test]
    fn csv_round_trip_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("predictions.csv");
        let mut recs = vec![pred("a", 0.05, ZeroShotClass::NoRoad, 0.55), pred("b", 0.5, ZeroShotClass::Road, 0.97)];
        recs[1].pred_label = PredLabel::Unpaved;
        recs[1].pred_class = "unpaved".into();
        recs[0].no_road_image_filter = Some(false);
        write_predictions(&p, &recs).unwrap();
        assert_eq!(read_predictions(&p).unwrap(), recs);

        std::fs::write(&p, "image_id,pred_label,pred_class,pred_score,zs_pred_class,zs_pred_score,road_pixel_percentage\nx,0,unpaved,0.5,a photo of a road,0.9,0.3\n").unwrap();
        assert!(read_predictions(&p).unwrap_err().to_string().contains("disagrees"));
        std::fs::write(&p, "image_id,pred_label,pred_class,pred_score,zs_pred_class,zs_pred_score,road_pixel_percentage\nx,0,paved,1.5,a photo of a road,0.9,0.3\n").unwrap();
        assert!(read_predictions(&p).is_err());
    }
}
