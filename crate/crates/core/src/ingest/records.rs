use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::IngestError;
use crate::fsutil;
use crate::geo::GeoPoint;

/// Column order of `images.csv`: the image attributes followed by the
/// enrichment columns.
pub const IMAGE_COLUMNS: [&str; 17] = [
    "id", "sequence", "url", "long", "lat", "height", "width", "altitude", "make", "model", "creator", "is_pano",
    "timestamp", "country_iso", "continent", "urban_id", "hdi",
];

const REQUIRED_COLUMNS: usize = 13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Continent {
    Africa,
    Asia,
    Europe,
    NorthAmerica,
    Oceania,
    SouthAmerica,
}

impl Continent {
    pub const ALL: [Continent; 6] = [
        Continent::Africa,
        Continent::Asia,
        Continent::Europe,
        Continent::NorthAmerica,
        Continent::Oceania,
        Continent::SouthAmerica,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Continent::Africa => "Africa",
            Continent::Asia => "Asia",
            Continent::Europe => "Europe",
            Continent::NorthAmerica => "North America",
            Continent::Oceania => "Oceania",
            Continent::SouthAmerica => "South America",
        }
    }
}

impl fmt::Display for Continent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Continent {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s.trim().to_ascii_lowercase().chars().filter(|c| c.is_ascii_alphabetic()).collect();
        Ok(match key.as_str() {
            "africa" => Continent::Africa,
            "asia" => Continent::Asia,
            "europe" => Continent::Europe,
            "northamerica" => Continent::NorthAmerica,
            "oceania" => Continent::Oceania,
            "southamerica" => Continent::SouthAmerica,
            _ => return Err(format!("unknown continent {s:?}")),
        })
    }
}

impl Serialize for Continent {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Continent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Metadata of one street-level image plus the enrichment joined onto it.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageRecord {
    pub id: String,
    pub sequence: String,
    pub url: String,
    pub point: GeoPoint,
    pub height: u32,
    pub width: u32,
    pub altitude: Option<f64>,
    pub make: Option<String>,
    pub model: Option<String>,
    pub creator: Option<String>,
    pub is_pano: bool,
    /// Capture time, UTC milliseconds.
    pub timestamp: i64,
    pub country_iso: Option<String>,
    pub continent: Option<Continent>,
    pub urban_id: Option<String>,
    pub hdi: Option<f64>,
}

/// Serialized form, one field per column.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ImageRow {
    id: String,
    sequence: String,
    url: String,
    long: f64,
    lat: f64,
    height: u32,
    width: u32,
    #[serde(default)]
    altitude: Option<f64>,
    #[serde(default)]
    make: Option<String>,
    #[serde(default)]
    model: Option<String>,
    #[serde(default)]
    creator: Option<String>,
    #[serde(deserialize_with = "de_flag")]
    is_pano: bool,
    timestamp: i64,
    #[serde(default)]
    country_iso: Option<String>,
    #[serde(default)]
    continent: Option<Continent>,
    #[serde(default)]
    urban_id: Option<String>,
    #[serde(default)]
    hdi: Option<f64>,
}

fn de_flag<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Flag {
        Bool(bool),
        Int(i64),
        Str(String),
    }
    match Flag::deserialize(d)? {
        Flag::Bool(b) => Ok(b),
        Flag::Int(i) => parse_flag(&i.to_string()).map_err(serde::de::Error::custom),
        Flag::Str(s) => parse_flag(&s).map_err(serde::de::Error::custom),
    }
}

fn parse_flag(s: &str) -> Result<bool, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        other => Err(format!("is_pano must be true/false or 1/0, got {other:?}")),
    }
}

impl ImageRecord {
    fn from_row(row: ImageRow) -> Result<Self, String> {
        if row.id.trim().is_empty() {
            return Err("empty id".into());
        }
        let point = GeoPoint::new(row.long, row.lat).map_err(|e| e.to_string())?;
        if row.timestamp < 0 {
            return Err(format!("negative timestamp {}", row.timestamp));
        }
        if let Some(h) = row.hdi {
            if !(0.0..=1.0).contains(&h) {
                return Err(format!("hdi {h} outside [0, 1]"));
            }
        }
        if let Some(a) = row.altitude {
            if !a.is_finite() {
                return Err("altitude is not finite".into());
            }
        }
        Ok(Self {
            id: row.id,
            sequence: row.sequence,
            url: row.url,
            point,
            height: row.height,
            width: row.width,
            altitude: row.altitude,
            make: row.make,
            model: row.model,
            creator: row.creator,
            is_pano: row.is_pano,
            timestamp: row.timestamp,
            country_iso: row.country_iso,
            continent: row.continent,
            urban_id: row.urban_id,
            hdi: row.hdi,
        })
    }

    fn to_row(&self) -> ImageRow {
        ImageRow {
            id: self.id.clone(),
            sequence: self.sequence.clone(),
            url: self.url.clone(),
            long: self.point.lon,
            lat: self.point.lat,
            height: self.height,
            width: self.width,
            altitude: self.altitude,
            make: self.make.clone(),
            model: self.model.clone(),
            creator: self.creator.clone(),
            is_pano: self.is_pano,
            timestamp: self.timestamp,
            country_iso: self.country_iso.clone(),
            continent: self.continent,
            urban_id: self.urban_id.clone(),
            hdi: self.hdi,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordFormat {
    Csv,
    Ndjson,
}

impl RecordFormat {
    /// Picks the format from the file extension (`.csv`, `.ndjson`, `.jsonl`).
    pub fn from_path(path: &Path) -> Result<Self, IngestError> {
        match path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()).as_deref() {
            Some("csv") => Ok(Self::Csv),
            Some("ndjson") | Some("jsonl") => Ok(Self::Ndjson),
            _ => Err(IngestError::UnknownFormat(path.display().to_string())),
        }
    }
}

/// A row that failed validation, with its 1-based line number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reject {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct ReadReport {
    pub records: Vec<ImageRecord>,
    pub rejects: Vec<Reject>,
    pub rows: usize,
}

/// Reads image records, keeping malformed rows as [`Reject`]s.
///
/// Columns outside the schema, or a missing required column, fail the whole
/// read. Duplicate ids are rejected after their first occurrence.
pub fn read_image_records(path: &Path, format: RecordFormat) -> Result<ReadReport, IngestError> {
    let file = File::open(path).map_err(|e| IngestError::io(path, e))?;
    let Partial { mut inner, records, rows_lines } = match format {
        RecordFormat::Csv => read_csv(file, path)?,
        RecordFormat::Ndjson => read_ndjson(file, path)?,
    };
    let mut seen = HashSet::new();
    for (rec, line) in records.into_iter().zip(rows_lines) {
        if seen.insert(rec.id.clone()) {
            inner.records.push(rec);
        } else {
            inner.rejects.push(Reject { line, reason: format!("duplicate id {:?}", rec.id) });
        }
    }
    inner.rejects.sort_by_key(|r| r.line);
    Ok(inner)
}

struct Partial {
    inner: ReadReport,
    records: Vec<ImageRecord>,
    rows_lines: Vec<usize>,
}

impl Partial {
    fn new() -> Self {
        Self { inner: ReadReport::default(), records: Vec::new(), rows_lines: Vec::new() }
    }

    fn push(&mut self, line: usize, parsed: Result<ImageRecord, String>) {
        self.inner.rows += 1;
        match parsed {
            Ok(r) => {
                self.records.push(r);
                self.rows_lines.push(line);
            }
            Err(reason) => self.inner.rejects.push(Reject { line, reason }),
        }
    }
}

fn check_columns<'a>(names: impl Iterator<Item = &'a str>, path: &Path) -> Result<(), IngestError> {
    let mut present = HashSet::new();
    for name in names {
        if !IMAGE_COLUMNS.contains(&name) {
            return Err(IngestError::UnknownColumn { path: path.display().to_string(), column: name.to_string() });
        }
        present.insert(name.to_string());
    }
    if let Some(missing) = IMAGE_COLUMNS[..REQUIRED_COLUMNS].iter().find(|c| !present.contains(**c)) {
        return Err(IngestError::MissingColumn { path: path.display().to_string(), column: missing.to_string() });
    }
    Ok(())
}

fn read_csv(file: File, path: &Path) -> Result<Partial, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(BufReader::new(file));
    let headers = rdr.headers().map_err(|e| IngestError::csv(path, e))?.clone();
    check_columns(headers.iter(), path)?;
    let mut out = Partial::new();
    let mut raw = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut raw) {
            Ok(false) => break,
            Ok(true) => {
                let line = raw.position().map(|p| p.line() as usize).unwrap_or(0);
                let parsed = raw
                    .deserialize::<ImageRow>(Some(&headers))
                    .map_err(|e| csv_reason(&e))
                    .and_then(ImageRecord::from_row);
                out.push(line, parsed);
            }
            Err(e) => {
                let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
                if matches!(e.kind(), csv::ErrorKind::Io(_)) {
                    return Err(IngestError::csv(path, e));
                }
                out.push(line, Err(csv_reason(&e)));
            }
        }
    }
    Ok(out)
}

fn csv_reason(e: &csv::Error) -> String {
    match e.kind() {
        csv::ErrorKind::Deserialize { err, .. } => match err.field() {
            Some(i) => format!("column {}: {}", IMAGE_COLUMNS.get(i as usize).unwrap_or(&"?"), err.kind()),
            None => err.kind().to_string(),
        },
        _ => e.to_string(),
    }
}

fn read_ndjson(file: File, path: &Path) -> Result<Partial, IngestError> {
    let mut out = Partial::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| IngestError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = match serde_json::from_str::<serde_json::Map<String, serde_json::Value>>(&line) {
            Ok(obj) => {
                if let Some(k) = obj.keys().find(|k| !IMAGE_COLUMNS.contains(&k.as_str())) {
                    return Err(IngestError::UnknownColumn { path: path.display().to_string(), column: k.clone() });
                }
                serde_json::from_value::<ImageRow>(serde_json::Value::Object(obj))
                    .map_err(|e| e.to_string())
                    .and_then(ImageRecord::from_row)
            }
            Err(e) => Err(format!("invalid json: {e}")),
        };
        out.push(i + 1, parsed);
    }
    Ok(out)
}

pub fn write_image_records(path: &Path, format: RecordFormat, records: &[ImageRecord]) -> Result<(), IngestError> {
    fsutil::write_atomic(path, |w| match format {
        RecordFormat::Csv => {
            let mut wtr = csv::Writer::from_writer(w);
            wtr.write_record(IMAGE_COLUMNS)?;
            for r in records {
                wtr.write_record(csv_fields(r))?;
            }
            wtr.flush()
        }
        RecordFormat::Ndjson => {
            for r in records {
                serde_json::to_writer(&mut *w, &r.to_row())?;
                w.write_all(b"\n")?;
            }
            Ok(())
        }
    })
    .map_err(|e| IngestError::io(path, e))
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(T::to_string).unwrap_or_default()
}

fn csv_fields(r: &ImageRecord) -> [String; 17] {
    [
        r.id.clone(),
        r.sequence.clone(),
        r.url.clone(),
        r.point.lon.to_string(),
        r.point.lat.to_string(),
        r.height.to_string(),
        r.width.to_string(),
        opt(&r.altitude),
        opt(&r.make),
        opt(&r.model),
        opt(&r.creator),
        r.is_pano.to_string(),
        r.timestamp.to_string(),
        opt(&r.country_iso),
        opt(&r.continent),
        opt(&r.urban_id),
        opt(&r.hdi),
    ]
}

/// Writes rejected rows as `line,reason`.
pub fn write_rejects(path: &Path, rejects: &[Reject]) -> Result<(), IngestError> {
    fsutil::write_atomic(path, |w| {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["line", "reason"])?;
        for r in rejects {
            wtr.write_record([r.line.to_string(), r.reason.clone()])?;
        }
        wtr.flush()
    })
    .map_err(|e| IngestError::io(path, e))
}
