//! Harvesting sequences and image metadata from the Mapillary API.
//!
//! Two endpoints are used: a tile endpoint returning the sequences that cross
//! a zoom-level tile, and a graph endpoint returning image metadata per
//! sequence. Each has its own rolling request budget. Every completed unit
//! (tile or sequence) is appended to a journal and recorded in the checkpoint,
//! so a rerun after interruption skips finished work and finishes with the
//! same output files an uninterrupted run would have produced.
//!
//! Tile payloads are read as GeoJSON FeatureCollections whose LineString
//! features carry the sequence id in `properties.id` (or `sequence_id`).

mod checkpoint;
mod client;
mod clock;
mod ratelimit;

pub use checkpoint::{tile_key, HarvestCheckpoint};
pub use client::{ApiClient, ApiResponse, HttpClient, TOKEN_ENV};
pub use clock::{Clock, SimulatedClock, SystemClock};
pub use ratelimit::{max_in_any_window, Budget, SlidingWindowLimiter};

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::{write_image_records, ImageRecord, RecordFormat};
use crate::fsutil;
use crate::geo::{GeoPoint, Polyline, TileId};

#[derive(Debug, Error)]
pub enum HarvestError {
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
    #[error(transparent)]
    Ingest(#[from] super::IngestError),
}

/// A sequence as seen on the tile endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceRecord {
    pub id: String,
    /// Image ids in capture order, when known.
    #[serde(default)]
    pub images: Vec<String>,
    pub geometry: Option<Polyline>,
}

#[derive(Debug, Clone)]
pub struct HarvestSettings {
    /// Tile URL with `{z}`, `{x}`, `{y}` placeholders.
    pub tiles_url: String,
    /// Graph images endpoint; `sequence_ids` and `fields` are appended.
    pub images_url: String,
    pub image_fields: Vec<String>,
    pub tile_budget: Budget,
    pub image_budget: Budget,
    /// Extra attempts after the first failure before a unit is marked failed.
    pub max_retries: u32,
    /// Rate-limit (HTTP 429) responses tolerated per unit, with exponential backoff.
    pub max_backoffs: u32,
    pub backoff_base_ms: u64,
}

pub const DEFAULT_IMAGE_FIELDS: [&str; 12] = [
    "id",
    "sequence",
    "thumb_original_url",
    "computed_geometry",
    "height",
    "width",
    "computed_altitude",
    "make",
    "model",
    "creator",
    "is_pano",
    "captured_at",
];

impl Default for HarvestSettings {
    fn default() -> Self {
        Self {
            tiles_url: "https://tiles.mapillary.com/maps/vtp/mly1_public/2/{z}/{x}/{y}".into(),
            images_url: "https://graph.mapillary.com/images".into(),
            image_fields: DEFAULT_IMAGE_FIELDS.iter().map(|s| s.to_string()).collect(),
            tile_budget: Budget::per_day(50_000),
            image_budget: Budget::per_minute(60_000),
            max_retries: 3,
            max_backoffs: 8,
            backoff_base_ms: 1_000,
        }
    }
}

/// Limits one invocation, e.g. to simulate an interruption in tests.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunLimit {
    pub max_units: Option<usize>,
}

#[derive(Debug, Clone, Default)]
pub struct HarvestSummary {
    pub units_done: usize,
    pub units_failed: usize,
    pub units_skipped: usize,
    pub interrupted: bool,
    /// Timestamps of every request issued during this run.
    pub request_times: Vec<u64>,
    pub records_written: usize,
}

enum Outcome {
    Body(String),
    Failed(u32),
}

/// Output layout of a harvest directory.
#[derive(Debug, Clone)]
pub struct HarvestPaths {
    pub dir: PathBuf,
}

impl HarvestPaths {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }
    pub fn checkpoint(&self) -> PathBuf {
        self.dir.join("checkpoint.json")
    }
    pub fn tile_journal(&self) -> PathBuf {
        self.dir.join("sequences.journal.ndjson")
    }
    pub fn image_journal(&self) -> PathBuf {
        self.dir.join("images.journal.ndjson")
    }
    pub fn sequences(&self) -> PathBuf {
        self.dir.join("sequences.ndjson")
    }
    pub fn images(&self) -> PathBuf {
        self.dir.join("images.ndjson")
    }
    pub fn missing(&self) -> PathBuf {
        self.dir.join("missing.csv")
    }
}

pub struct Harvester<'a> {
    client: &'a dyn ApiClient,
    clock: &'a dyn Clock,
    settings: HarvestSettings,
    paths: HarvestPaths,
}

#[derive(Serialize, Deserialize)]
struct TileEntry {
    tile: String,
    sequences: Vec<SequenceRecord>,
}

#[derive(Serialize, Deserialize)]
struct ImageEntry {
    sequence: String,
    images: Vec<Value>,
}

impl<'a> Harvester<'a> {
    pub fn new(client: &'a dyn ApiClient, clock: &'a dyn Clock, settings: HarvestSettings, paths: HarvestPaths) -> Self {
        Self { client, clock, settings, paths }
    }

    pub fn paths(&self) -> &HarvestPaths {
        &self.paths
    }

    fn io<E: Into<std::io::Error>>(&self, p: &Path, e: E) -> HarvestError {
        HarvestError::Io(p.display().to_string(), e.into())
    }

    /// GET with retries and backoff. Every attempt goes through `limiter`.
    fn fetch(&self, url: &str, limiter: &mut SlidingWindowLimiter, log: &mut Vec<u64>) -> Result<Outcome, HarvestError> {
        let mut failures = 0u32;
        let mut backoffs = 0u32;
        loop {
            log.push(limiter.acquire(self.clock));
            match self.client.get(url) {
                Ok(r) if r.status == 200 => return Ok(Outcome::Body(r.body)),
                Ok(r) if r.status == 401 => {
                    return Err(HarvestError::Auth(format!(
                        "HTTP 401 from {}; check that {TOKEN_ENV} holds a valid access token",
                        strip_query(url)
                    )))
                }
                Ok(r) if r.status == 429 && backoffs < self.settings.max_backoffs => {
                    self.clock.sleep_ms(self.settings.backoff_base_ms << backoffs.min(20));
                    backoffs += 1;
                    continue;
                }
                Ok(r) => log::warn!("HTTP {} for {}", r.status, strip_query(url)),
                Err(e) => log::warn!("request to {} failed: {e}", strip_query(url)),
            }
            failures += 1;
            if failures > self.settings.max_retries {
                return Ok(Outcome::Failed(failures));
            }
        }
    }

    fn append_journal<T: Serialize>(&self, path: &Path, entry: &T) -> Result<(), HarvestError> {
        fs::create_dir_all(&self.paths.dir).map_err(|e| self.io(&self.paths.dir, e))?;
        let mut f = OpenOptions::new().create(true).append(true).open(path).map_err(|e| self.io(path, e))?;
        let mut line = serde_json::to_vec(entry).expect("journal entry serializes");
        line.push(b'\n');
        f.write_all(&line).map_err(|e| self.io(path, e))?;
        f.sync_all().map_err(|e| self.io(path, e))
    }

    /// Fetches the sequences crossing each tile and writes `sequences.ndjson`.
    pub fn harvest_sequences(&self, tiles: &[TileId], limit: RunLimit) -> Result<HarvestSummary, HarvestError> {
        let cp_path = self.paths.checkpoint();
        let mut cp = HarvestCheckpoint::load_or_default(&cp_path)?;
        let mut limiter = SlidingWindowLimiter::with_history(self.settings.tile_budget, &cp.tile_requests);
        let mut summary = HarvestSummary::default();
        let todo: BTreeSet<TileId> = tiles.iter().copied().collect();
        for tile in todo {
            let key = tile_key(tile);
            if cp.completed_tile_ids.contains(&key) || cp.failed_tile_ids.contains_key(&key) {
                summary.units_skipped += 1;
                continue;
            }
            if limit.max_units.is_some_and(|m| summary.units_done + summary.units_failed >= m) {
                summary.interrupted = true;
                break;
            }
            let url = self
                .settings
                .tiles_url
                .replace("{z}", &tile.z.to_string())
                .replace("{x}", &tile.x.to_string())
                .replace("{y}", &tile.y.to_string());
            let parsed = match self.fetch(&url, &mut limiter, &mut summary.request_times)? {
                Outcome::Body(body) => parse_tile(&body).map_err(|e| {
                    log::warn!("tile {key}: {e}");
                    self.settings.max_retries + 1
                }),
                Outcome::Failed(n) => Err(n),
            };
            match parsed {
                Ok(sequences) => {
                    self.append_journal(&self.paths.tile_journal(), &TileEntry { tile: key.clone(), sequences })?;
                    cp.completed_tile_ids.insert(key);
                    summary.units_done += 1;
                }
                Err(attempts) => {
                    cp.failed_tile_ids.insert(key, attempts);
                    summary.units_failed += 1;
                }
            }
            cp.tile_requests = limiter.history();
            cp.save(&cp_path)?;
        }
        cp.tile_requests = limiter.history();
        cp.save(&cp_path)?;
        summary.records_written = self.finalize_sequences(&cp)?;
        Ok(summary)
    }

    fn finalize_sequences(&self, cp: &HarvestCheckpoint) -> Result<usize, HarvestError> {
        let mut per_tile: BTreeMap<String, Vec<SequenceRecord>> = BTreeMap::new();
        let journal = self.paths.tile_journal();
        if journal.exists() {
            let f = fs::File::open(&journal).map_err(|e| self.io(&journal, e))?;
            for line in BufReader::new(f).lines() {
                let line = line.map_err(|e| self.io(&journal, e))?;
                // a torn last line from a crash is ignored; its tile is not in the checkpoint
                if let Ok(entry) = serde_json::from_str::<TileEntry>(&line) {
                    if cp.completed_tile_ids.contains(&entry.tile) {
                        per_tile.insert(entry.tile, entry.sequences);
                    }
                }
            }
        }
        let mut merged: BTreeMap<String, SequenceRecord> = BTreeMap::new();
        for seqs in per_tile.into_values() {
            for s in seqs {
                match merged.get(&s.id) {
                    Some(prev) if geometry_len(prev) >= geometry_len(&s) => {}
                    _ => {
                        merged.insert(s.id.clone(), s);
                    }
                }
            }
        }
        let path = self.paths.sequences();
        fsutil::write_atomic(&path, |w| {
            for s in merged.values() {
                serde_json::to_writer(&mut *w, s)?;
                w.write_all(b"\n")?;
            }
            Ok(())
        })
        .map_err(|e| self.io(&path, e))?;
        self.write_missing(cp)?;
        Ok(merged.len())
    }

    fn write_missing(&self, cp: &HarvestCheckpoint) -> Result<(), HarvestError> {
        let path = self.paths.missing();
        fsutil::write_atomic(&path, |w| {
            writeln!(w, "kind,id,attempts")?;
            for (t, n) in &cp.failed_tile_ids {
                writeln!(w, "tile,{t},{n}")?;
            }
            for (s, n) in &cp.failed_sequence_ids {
                writeln!(w, "sequence,{s},{n}")?;
            }
            Ok(())
        })
        .map_err(|e| self.io(&path, e))
    }

    /// Fetches image metadata for each distinct sequence id and writes
    /// `images.ndjson`, sorted by sequence, capture time and id.
    pub fn harvest_image_metadata(&self, sequence_ids: &[String], limit: RunLimit) -> Result<HarvestSummary, HarvestError> {
        let cp_path = self.paths.checkpoint();
        let mut cp = HarvestCheckpoint::load_or_default(&cp_path)?;
        let mut limiter = SlidingWindowLimiter::with_history(self.settings.image_budget, &cp.image_requests);
        let mut summary = HarvestSummary::default();
        let todo: BTreeSet<&String> = sequence_ids.iter().collect();
        let fields = self.settings.image_fields.join(",");
        for id in todo {
            if cp.completed_sequence_ids.contains(id) || cp.failed_sequence_ids.contains_key(id) {
                summary.units_skipped += 1;
                continue;
            }
            if limit.max_units.is_some_and(|m| summary.units_done + summary.units_failed >= m) {
                summary.interrupted = true;
                break;
            }
            let sep = if self.settings.images_url.contains('?') { '&' } else { '?' };
            let url = format!("{}{sep}sequence_ids={}&fields={}", self.settings.images_url, encode(id), encode(&fields));
            let parsed = match self.fetch(&url, &mut limiter, &mut summary.request_times)? {
                Outcome::Body(body) => match parse_images_body(&body) {
                    Ok(v) => Ok(v),
                    Err(e) => {
                        log::warn!("sequence {id}: {e}");
                        Err(self.settings.max_retries + 1)
                    }
                },
                Outcome::Failed(n) => Err(n),
            };
            match parsed {
                Ok(images) => {
                    self.append_journal(&self.paths.image_journal(), &ImageEntry { sequence: id.clone(), images })?;
                    cp.completed_sequence_ids.insert(id.clone());
                    summary.units_done += 1;
                }
                Err(attempts) => {
                    cp.failed_sequence_ids.insert(id.clone(), attempts);
                    summary.units_failed += 1;
                }
            }
            cp.image_requests = limiter.history();
            cp.save(&cp_path)?;
        }
        cp.image_requests = limiter.history();
        cp.save(&cp_path)?;
        summary.records_written = self.finalize_images(&cp)?;
        Ok(summary)
    }

    fn finalize_images(&self, cp: &HarvestCheckpoint) -> Result<usize, HarvestError> {
        let mut per_seq: BTreeMap<String, Vec<Value>> = BTreeMap::new();
        let journal = self.paths.image_journal();
        if journal.exists() {
            let f = fs::File::open(&journal).map_err(|e| self.io(&journal, e))?;
            for line in BufReader::new(f).lines() {
                let line = line.map_err(|e| self.io(&journal, e))?;
                if let Ok(entry) = serde_json::from_str::<ImageEntry>(&line) {
                    if cp.completed_sequence_ids.contains(&entry.sequence) {
                        per_seq.insert(entry.sequence, entry.images);
                    }
                }
            }
        }
        let mut by_id: BTreeMap<String, ImageRecord> = BTreeMap::new();
        for (seq, images) in per_seq {
            for v in images {
                match image_from_graph(&v, &seq) {
                    Ok(r) => {
                        by_id.entry(r.id.clone()).or_insert(r);
                    }
                    Err(e) => log::warn!("sequence {seq}: skipping image: {e}"),
                }
            }
        }
        let mut records: Vec<ImageRecord> = by_id.into_values().collect();
        records.sort_by(|a, b| (&a.sequence, a.timestamp, &a.id).cmp(&(&b.sequence, b.timestamp, &b.id)));
        write_image_records(&self.paths.images(), RecordFormat::Ndjson, &records)?;
        self.write_missing(cp)?;
        Ok(records.len())
    }
}

fn geometry_len(s: &SequenceRecord) -> f64 {
    s.geometry.as_ref().map_or(0.0, Polyline::length_m)
}

fn strip_query(url: &str) -> &str {
    url.split('?').next().unwrap_or(url)
}

fn encode(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for b in s.bytes() {
        match b {
            b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'_' | b'.' | b'~' | b',' => out.push(b as char),
            _ => out.push_str(&format!("%{b:02X}")),
        }
    }
    out
}

fn coords(v: &Value) -> Option<Vec<GeoPoint>> {
    v.as_array()?
        .iter()
        .map(|c| {
            let a = c.as_array()?;
            GeoPoint::new(a.first()?.as_f64()?, a.get(1)?.as_f64()?).ok()
        })
        .collect()
}

/// Sequences in a tile payload. Parts of a MultiLineString are concatenated.
pub fn parse_tile(body: &str) -> Result<Vec<SequenceRecord>, String> {
    let doc: Value = serde_json::from_str(body).map_err(|e| format!("invalid tile payload: {e}"))?;
    let features = doc.get("features").and_then(Value::as_array).ok_or("tile payload has no features")?;
    let mut out = Vec::new();
    for f in features {
        let props = f.get("properties").cloned().unwrap_or(Value::Null);
        let id = ["id", "sequence_id"].iter().find_map(|k| match props.get(*k)? {
            Value::String(s) => Some(s.clone()),
            Value::Number(n) => Some(n.to_string()),
            _ => None,
        });
        let Some(id) = id else { continue };
        let geom = f.get("geometry").cloned().unwrap_or(Value::Null);
        let points = match geom.get("type").and_then(Value::as_str) {
            Some("LineString") => geom.get("coordinates").and_then(coords).unwrap_or_default(),
            Some("MultiLineString") => geom
                .get("coordinates")
                .and_then(Value::as_array)
                .map(|parts| parts.iter().filter_map(coords).flatten().collect())
                .unwrap_or_default(),
            _ => continue,
        };
        out.push(SequenceRecord { id, images: Vec::new(), geometry: Polyline::from_track(points) });
    }
    out.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(out)
}

fn parse_images_body(body: &str) -> Result<Vec<Value>, String> {
    let doc: Value = serde_json::from_str(body).map_err(|e| format!("invalid images payload: {e}"))?;
    doc.get("data").and_then(Value::as_array).cloned().ok_or_else(|| "images payload has no data array".to_string())
}

/// Maps one graph-endpoint image object onto the record schema.
pub fn image_from_graph(v: &Value, sequence: &str) -> Result<ImageRecord, String> {
    let s = |k: &str| -> Option<String> {
        match v.get(k)? {
            Value::String(s) => Some(s.clone()),
            Value::Number(n) => Some(n.to_string()),
            _ => None,
        }
    };
    let id = s("id").ok_or("missing id")?;
    let geom = v.get("computed_geometry").or_else(|| v.get("geometry")).ok_or("missing geometry")?;
    let c = geom.get("coordinates").and_then(Value::as_array).ok_or("geometry without coordinates")?;
    let lon = c.first().and_then(Value::as_f64).ok_or("bad longitude")?;
    let lat = c.get(1).and_then(Value::as_f64).ok_or("bad latitude")?;
    let point = GeoPoint::new(lon, lat).map_err(|e| e.to_string())?;
    let creator = match v.get("creator") {
        Some(Value::Object(o)) => o.get("username").or_else(|| o.get("id")).and_then(|x| match x {
            Value::String(s) => Some(s.clone()),
            Value::Number(n) => Some(n.to_string()),
            _ => None,
        }),
        Some(Value::String(x)) => Some(x.clone()),
        _ => None,
    };
    let timestamp = v.get("captured_at").and_then(Value::as_i64).ok_or("missing captured_at")?;
    if timestamp < 0 {
        return Err("negative captured_at".into());
    }
    Ok(ImageRecord {
        id,
        sequence: s("sequence").or_else(|| s("sequence_id")).unwrap_or_else(|| sequence.to_string()),
        url: s("thumb_original_url").unwrap_or_default(),
        point,
        height: v.get("height").and_then(Value::as_u64).unwrap_or(0) as u32,
        width: v.get("width").and_then(Value::as_u64).unwrap_or(0) as u32,
        altitude: v.get("computed_altitude").and_then(Value::as_f64),
        make: s("make").filter(|x| !x.is_empty()),
        model: s("model").filter(|x| !x.is_empty()),
        creator,
        is_pano: v.get("is_pano").and_then(Value::as_bool).unwrap_or(false),
        timestamp,
        country_iso: None,
        continent: None,
        urban_id: None,
        hdi: None,
    })
}

/// Reads the `sequences.ndjson` written by [`Harvester::harvest_sequences`].
pub fn read_sequences(path: &Path) -> Result<Vec<SequenceRecord>, HarvestError> {
    let f = fs::File::open(path).map_err(|e| HarvestError::Io(path.display().to_string(), e))?;
    BufReader::new(f)
        .lines()
        .filter(|l| l.as_ref().map_or(true, |s| !s.trim().is_empty()))
        .map(|l| {
            let l = l.map_err(|e| HarvestError::Io(path.display().to_string(), e))?;
            serde_json::from_str(&l).map_err(|e| HarvestError::Checkpoint(format!("{}: {e}", path.display())))
        })
        .collect()
}
