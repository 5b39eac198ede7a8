use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use serde_json::{Map, Value};

use super::{Continent, IngestError};
use crate::geo::{BBox, GeoPoint, SegmentIndex};

/// One or more closed rings, evaluated together with the even-odd rule, so
/// holes and multipolygon parts need no special casing.
#[derive(Debug, Clone, PartialEq)]
pub struct Rings {
    rings: Vec<Vec<GeoPoint>>,
    bbox: BBox,
}

impl Rings {
    pub fn new(rings: Vec<Vec<GeoPoint>>) -> Result<Self, String> {
        if rings.is_empty() {
            return Err("polygon has no rings".into());
        }
        for (i, ring) in rings.iter().enumerate() {
            if ring.len() < 4 {
                return Err(format!("ring {i} has {} points, need at least 4", ring.len()));
            }
            if ring.first() != ring.last() {
                return Err(format!("ring {i} is not closed"));
            }
            if let Some(p) = ring.iter().find(|p| !p.is_valid()) {
                return Err(format!("ring {i} has invalid coordinate ({}, {})", p.lon, p.lat));
            }
        }
        let bbox = BBox::from_points(rings.iter().flatten().copied()).expect("non-empty rings");
        Ok(Self { rings, bbox })
    }

    pub fn bbox(&self) -> BBox {
        self.bbox
    }

    pub fn rings(&self) -> &[Vec<GeoPoint>] {
        &self.rings
    }

    /// Even-odd containment; points on an edge count as inside.
    pub fn contains(&self, p: GeoPoint) -> bool {
        if !self.bbox.contains(p) {
            return false;
        }
        let mut inside = false;
        for ring in &self.rings {
            for w in ring.windows(2) {
                let (a, b) = (w[0], w[1]);
                if on_edge(p, a, b) {
                    return true;
                }
                if (a.lat > p.lat) != (b.lat > p.lat) {
                    let x = a.lon + (p.lat - a.lat) * (b.lon - a.lon) / (b.lat - a.lat);
                    if p.lon < x {
                        inside = !inside;
                    }
                }
            }
        }
        inside
    }
}

fn on_edge(p: GeoPoint, a: GeoPoint, b: GeoPoint) -> bool {
    let cross = (b.lon - a.lon) * (p.lat - a.lat) - (b.lat - a.lat) * (p.lon - a.lon);
    let scale = (b.lon - a.lon).abs().max((b.lat - a.lat).abs()).max(1e-300);
    if cross.abs() > 1e-12 * scale {
        return false;
    }
    p.lon >= a.lon.min(b.lon) && p.lon <= a.lon.max(b.lon) && p.lat >= a.lat.min(b.lat) && p.lat <= a.lat.max(b.lat)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UrbanSource {
    Africapolis,
    GhsUcdb,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UrbanArea {
    pub id: String,
    pub name: String,
    pub source: UrbanSource,
    pub polygon: Rings,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountryRecord {
    pub iso3: String,
    pub name: String,
    pub continent: Continent,
    pub polygon: Rings,
    pub hdi: Option<f64>,
}

impl CountryRecord {
    pub fn validate(&self) -> Result<(), String> {
        if self.iso3.len() != 3 || !self.iso3.chars().all(|c| c.is_ascii_uppercase()) {
            return Err(format!("iso3 {:?} must be three uppercase letters", self.iso3));
        }
        if let Some(h) = self.hdi {
            if !(0.0..=1.0).contains(&h) {
                return Err(format!("hdi {h} outside [0, 1]"));
            }
        }
        Ok(())
    }
}

/// Polygons sorted by key with a bbox index for point lookups.
#[derive(Debug, Clone)]
pub struct AreaLookup<T> {
    items: Vec<T>,
    index: SegmentIndex,
}

pub trait Area {
    fn key(&self) -> &str;
    fn polygon(&self) -> &Rings;
}

impl Area for UrbanArea {
    fn key(&self) -> &str {
        &self.id
    }
    fn polygon(&self) -> &Rings {
        &self.polygon
    }
}

impl Area for CountryRecord {
    fn key(&self) -> &str {
        &self.iso3
    }
    fn polygon(&self) -> &Rings {
        &self.polygon
    }
}

impl<T: Area> AreaLookup<T> {
    pub fn new(mut items: Vec<T>) -> Self {
        items.sort_by(|a, b| a.key().cmp(b.key()));
        let boxes: Vec<BBox> = items.iter().map(|a| a.polygon().bbox()).collect();
        let index = SegmentIndex::build(&boxes, 0.0).expect("zero buffer never fails");
        Self { items, index }
    }

    pub fn items(&self) -> &[T] {
        &self.items
    }

    /// First area (by key) containing `p`.
    pub fn locate(&self, p: GeoPoint) -> Option<&T> {
        self.index.query(p).into_iter().map(|i| &self.items[i]).find(|a| a.polygon().contains(p))
    }
}

pub type UrbanAreas = AreaLookup<UrbanArea>;
pub type Countries = AreaLookup<CountryRecord>;

fn load_features(path: &Path) -> Result<Vec<Value>, IngestError> {
    let file = File::open(path).map_err(|e| IngestError::io(path, e))?;
    let doc: Value = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| IngestError::geojson(path, format!("invalid json: {e}")))?;
    if doc.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(IngestError::geojson(path, "expected a FeatureCollection"));
    }
    match doc.get("features") {
        Some(Value::Array(f)) => Ok(f.clone()),
        _ => Err(IngestError::geojson(path, "missing features array")),
    }
}

fn parse_ring(v: &Value) -> Result<Vec<GeoPoint>, String> {
    v.as_array()
        .ok_or("ring is not an array")?
        .iter()
        .map(|c| {
            let xy = c.as_array().filter(|a| a.len() >= 2).ok_or("position needs two numbers")?;
            let lon = xy[0].as_f64().ok_or("longitude is not a number")?;
            let lat = xy[1].as_f64().ok_or("latitude is not a number")?;
            GeoPoint::new(lon, lat).map_err(|e| e.to_string())
        })
        .collect()
}

/// Rings of a Polygon or MultiPolygon geometry.
pub fn parse_polygon(geometry: &Value) -> Result<Rings, String> {
    let kind = geometry.get("type").and_then(Value::as_str).ok_or("geometry without type")?;
    let coords = geometry.get("coordinates").ok_or("geometry without coordinates")?;
    let polys: Vec<&Value> = match kind {
        "Polygon" => vec![coords],
        "MultiPolygon" => coords.as_array().ok_or("coordinates not an array")?.iter().collect(),
        other => return Err(format!("unsupported geometry type {other}")),
    };
    let mut rings = Vec::new();
    for poly in polys {
        for ring in poly.as_array().ok_or("polygon is not an array of rings")? {
            rings.push(parse_ring(ring)?);
        }
    }
    Rings::new(rings)
}

fn prop_string(props: &Map<String, Value>, key: &str) -> Option<String> {
    match props.get(key)? {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn feature_parts(feature: &Value) -> Result<(&Map<String, Value>, Rings), String> {
    let props = feature.get("properties").and_then(Value::as_object).ok_or("feature without properties")?;
    let geometry = feature.get("geometry").ok_or("feature without geometry")?;
    Ok((props, parse_polygon(geometry)?))
}

/// Reads urban polygons. Required properties: `id`, `name`; optional
/// `source` (`Africapolis` or `GHS-UCDB`, default `GHS-UCDB`).
pub fn read_urban_areas(path: &Path) -> Result<Vec<UrbanArea>, IngestError> {
    load_features(path)?
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let bad = |msg: String| IngestError::geojson(path, format!("feature {i}: {msg}"));
            let (props, polygon) = feature_parts(f).map_err(bad)?;
            let id = prop_string(props, "id").ok_or_else(|| bad("missing property id".into()))?;
            let name = prop_string(props, "name").ok_or_else(|| bad("missing property name".into()))?;
            let source = match prop_string(props, "source").as_deref().map(str::to_ascii_lowercase).as_deref() {
                Some("africapolis") => UrbanSource::Africapolis,
                None | Some("ghs-ucdb") | Some("ghs_ucdb") => UrbanSource::GhsUcdb,
                Some(other) => return Err(bad(format!("unknown source {other:?}"))),
            };
            Ok(UrbanArea { id, name, source, polygon })
        })
        .collect()
}

/// Reads country polygons. Required properties: `iso3`, `continent`;
/// optional `name`, `hdi`.
pub fn read_countries(path: &Path) -> Result<Vec<CountryRecord>, IngestError> {
    load_features(path)?
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let bad = |msg: String| IngestError::geojson(path, format!("feature {i}: {msg}"));
            let (props, polygon) = feature_parts(f).map_err(bad)?;
            let iso3 = prop_string(props, "iso3").ok_or_else(|| bad("missing property iso3".into()))?;
            let continent = prop_string(props, "continent")
                .ok_or_else(|| bad("missing property continent".into()))?
                .parse()
                .map_err(bad)?;
            let name = prop_string(props, "name").unwrap_or_else(|| iso3.clone());
            let hdi = props.get("hdi").and_then(Value::as_f64);
            let c = CountryRecord { iso3, name, continent, polygon, hdi };
            c.validate().map_err(bad)?;
            Ok(c)
        })
        .collect()
}

/// Reads `iso3,hdi`.
pub fn read_hdi(path: &Path) -> Result<BTreeMap<String, f64>, IngestError> {
    #[derive(serde::Deserialize)]
    struct Row {
        iso3: String,
        hdi: f64,
    }
    let mut rdr = csv::Reader::from_path(path).map_err(|e| IngestError::csv(path, e))?;
    let mut out = BTreeMap::new();
    for row in rdr.deserialize::<Row>() {
        let row = row.map_err(|e| IngestError::csv(path, e))?;
        if !(0.0..=1.0).contains(&row.hdi) {
            return Err(IngestError::Invalid(format!("{}: hdi {} for {} outside [0, 1]", path.display(), row.hdi, row.iso3)));
        }
        out.insert(row.iso3.trim().to_ascii_uppercase(), row.hdi);
    }
    Ok(out)
}
