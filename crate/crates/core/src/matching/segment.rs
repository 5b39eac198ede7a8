use std::collections::HashSet;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use serde_json::Value;

use crate::geo::{GeoPoint, Polyline};
use crate::ingest::IngestError;

/// One OSM way tagged `highway=*`.
#[derive(Debug, Clone, PartialEq)]
pub struct RoadSegment {
    pub osm_id: i64,
    pub highway: String,
    /// Raw `surface` tag value.
    pub surface_tag: Option<String>,
    pub geometry: Polyline,
    pub changeset_timestamp: Option<i64>,
}

impl RoadSegment {
    pub fn length_m(&self) -> f64 {
        self.geometry.length_m()
    }
}

fn osm_id(v: &Value) -> Option<i64> {
    match v {
        Value::Number(n) => n.as_i64(),
        Value::String(s) => s.trim_start_matches("way/").parse().ok(),
        _ => None,
    }
}

/// Reads `segments.geojson`: LineString features with `osm_id` and
/// `highway`, optionally `surface` and `changeset_timestamp`.
/// Output is sorted by `osm_id`; duplicate ids are an error.
pub fn read_segments(path: &Path) -> Result<Vec<RoadSegment>, IngestError> {
    let bad = |m: String| IngestError::GeoJson { path: path.display().to_string(), message: m };
    let file = File::open(path).map_err(|e| IngestError::Io { path: path.display().to_string(), source: e })?;
    let doc: Value = serde_json::from_reader(BufReader::new(file)).map_err(|e| bad(format!("invalid json: {e}")))?;
    let features = doc.get("features").and_then(Value::as_array).ok_or_else(|| bad("missing features array".into()))?;
    let mut out = Vec::with_capacity(features.len());
    for (i, f) in features.iter().enumerate() {
        let props = f.get("properties").ok_or_else(|| bad(format!("feature {i}: no properties")))?;
        let id = props.get("osm_id").and_then(osm_id).ok_or_else(|| bad(format!("feature {i}: missing integer osm_id")))?;
        let highway = props
            .get("highway")
            .and_then(Value::as_str)
            .ok_or_else(|| bad(format!("feature {i}: missing highway")))?
            .to_string();
        let surface_tag = props.get("surface").and_then(Value::as_str).map(str::to_string);
        let changeset_timestamp = props.get("changeset_timestamp").and_then(Value::as_i64);
        let geom = f.get("geometry").ok_or_else(|| bad(format!("feature {i}: no geometry")))?;
        if geom.get("type").and_then(Value::as_str) != Some("LineString") {
            return Err(bad(format!("feature {i}: geometry must be a LineString")));
        }
        let points = geom
            .get("coordinates")
            .and_then(Value::as_array)
            .ok_or_else(|| bad(format!("feature {i}: no coordinates")))?
            .iter()
            .map(|c| {
                let a = c.as_array().filter(|a| a.len() >= 2).ok_or("position needs two numbers")?;
                let (lon, lat) = (a[0].as_f64().ok_or("bad longitude")?, a[1].as_f64().ok_or("bad latitude")?);
                GeoPoint::new(lon, lat).map_err(|_| "coordinate out of range")
            })
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| bad(format!("feature {i}: {e}")))?;
        let geometry = Polyline::new(points).map_err(|e| bad(format!("feature {i} (osm_id {id}): {e}")))?;
        out.push(RoadSegment { osm_id: id, highway, surface_tag, geometry, changeset_timestamp });
    }
    out.sort_by_key(|s| s.osm_id);
    let mut seen = HashSet::new();
    if let Some(dup) = out.iter().find(|s| !seen.insert(s.osm_id)) {
        return Err(bad(format!("duplicate osm_id {}", dup.osm_id)));
    }
    Ok(out)
}

/// GeoJSON for a list of segments, the inverse of [`read_segments`].
pub fn segments_to_geojson(segments: &[RoadSegment]) -> Value {
    let features: Vec<Value> = segments
        .iter()
        .map(|s| {
            let coords: Vec<Value> = s.geometry.points().iter().map(|p| serde_json::json!([p.lon, p.lat])).collect();
            let mut props = serde_json::Map::new();
            props.insert("osm_id".into(), s.osm_id.into());
            props.insert("highway".into(), s.highway.clone().into());
            if let Some(t) = &s.surface_tag {
                props.insert("surface".into(), t.clone().into());
            }
            if let Some(t) = s.changeset_timestamp {
                props.insert("changeset_timestamp".into(), t.into());
            }
            serde_json::json!({
                "type": "Feature",
                "properties": props,
                "geometry": {"type": "LineString", "coordinates": coords},
            })
        })
        .collect();
    serde_json::json!({"type": "FeatureCollection", "features": features})
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_and_validates() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("segments.geojson");
        std::fs::write(
            &p,
            r#"{"type":"FeatureCollection","features":[
              {"type":"Feature","properties":{"osm_id":"way/20","highway":"track","surface":"gravel"},
               "geometry":{"type":"LineString","coordinates":[[0,0],[0.001,0]]}},
              {"type":"Feature","properties":{"osm_id":10,"highway":"primary","changeset_timestamp":1700000000000},
               "geometry":{"type":"LineString","coordinates":[[0,0.001],[0.001,0.001],[0.002,0.002]]}}]}"#,
        )
        .unwrap();
        let segs = read_segments(&p).unwrap();
        assert_eq!(segs.iter().map(|s| s.osm_id).collect::<Vec<_>>(), [10, 20]);
        assert_eq!(segs[1].surface_tag.as_deref(), Some("gravel"));
        assert_eq!(segs[0].changeset_timestamp, Some(1_700_000_000_000));

        let back = dir.path().join("again.geojson");
        std::fs::write(&back, serde_json::to_string(&segments_to_geojson(&segs)).unwrap()).unwrap();
        assert_eq!(read_segments(&back).unwrap(), segs);
    }

    #[test]
    fn rejects_duplicates_and_bad_geometry() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.geojson");
        let feat = |id: i64| {
            format!(r#"{{"type":"Feature","properties":{{"osm_id":{id},"highway":"road"}},"geometry":{{"type":"LineString","coordinates":[[0,0],[1,1]]}}}}"#)
        };
        std::fs::write(&p, format!(r#"{{"type":"FeatureCollection","features":[{},{}]}}"#, feat(1), feat(1))).unwrap();
        assert!(read_segments(&p).is_err());
        std::fs::write(
            &p,
            r#"{"type":"FeatureCollection","features":[{"type":"Feature","properties":{"osm_id":1,"highway":"road"},"geometry":{"type":"LineString","coordinates":[[0,0]]}}]}"#,
        )
        .unwrap();
        assert!(read_segments(&p).is_err());
    }
}
