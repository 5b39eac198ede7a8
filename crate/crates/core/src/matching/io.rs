use std::path::Path;

use super::{Assignment, MatchResult, Tier};
use crate::fsutil;
use crate::ingest::IngestError;

pub const MATCH_COLUMNS: [&str; 7] = ["image_id", "tier", "osm_ids", "distances_meter", "abs_dif", "percent_dif", "osm_id"];

fn join<T, F: Fn(&Assignment) -> T>(r: &MatchResult, f: F) -> String
where
    T: std::fmt::Display,
{
    r.assignments.iter().map(|a| f(a).to_string()).collect::<Vec<_>>().join("|")
}

/// Writes `matches.csv`. Multi-valued columns are `|`-separated; distances
/// and absolute differences carry 3 decimals, percent differences 4.
pub fn write_matches(path: &Path, results: &[MatchResult]) -> Result<(), IngestError> {
    fsutil::write_atomic(path, |w| {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(MATCH_COLUMNS)?;
        for r in results {
            wtr.write_record([
                r.image_id.clone(),
                r.tier.to_string(),
                join(r, |a| a.osm_id),
                join(r, |a| format!("{:.3}", a.distance_m)),
                join(r, |a| format!("{:.3}", a.abs_diff_m)),
                join(r, |a| format!("{:.4}", a.percent_diff)),
                r.primary().map(|a| a.osm_id.to_string()).unwrap_or_default(),
            ])?;
        }
        wtr.flush()
    })
    .map_err(|e| IngestError::Io { path: path.display().to_string(), source: e })
}

fn split<T: std::str::FromStr>(s: &str) -> Result<Vec<T>, String> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split('|').map(|x| x.parse::<T>().map_err(|_| format!("cannot parse {x:?}"))).collect()
}

pub fn read_matches(path: &Path) -> Result<Vec<MatchResult>, IngestError> {
    let bad = |line: u64, m: String| IngestError::Csv { path: path.display().to_string(), message: format!("line {line}: {m}") };
    let mut rdr = csv::Reader::from_path(path).map_err(|e| IngestError::csv(path, e))?;
    let headers = rdr.headers().map_err(|e| IngestError::csv(path, e))?.clone();
    if headers.iter().collect::<Vec<_>>() != MATCH_COLUMNS {
        return Err(bad(1, format!("expected header {}", MATCH_COLUMNS.join(","))));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| IngestError::csv(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let tier: Tier = rec[1].parse().map_err(|e| bad(line, e))?;
        let ids: Vec<i64> = split(&rec[2]).map_err(|e| bad(line, e))?;
        let dist: Vec<f64> = split(&rec[3]).map_err(|e| bad(line, e))?;
        let abs: Vec<f64> = split(&rec[4]).map_err(|e| bad(line, e))?;
        let pct: Vec<f64> = split(&rec[5]).map_err(|e| bad(line, e))?;
        if dist.len() != ids.len() || abs.len() != ids.len() || pct.len() != ids.len() {
            return Err(bad(line, "multi-valued columns differ in length".into()));
        }
        if (tier == Tier::Unmatched) != ids.is_empty() {
            return Err(bad(line, "tier and assignments disagree".into()));
        }
        let assignments = (0..ids.len())
            .map(|i| Assignment { osm_id: ids[i], distance_m: dist[i], abs_diff_m: abs[i], percent_diff: pct[i], closest_point: None })
            .collect();
        out.push(MatchResult { image_id: rec[0].to_string(), assignments, tier });
    }
    Ok(out)
}
