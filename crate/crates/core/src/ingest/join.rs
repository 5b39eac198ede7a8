use std::collections::BTreeMap;

use rayon::prelude::*;

use super::{Countries, ImageRecord, UrbanAreas};
use crate::geo::GeoPoint;

/// Id of the first urban area (by id) containing `p`.
pub fn classify_urban(p: GeoPoint, urban: &UrbanAreas) -> Option<String> {
    urban.locate(p).map(|a| a.id.clone())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct JoinReport {
    pub matched: usize,
    pub unmatched: usize,
}

/// Fills `country_iso`, `continent` and `hdi` from the containing country.
///
/// `hdi_table` (from `hdi.csv`) takes precedence over an `hdi` property on the
/// country polygon. Records outside every country keep empty enrichment and
/// are counted as unmatched.
pub fn join_country_hdi(records: &mut [ImageRecord], countries: &Countries, hdi_table: &BTreeMap<String, f64>) -> JoinReport {
    let hits: Vec<bool> = records
        .par_iter_mut()
        .map(|r| match countries.locate(r.point) {
            Some(c) => {
                r.country_iso = Some(c.iso3.clone());
                r.continent = Some(c.continent);
                r.hdi = hdi_table.get(&c.iso3).copied().or(c.hdi);
                true
            }
            None => {
                r.country_iso = None;
                r.continent = None;
                r.hdi = None;
                false
            }
        })
        .collect();
    let matched = hits.iter().filter(|h| **h).count();
    JoinReport { matched, unmatched: hits.len() - matched }
}

/// Sets `urban_id` on every record.
pub fn join_urban(records: &mut [ImageRecord], urban: &UrbanAreas) -> usize {
    records
        .par_iter_mut()
        .map(|r| {
            r.urban_id = classify_urban(r.point, urban);
            usize::from(r.urban_id.is_some())
        })
        .sum()
}
