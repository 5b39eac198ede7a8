//! The stage commands behind the CLI. Stages hand over through files in the
//! stage directory, so each one can be rerun on its own.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use log::info;

use crate::config::PipelineConfig;
use crate::fsutil;
use crate::geo::{tiles_covering, BBox};
use crate::ingest::harvest::{read_sequences, ApiClient, Clock, HarvestPaths, Harvester, HttpClient, RunLimit, SystemClock};
use crate::ingest::{
    join_country_hdi, join_urban, read_countries, read_hdi, read_image_records, read_urban_areas, thin_all, write_image_records,
    write_rejects, Countries, ImageRecord, RecordFormat, UrbanAreas,
};
use crate::manifest::{RunManifest, StageCounts, Timings};
use crate::matching::{match_all, read_matches, read_segments, write_matches, MatchResult, RoadSegment, TierCounts};
use crate::stats::{
    breakdown_by_highway_class, build_segment_facts, compute_tile_stats, confusion_metrics, country_report, evaluate_against_osm,
    hdi_regression, sequence_tracks, sequences_by_segment, write_continents, write_countries, write_evaluation,
    write_highway_classes, write_tiles_csv, write_tiles_geojson, FactInputs, RegressionPoint,
};
use crate::surface::{
    assert_token_sets_disjoint, combination_filter, label_all_segments, read_predictions, read_segment_labels, write_predictions,
    write_segment_labels, FilterDecision, PredictionRecord,
};

/// File names inside the stage directory.
#[derive(Debug, Clone)]
pub struct StagePaths {
    pub dir: PathBuf,
}

impl StagePaths {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    fn file(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn harvest_dir(&self) -> PathBuf {
        self.file("harvest")
    }
    pub fn thinned(&self) -> PathBuf {
        self.file("images_thinned.csv")
    }
    pub fn enriched(&self) -> PathBuf {
        self.file("images_enriched.csv")
    }
    pub fn matches(&self) -> PathBuf {
        self.file("matches.csv")
    }
    pub fn predictions(&self) -> PathBuf {
        self.file("predictions_filtered.csv")
    }
    pub fn labels(&self) -> PathBuf {
        self.file("segments_labeled.csv")
    }
    pub fn tiles_csv(&self) -> PathBuf {
        self.file("tiles.csv")
    }
    pub fn tiles_geojson(&self) -> PathBuf {
        self.file("tiles.geojson")
    }
    pub fn countries(&self) -> PathBuf {
        self.file("countries.csv")
    }
    pub fn continents(&self) -> PathBuf {
        self.file("continents.csv")
    }
    pub fn highway_classes(&self) -> PathBuf {
        self.file("highway_classes.csv")
    }
    pub fn hdi_regression(&self) -> PathBuf {
        self.file("hdi_regression.csv")
    }
    pub fn evaluation(&self) -> PathBuf {
        self.file("evaluation.csv")
    }
    pub fn manifest(&self) -> PathBuf {
        self.file("manifest.json")
    }
    pub fn timings(&self) -> PathBuf {
        self.file("timings.json")
    }
}

fn stage_paths(cfg: &PipelineConfig) -> StagePaths {
    StagePaths::new(&cfg.stage_dir)
}

fn rejects_path(output: &Path) -> PathBuf {
    let mut name = output.file_stem().unwrap_or_default().to_os_string();
    name.push(".rejects.csv");
    output.with_file_name(name)
}

fn require(path: &Path, what: &str, hint: &str) -> Result<()> {
    if !path.is_file() {
        bail!("{what} not found at {}; {hint}", path.display());
    }
    Ok(())
}

fn require_stage(path: &Path, producer: &str) -> Result<()> {
    require(path, "stage file", &format!("run `surface-forge {producer}` first"))
}

/// Where raw image records come from: the harvest output when a `[harvest]`
/// table is configured, `inputs.images` otherwise.
pub fn raw_images_path(cfg: &PipelineConfig) -> PathBuf {
    match (&cfg.harvest, &cfg.inputs.images) {
        (Some(_), _) | (None, None) => HarvestPaths::new(stage_paths(cfg).harvest_dir()).images(),
        (None, Some(p)) => p.clone(),
    }
}

fn load_raw_images(cfg: &PipelineConfig) -> Result<(Vec<ImageRecord>, usize, Vec<crate::ingest::Reject>)> {
    let path = raw_images_path(cfg);
    let hint = if cfg.harvest.is_some() { "run `surface-forge harvest` first" } else { "check `inputs.images`" };
    require(&path, "image records", hint)?;
    let report = read_image_records(&path, RecordFormat::from_path(&path)?)?;
    Ok((report.records, report.rows, report.rejects))
}

fn load_urban(cfg: &PipelineConfig) -> Result<UrbanAreas> {
    require(&cfg.inputs.urban_areas, "urban areas", "check `inputs.urban_areas`")?;
    Ok(UrbanAreas::new(read_urban_areas(&cfg.inputs.urban_areas)?))
}

fn load_countries(cfg: &PipelineConfig) -> Result<Countries> {
    require(&cfg.inputs.countries, "countries", "check `inputs.countries`")?;
    Ok(Countries::new(read_countries(&cfg.inputs.countries)?))
}

fn load_hdi_table(cfg: &PipelineConfig) -> Result<BTreeMap<String, f64>> {
    match &cfg.inputs.hdi {
        Some(p) => {
            require(p, "HDI table", "check `inputs.hdi`")?;
            Ok(read_hdi(p)?)
        }
        None => Ok(BTreeMap::new()),
    }
}

fn load_segments(cfg: &PipelineConfig) -> Result<Vec<RoadSegment>> {
    require(&cfg.inputs.segments, "road segments", "check `inputs.segments`")?;
    Ok(read_segments(&cfg.inputs.segments)?)
}

fn load_stage_images(path: &Path, producer: &str) -> Result<Vec<ImageRecord>> {
    require_stage(path, producer)?;
    let report = read_image_records(path, RecordFormat::Csv)?;
    if let Some(r) = report.rejects.first() {
        bail!("{}: line {}: {}", path.display(), r.line, r.reason);
    }
    Ok(report.records)
}

fn load_matches(paths: &StagePaths) -> Result<Vec<MatchResult>> {
    require_stage(&paths.matches(), "match")?;
    Ok(read_matches(&paths.matches())?)
}

fn load_filtered_predictions(paths: &StagePaths) -> Result<Vec<PredictionRecord>> {
    require_stage(&paths.predictions(), "filter")?;
    Ok(read_predictions(&paths.predictions())?)
}

/// Harvests with the given client and clock. Outputs land in
/// `<stage_dir>/harvest/`.
pub fn harvest_with(cfg: &PipelineConfig, client: &dyn ApiClient, clock: &dyn Clock, limit: RunLimit) -> Result<StageCounts> {
    let (Some(h), Some(settings)) = (&cfg.harvest, cfg.harvest_settings()) else {
        bail!("no [harvest] table in the config");
    };
    let [a, b, c, d] = h.region;
    let tiles = tiles_covering(&BBox::new(a, b, c, d)?, cfg.zoom)?;
    let harvester = Harvester::new(client, clock, settings, HarvestPaths::new(stage_paths(cfg).harvest_dir()));
    let seqs = harvester.harvest_sequences(&tiles, limit)?;
    info!("harvest: {} tiles done, {} failed, {} skipped", seqs.units_done, seqs.units_failed, seqs.units_skipped);
    if seqs.interrupted {
        return Ok(StageCounts::join("harvest", tiles.len(), 0));
    }
    let sequences = read_sequences(&harvester.paths().sequences())?;
    let ids: Vec<String> = sequences.iter().map(|s| s.id.clone()).collect();
    let imgs = harvester.harvest_image_metadata(&ids, limit)?;
    info!("harvest: {} sequences done, {} failed, {} skipped", imgs.units_done, imgs.units_failed, imgs.units_skipped);
    let images = if imgs.interrupted { 0 } else { imgs.records_written };
    Ok(StageCounts::join("harvest", tiles.len(), images))
}

pub fn cmd_harvest(cfg: &PipelineConfig) -> Result<StageCounts> {
    let client = HttpClient::from_env()?;
    harvest_with(cfg, &client, &SystemClock, RunLimit::default())
}

pub fn cmd_thin(cfg: &PipelineConfig) -> Result<StageCounts> {
    let paths = stage_paths(cfg);
    let (records, rows, rejects) = load_raw_images(cfg)?;
    write_rejects(&rejects_path(&paths.thinned()), &rejects)?;
    let urban = load_urban(cfg)?;
    let n_in = records.len();
    let kept = thin_all(records, &urban, cfg.thin_gaps());
    write_image_records(&paths.thinned(), RecordFormat::Csv, &kept)?;
    info!("thin: {rows} rows, {} rejected, {n_in} valid, {} kept", rejects.len(), kept.len());
    Ok(StageCounts::new("thin", n_in, kept.len()))
}

pub fn cmd_enrich(cfg: &PipelineConfig) -> Result<StageCounts> {
    let paths = stage_paths(cfg);
    let mut images = load_stage_images(&paths.thinned(), "thin")?;
    let urban = load_urban(cfg)?;
    let countries = load_countries(cfg)?;
    let hdi = load_hdi_table(cfg)?;
    let n_urban = join_urban(&mut images, &urban);
    let report = join_country_hdi(&mut images, &countries, &hdi);
    write_image_records(&paths.enriched(), RecordFormat::Csv, &images)?;
    info!("enrich: {} images, {n_urban} urban, {} in a country, {} outside", images.len(), report.matched, report.unmatched);
    Ok(StageCounts::join("enrich", images.len(), images.len()))
}

pub fn cmd_match(cfg: &PipelineConfig) -> Result<StageCounts> {
    let paths = stage_paths(cfg);
    let images = load_stage_images(&paths.enriched(), "enrich")?;
    let segments = load_segments(cfg)?;
    let results = match_all(&images, &segments, cfg.match_params())?;
    write_matches(&paths.matches(), &results)?;
    let t = TierCounts::from_results(&results);
    info!("match: {} images; tiers 10 m {}, 20 m {}, 30 m {}, unmatched {}", images.len(), t.t10, t.t20, t.t30, t.unmatched);
    Ok(StageCounts::new("match", images.len(), t.matched()))
}

pub fn cmd_filter(cfg: &PipelineConfig) -> Result<StageCounts> {
    let paths = stage_paths(cfg);
    require(&cfg.inputs.predictions, "predictions", "check `inputs.predictions`")?;
    let mut preds = read_predictions(&cfg.inputs.predictions)?;
    let t = cfg.filter_thresholds();
    for p in &mut preds {
        p.no_road_image_filter = Some(combination_filter(p, t) == FilterDecision::Keep);
    }
    preds.sort_by(|a, b| a.image_id.cmp(&b.image_id));
    if let Some(w) = preds.windows(2).find(|w| w[0].image_id == w[1].image_id) {
        bail!("{}: duplicate image_id {:?}", cfg.inputs.predictions.display(), w[0].image_id);
    }
    write_predictions(&paths.predictions(), &preds)?;
    let kept = preds.iter().filter(|p| p.no_road_image_filter == Some(true)).count();
    info!("filter: {} predictions, {} removed", preds.len(), preds.len() - kept);
    Ok(StageCounts::new("filter", preds.len(), kept))
}

pub fn cmd_aggregate(cfg: &PipelineConfig) -> Result<StageCounts> {
    let paths = stage_paths(cfg);
    let matches = load_matches(&paths)?;
    let preds = load_filtered_predictions(&paths)?;
    let segments = load_segments(cfg)?;
    let (labels, d) = label_all_segments(&matches, &preds, &segments, cfg.filter_thresholds(), &cfg.aggregation_params()?);
    write_segment_labels(&paths.labels(), &labels)?;
    info!(
        "aggregate: {} matched images, {} without prediction, {} filtered, {} unknown segment ids; {} segments labeled",
        d.matched_images,
        d.missing_prediction,
        d.filtered_out,
        d.unknown_segment,
        labels.len()
    );
    Ok(StageCounts::new("aggregate", d.contributions, labels.len()))
}

pub fn cmd_stats(cfg: &PipelineConfig) -> Result<StageCounts> {
    let paths = stage_paths(cfg);
    let segments = load_segments(cfg)?;
    require_stage(&paths.labels(), "aggregate")?;
    let labels = read_segment_labels(&paths.labels())?;
    let matches = load_matches(&paths)?;
    let thinned = load_stage_images(&paths.enriched(), "enrich")?;
    // sequence geometry uses every valid raw image, not just the thinned ones
    let (raw, _, _) = load_raw_images(cfg)?;
    let urban = load_urban(cfg)?;
    let countries = load_countries(cfg)?;
    let mut hdi: BTreeMap<String, f64> = countries.items().iter().filter_map(|c| c.hdi.map(|h| (c.iso3.clone(), h))).collect();
    hdi.extend(load_hdi_table(cfg)?);

    let tracks = sequence_tracks(&raw);
    let matched_sequences = sequences_by_segment(&matches, &thinned);
    let facts = build_segment_facts(&FactInputs {
        segments: &segments,
        labels: &labels,
        matched_sequences: &matched_sequences,
        tracks: &tracks,
        urban: &urban,
        countries: &countries,
        zoom: cfg.zoom,
    })?;
    let tiles = compute_tile_stats(&facts);
    write_tiles_csv(&paths.tiles_csv(), &tiles)?;
    write_tiles_geojson(&paths.tiles_geojson(), &tiles)?;
    write_highway_classes(&paths.highway_classes(), &breakdown_by_highway_class(&facts))?;
    let report = country_report(&facts, &hdi);
    write_countries(&paths.countries(), &report)?;
    write_continents(&paths.continents(), &report)?;

    let points: Vec<RegressionPoint> = report
        .countries
        .iter()
        .filter_map(|r| {
            Some(RegressionPoint { hdi: r.hdi?, pavedness: r.lengths.total.paved_ratio()?, weight: r.lengths.total.labeled_length_m })
        })
        .collect();
    let weighted = cfg.stats.regression_weighted;
    let regression = hdi_regression(&points, weighted);
    fsutil::write_atomic(&paths.hdi_regression(), |w| {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["n", "pearson_r", "r_squared", "slope", "intercept", "weighted", "note"])?;
        match &regression {
            Ok(r) => wtr.write_record([
                r.n.to_string(),
                format!("{:.6}", r.pearson_r),
                format!("{:.6}", r.r_squared),
                format!("{:.6}", r.slope),
                format!("{:.6}", r.intercept),
                weighted.to_string(),
                String::new(),
            ])?,
            Err(e) => wtr.write_record([points.len().to_string(), String::new(), String::new(), String::new(), String::new(), weighted.to_string(), e.to_string()])?,
        }
        wtr.flush()
    })?;
    if let Err(e) = &regression {
        log::warn!("stats: {e}");
    }
    info!("stats: {} segments over {} tiles, {} countries", facts.len(), tiles.len(), report.countries.len());
    Ok(StageCounts::join("stats", segments.len(), tiles.len()))
}

pub fn cmd_eval(cfg: &PipelineConfig) -> Result<StageCounts> {
    let paths = stage_paths(cfg);
    let images = load_stage_images(&paths.enriched(), "enrich")?;
    let preds = load_filtered_predictions(&paths)?;
    let matches = load_matches(&paths)?;
    let segments = load_segments(cfg)?;
    let (counts, d) = evaluate_against_osm(&images, &preds, &matches, &segments, cfg.filter_thresholds());
    write_evaluation(&paths.evaluation(), &counts)?;
    for (c, k) in &counts {
        if let Ok(m) = confusion_metrics(k) {
            info!("eval: {}: n={} accuracy {:.3} mcc {:.3}", c.name(), k.total(), m.accuracy, m.mcc);
        }
    }
    info!(
        "eval: {} evaluated; skipped {} unmatched, {} without prediction, {} filtered, {} unknown surface, {} without continent",
        d.evaluated, d.unmatched, d.missing_prediction, d.filtered_out, d.unknown_surface, d.no_continent
    );
    Ok(StageCounts::new("eval", matches.len(), d.evaluated))
}

/// Every stage in order, then `manifest.json` and `timings.json`.
pub fn cmd_run(cfg: &PipelineConfig) -> Result<RunManifest> {
    run_stages(cfg, |cfg| cmd_harvest(cfg))
}

/// [`cmd_run`] with a custom harvest step, used with fixture servers.
pub fn run_stages(cfg: &PipelineConfig, harvest: impl FnOnce(&PipelineConfig) -> Result<StageCounts>) -> Result<RunManifest> {
    assert_token_sets_disjoint();
    let paths = stage_paths(cfg);
    let mut manifest = RunManifest::new(cfg.params_sha256());
    let mut timings = Timings::default();
    let mut timed = |name: &str, counts: Result<StageCounts>, start: Instant, manifest: &mut RunManifest| -> Result<()> {
        let c = counts.with_context(|| format!("stage {name} failed"))?;
        timings.stages.push((name.to_string(), start.elapsed().as_millis()));
        manifest.stages.push(c);
        Ok(())
    };
    if cfg.harvest.is_some() {
        let t = Instant::now();
        timed("harvest", harvest(cfg), t, &mut manifest)?;
    }
    type Stage = fn(&PipelineConfig) -> Result<StageCounts>;
    let stages: [(&str, Stage); 7] = [
        ("thin", cmd_thin),
        ("enrich", cmd_enrich),
        ("match", cmd_match),
        ("filter", cmd_filter),
        ("aggregate", cmd_aggregate),
        ("stats", cmd_stats),
        ("eval", cmd_eval),
    ];
    for (name, f) in stages {
        let t = Instant::now();
        timed(name, f(cfg), t, &mut manifest)?;
    }
    manifest.add_input("images", &raw_images_path(cfg))?;
    for (name, p) in [
        ("segments", Some(&cfg.inputs.segments)),
        ("predictions", Some(&cfg.inputs.predictions)),
        ("urban_areas", Some(&cfg.inputs.urban_areas)),
        ("countries", Some(&cfg.inputs.countries)),
        ("hdi", cfg.inputs.hdi.as_ref()),
    ] {
        if let Some(p) = p {
            manifest.add_input(name, p)?;
        }
    }
    manifest.validate().map_err(anyhow::Error::msg)?;
    manifest.write(&paths.manifest())?;
    let text = serde_json::to_string_pretty(&timings)? + "\n";
    fsutil::write_atomic_bytes(&paths.timings(), text.as_bytes())?;
    Ok(manifest)
}

/// Runs `f` on a thread pool of `workers` threads.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build()?;
    Ok(pool.install(f))
}
