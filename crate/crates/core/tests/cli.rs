use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use surface_forge::config::PipelineConfig;
use surface_forge::pipeline::{cmd_aggregate, cmd_filter, cmd_match, cmd_stats, cmd_thin, StagePaths};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/synthetic_city").join(name)
}

/// Fixture config with absolute input paths, optionally edited, written into `dir`.
fn write_config(dir: &Path, edit: impl FnOnce(String) -> String) -> PathBuf {
    let mut text = format!("stage_dir = \"{}\"\n\n[inputs]\n", dir.join("stage").display());
    for (key, file) in [
        ("images", "images.csv"),
        ("segments", "segments.geojson"),
        ("predictions", "predictions.csv"),
        ("urban_areas", "urban_areas.geojson"),
        ("countries", "countries.geojson"),
        ("hdi", "hdi.csv"),
    ] {
        text.push_str(&format!("{key} = \"{}\"\n", fixture(file).display()));
    }
    let path = dir.join("config.toml");
    std::fs::write(&path, edit(text)).unwrap();
    path
}

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_surface-forge")).args(args).env_remove("MAPILLARY_TOKEN").output().unwrap()
}

#[test]
fn run_succeeds_with_quiet_stdout() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), |t| t);
    let out = cli(&["run", "--config", cfg.to_str().unwrap(), "--workers", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    for f in ["manifest.json", "tiles.csv", "tiles.geojson", "countries.csv", "evaluation.csv", "segments_labeled.csv"] {
        assert!(tmp.path().join("stage").join(f).is_file(), "{f} missing");
    }
}

#[test]
fn stage_dir_flag_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), |t| t);
    let other = tmp.path().join("elsewhere");
    let out = cli(&["thin", "--config", cfg.to_str().unwrap(), "--stage-dir", other.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(other.join("images_thinned.csv").is_file());
    assert!(!tmp.path().join("stage").exists());
}

#[test]
fn missing_input_is_named() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), |t| t.replace("predictions.csv", "nope.csv"));
    let out = cli(&["filter", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("nope.csv"), "{err}");
}

#[test]
fn decreasing_radii_name_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), |t| t + "\n[matching]\nradii_m = [30.0, 20.0, 10.0]\n");
    let out = cli(&["match", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("matching.radii_m"));
}

#[test]
fn unknown_key_and_missing_config_fail() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), |t| t.replace("stage_dir", "stage_directory"));
    assert_eq!(cli(&["thin", "--config", cfg.to_str().unwrap()]).status.code(), Some(1));
    let missing = tmp.path().join("absent.toml");
    let out = cli(&["thin", "--config", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.toml"));
    assert!(!cli(&["frobnicate", "--config", "x"]).status.success());
}

#[test]
fn harvest_without_token_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), |t| {
        t + "\n[harvest]\nregion = [33.7, 0.29, 33.8, 0.31]\ntiles_url = \"http://127.0.0.1:9/t/{z}/{x}/{y}\"\nimages_url = \"http://127.0.0.1:9/i\"\n"
    });
    let out = cli(&["harvest", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("MAPILLARY_TOKEN"));
}

#[test]
fn stages_rerun_individually() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = PipelineConfig::load(&write_config(tmp.path(), |t| t)).unwrap();
    let paths = StagePaths::new(&cfg.stage_dir);

    let err = cmd_aggregate(&cfg).unwrap_err().to_string();
    assert!(err.contains("matches.csv") && err.contains("surface-forge match"), "{err}");

    cmd_thin(&cfg).unwrap();
    let first = std::fs::read(paths.thinned()).unwrap();
    let again = cmd_thin(&cfg).unwrap();
    assert_eq!(std::fs::read(paths.thinned()).unwrap(), first);
    assert!(again.records_out <= again.records_in);

    surface_forge::pipeline::cmd_enrich(&cfg).unwrap();
    cmd_match(&cfg).unwrap();
    cmd_filter(&cfg).unwrap();
    cmd_aggregate(&cfg).unwrap();
    cmd_stats(&cfg).unwrap();
    let tiles = std::fs::read(paths.tiles_csv()).unwrap();
    cmd_stats(&cfg).unwrap();
    assert_eq!(std::fs::read(paths.tiles_csv()).unwrap(), tiles);
    let leftovers: Vec<_> = std::fs::read_dir(&cfg.stage_dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.contains(".tmp"))
        .collect();
    assert!(leftovers.is_empty(), "{leftovers:?}");
}
