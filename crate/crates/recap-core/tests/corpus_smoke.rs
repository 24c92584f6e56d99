//! Runs every checked-in fuzz corpus seed through its parser.
//!
//! The fuzz targets themselves need a sanitizer toolchain; this test keeps
//! the corpus honest under plain `cargo test`: no seed may panic its
//! parser, and each target's corpus must contain at least one seed that
//! parses successfully, so the happy path stays covered as formats evolve.

use std::fs;
use std::path::PathBuf;

use recap_core::config::ExperimentConfig;
use recap_core::io::{read_csv, CurveRow, Manifest, MetricsRow, RocRow, TsneRow};
use recap_core::swin::checkpoint;

fn corpus(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut seeds: Vec<(String, Vec<u8>)> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("corpus dir {}: {e}", dir.display()))
        .map(|entry| {
            let path = entry.unwrap().path();
            (path.file_name().unwrap().to_string_lossy().to_string(), fs::read(&path).unwrap())
        })
        .collect();
    seeds.sort();
    assert!(!seeds.is_empty(), "empty corpus for {target}");
    seeds
}

#[test]
fn config_seeds_parse_or_error_cleanly() {
    let mut ok = 0;
    for (name, bytes) in corpus("config_parse") {
        let Ok(text) = std::str::from_utf8(&bytes) else { continue };
        if let Ok(config) = ExperimentConfig::from_toml(text) {
            ok += 1;
            assert_eq!(
                config,
                ExperimentConfig::from_toml(&config.to_toml()).unwrap(),
                "{name} does not round-trip"
            );
        }
    }
    assert!(ok >= 2, "corpus should include valid configs, got {ok}");
}

#[test]
fn manifest_seeds_parse_or_error_cleanly() {
    let mut ok = 0;
    for (name, bytes) in corpus("manifest_parse") {
        if let Ok(manifest) = Manifest::from_json(&bytes) {
            ok += 1;
            assert_eq!(
                manifest,
                Manifest::from_json(manifest.to_json().as_bytes()).unwrap(),
                "{name} does not round-trip"
            );
        }
    }
    assert!(ok >= 1, "corpus should include a valid manifest");
}

#[test]
fn checkpoint_seeds_decode_or_error_cleanly() {
    let mut ok = 0;
    for (_, bytes) in corpus("checkpoint_decode") {
        if let Ok((params, meta)) = checkpoint::decode(&bytes) {
            ok += 1;
            let bytes2 = checkpoint::encode(&params, meta);
            let (params2, _) = checkpoint::decode(&bytes2).unwrap();
            assert_eq!(params.config(), params2.config());
        }
    }
    assert_eq!(ok, 1, "exactly the tiny checkpoint seed should decode");
}

#[test]
fn csv_seeds_never_panic_any_row_reader() {
    let mut ok = 0;
    for (_, bytes) in corpus("metrics_csv") {
        ok += usize::from(read_csv::<MetricsRow, _>(bytes.as_slice()).is_ok());
        let _ = read_csv::<RocRow, _>(bytes.as_slice());
        let _ = read_csv::<CurveRow, _>(bytes.as_slice());
        let _ = read_csv::<TsneRow, _>(bytes.as_slice());
    }
    assert!(ok >= 1, "corpus should include a readable metrics table");
}
