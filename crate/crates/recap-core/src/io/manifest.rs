//! Dataset manifests: a JSON sidecar naming every image in a dataset.
//!
//! A manifest is the unit of dataset exchange — synthetic generation
//! writes one per domain, and training/evaluation read datasets back
//! exclusively through them. Paths are relative to the manifest file so a
//! dataset directory can be moved wholesale.

use std::collections::HashSet;
use std::fs;
use std::path::{Component, Path};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Label, Sample};
use crate::error::Error;
use crate::io::png::load_png;
use crate::Result;

/// One image: where it lives and what it is.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    /// Path relative to the manifest's directory; forward slashes.
    pub path: String,
    pub label: Label,
    pub domain: String,
    /// Optional capture/display device tag, carried through untouched.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub device: Option<String>,
}

/// A named, versioned list of images.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub name: String,
    pub version: u32,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    /// Parses and structurally validates manifest JSON. Filesystem checks
    /// are separate ([`Manifest::check_files`]) so parsing stays pure.
    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let manifest: Manifest = serde_json::from_slice(bytes)
            .map_err(|e| Error::Manifest(format!("parse: {e}")))?;
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serialization is infallible")
    }

    /// Structural checks: non-empty name, unique paths, and paths that
    /// stay inside the manifest's directory (relative, no `..`).
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.name.is_empty() {
            problems.push("manifest name is empty".to_string());
        }
        let mut seen = HashSet::new();
        for entry in &self.entries {
            if !seen.insert(entry.path.as_str()) {
                problems.push(format!("duplicate path {:?}", entry.path));
            }
            let p = Path::new(&entry.path);
            if p.is_absolute()
                || p.components()
                    .any(|c| matches!(c, Component::ParentDir | Component::Prefix(_)))
            {
                problems.push(format!(
                    "path {:?} must be relative and stay inside the dataset directory",
                    entry.path
                ));
            }
            if entry.domain.is_empty() {
                problems.push(format!("entry {:?} has an empty domain", entry.path));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Manifest(problems.join("; ")))
        }
    }

    /// Confirms every referenced file exists under `base`.
    pub fn check_files(&self, base: &Path) -> Result<()> {
        let missing: Vec<&str> = self
            .entries
            .iter()
            .filter(|e| !base.join(&e.path).is_file())
            .map(|e| e.path.as_str())
            .take(8)
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::Manifest(format!(
                "missing files under {}: {}",
                base.display(),
                missing.join(", ")
            )))
        }
    }
}

/// Writes a manifest next to its images.
pub fn save_manifest(manifest: &Manifest, path: &Path) -> Result<()> {
    fs::write(path, manifest.to_json()).map_err(|e| Error::io(path, e))
}

/// Reads and fully validates a manifest, including file existence.
pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let manifest = Manifest::from_json(&bytes)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    manifest.check_files(base)?;
    Ok(manifest)
}

/// Loads every image a manifest names. Sample ids are the entry paths
/// minus their extension, which the path-uniqueness invariant keeps
/// collision-free.
pub fn load_dataset(manifest_path: &Path) -> Result<Dataset> {
    let manifest = load_manifest(manifest_path)?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let samples: Vec<Sample> = manifest
        .entries
        .par_iter()
        .map(|entry| {
            let image = load_png(&base.join(&entry.path))?;
            let id = entry
                .path
                .strip_suffix(".png")
                .unwrap_or(&entry.path)
                .to_string();
            Ok(Sample { id, domain: entry.domain.clone(), label: entry.label, image })
        })
        .collect::<Result<_>>()?;
    let ds = Dataset::new(samples);
    ds.check_unique_ids()?;
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ImageTensor;
    use crate::io::png::save_png;

    fn entry(path: &str) -> ManifestEntry {
        ManifestEntry {
            path: path.to_string(),
            label: Label::Original,
            domain: "d1".to_string(),
            device: None,
        }
    }

    #[test]
    fn json_round_trip_preserves_everything() {
        let m = Manifest {
            name: "d1".to_string(),
            version: 1,
            entries: vec![
                entry("a.png"),
                ManifestEntry {
                    path: "b.png".to_string(),
                    label: Label::Recaptured,
                    domain: "d1".to_string(),
                    device: Some("oled-panel".to_string()),
                },
            ],
        };
        let back = Manifest::from_json(m.to_json().as_bytes()).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn duplicate_and_escaping_paths_are_rejected() {
        let dup = Manifest {
            name: "x".to_string(),
            version: 1,
            entries: vec![entry("a.png"), entry("a.png")],
        };
        assert!(dup.validate().unwrap_err().to_string().contains("duplicate"));

        for bad in ["../outside.png", "/etc/shadow"] {
            let m = Manifest { name: "x".to_string(), version: 1, entries: vec![entry(bad)] };
            assert!(m.validate().is_err(), "{bad} accepted");
        }
    }

    #[test]
    fn unknown_labels_fail_to_parse() {
        let json = r#"{"name":"x","version":1,"entries":[
            {"path":"a.png","label":"screenshot","domain":"d1"}]}"#;
        assert!(Manifest::from_json(json.as_bytes()).is_err());
    }

    #[test]
    fn load_checks_file_existence() {
        let dir = tempfile::tempdir().unwrap();
        let m = Manifest { name: "x".to_string(), version: 1, entries: vec![entry("a.png")] };
        let path = dir.path().join("manifest.json");
        save_manifest(&m, &path).unwrap();
        let err = load_manifest(&path).unwrap_err();
        assert!(err.to_string().contains("a.png"), "{err}");
    }

    #[test]
    fn dataset_round_trip_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let img = ImageTensor::filled(8, 8, [0.25, 0.5, 0.75]);
        save_png(&img, &dir.path().join("a.png")).unwrap();
        save_png(&img, &dir.path().join("b.png")).unwrap();
        let m = Manifest {
            name: "x".to_string(),
            version: 1,
            entries: vec![entry("a.png"), ManifestEntry {
                path: "b.png".to_string(),
                label: Label::Recaptured,
                domain: "d2".to_string(),
                device: None,
            }],
        };
        let path = dir.path().join("manifest.json");
        save_manifest(&m, &path).unwrap();
        let ds = load_dataset(&path).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.samples[0].id, "a");
        assert_eq!(ds.samples[1].domain, "d2");
        assert_eq!(ds.samples[0].image.pixel(3, 3)[1], 128.0 / 255.0);
    }
}
