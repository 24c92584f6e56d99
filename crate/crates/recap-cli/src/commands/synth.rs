//! `recap synth` — materialize the synthetic domains on disk.
//!
//! Each domain becomes a directory of PNGs plus a manifest. A fingerprint
//! of the generating parameters guards reuse: when it matches, existing
//! datasets are kept as-is; when it differs (or is missing), everything is
//! regenerated. `hashes.txt` records the SHA-256 of every PNG's file bytes
//! so reruns can be compared without loading a single image.

use std::fs;

use sha2::{Digest, Sha256};

use recap_core::data::Label;
use recap_core::error::Error;
use recap_core::io::{save_manifest, save_png, Manifest, ManifestEntry};
use recap_core::synth::build_domain;
use recap_core::Result;

use super::{ensure_dir, Ctx};

fn hex(digest: &[u8]) -> String {
    let mut out = String::with_capacity(2 * digest.len());
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Hash of everything that determines dataset content.
fn fingerprint(ctx: &Ctx) -> String {
    let key = serde_json::to_vec(&(
        &ctx.config.domains,
        ctx.config.pairs_per_domain,
        ctx.config.training.input_size,
    ))
    .expect("fingerprint serialization is infallible");
    hex(&Sha256::digest(&key))
}

/// Ensures the configured synthetic datasets exist on disk and match the
/// config. Returns true when datasets had to be (re)generated.
pub fn materialize(ctx: &Ctx) -> Result<bool> {
    if !ctx.config.manifests.is_empty() {
        return Err(Error::InvalidInput(
            "config lists external manifests; there is nothing to synthesize".to_string(),
        ));
    }
    let root = ctx.datasets_dir();
    let fp_path = root.join("fingerprint.txt");
    let want = fingerprint(ctx);
    if let Ok(have) = fs::read_to_string(&fp_path) {
        if have.trim() == want {
            return Ok(false);
        }
    }
    if root.exists() {
        // Stale or foreign contents would silently poison later stages.
        fs::remove_dir_all(&root).map_err(|e| Error::io(&root, e))?;
    }
    ensure_dir(&root)?;

    let size = ctx.config.training.input_size;
    let mut hash_lines: Vec<String> = Vec::new();
    for spec in &ctx.config.domains {
        let dir = root.join(&spec.domain_id);
        ensure_dir(&dir)?;
        let ds = build_domain(spec, ctx.config.pairs_per_domain, size)?;
        let mut entries = Vec::with_capacity(ds.len());
        for sample in &ds.samples {
            let file = format!("{}.png", sample.id);
            let path = dir.join(&file);
            save_png(&sample.image, &path)?;
            let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
            hash_lines.push(format!(
                "{}  {}/{}",
                hex(&Sha256::digest(&bytes)),
                spec.domain_id,
                file
            ));
            entries.push(ManifestEntry {
                path: file,
                label: sample.label,
                domain: sample.domain.clone(),
                device: None,
            });
        }
        let manifest = Manifest { name: spec.domain_id.clone(), version: 1, entries };
        save_manifest(&manifest, &dir.join("manifest.json"))?;
    }
    hash_lines.sort();
    let hashes_path = root.join("hashes.txt");
    fs::write(&hashes_path, hash_lines.join("\n") + "\n")
        .map_err(|e| Error::io(&hashes_path, e))?;
    // The fingerprint lands last, so a crash mid-write never leaves a
    // directory that claims to be complete.
    fs::write(&fp_path, &want).map_err(|e| Error::io(&fp_path, e))?;
    Ok(true)
}

pub fn run(ctx: &Ctx) -> Result<()> {
    let generated = materialize(ctx)?;
    let root = ctx.datasets_dir();
    for spec in &ctx.config.domains {
        let manifest = recap_core::io::load_manifest(&root.join(&spec.domain_id).join("manifest.json"))?;
        let originals = manifest.entries.iter().filter(|e| e.label == Label::Original).count();
        println!(
            "{}: {} images ({} original / {} recaptured) -> {}",
            spec.domain_id,
            manifest.entries.len(),
            originals,
            manifest.entries.len() - originals,
            root.join(&spec.domain_id).display(),
        );
    }
    println!(
        "{} hashes -> {}",
        if generated { "generated" } else { "unchanged" },
        root.join("hashes.txt").display(),
    );
    Ok(())
}
