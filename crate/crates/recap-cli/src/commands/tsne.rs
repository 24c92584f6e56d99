//! `recap tsne` — project detector features into 2-D and plot them.
//!
//! Samples a class-balanced subset of every domain, extracts the
//! pre-logit features with a trained checkpoint, embeds them, and writes
//! the coordinates plus a scatter colored by (domain, class) — six
//! categories for the standard three domains.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;

use recap_core::data::{Dataset, Label, Sample};
use recap_core::error::Error;
use recap_core::harness::{extract_feature_matrix, silhouette, tsne_embed};
use recap_core::io::{save_csv, scatter_svg, ScatterSeries, TsneRow};
use recap_core::rng::{substream, StreamId};
use recap_core::swin::checkpoint;
use recap_core::Result;

use super::{ensure_dir, Ctx};

/// Takes `n` samples of one class from a domain, order fixed by the seed.
fn sample_class(
    ds: &Dataset,
    label: Label,
    n: usize,
    seed: u64,
    stream_index: u64,
) -> Result<Vec<Sample>> {
    let mut of_class: Vec<&Sample> = ds.samples.iter().filter(|s| s.label == label).collect();
    if of_class.len() < n {
        return Err(Error::InvalidInput(format!(
            "domain {} has {} {} samples, need {n}",
            ds.samples.first().map_or("?", |s| s.domain.as_str()),
            of_class.len(),
            label.as_str(),
        )));
    }
    of_class.shuffle(&mut substream(seed, StreamId::Embedding, stream_index));
    Ok(of_class.into_iter().take(n).cloned().collect())
}

pub fn run(
    ctx: &Ctx,
    per_domain: usize,
    perplexity: f64,
    iters: usize,
    checkpoint_path: Option<&Path>,
) -> Result<()> {
    if per_domain == 0 {
        return Err(Error::InvalidInput("--per-domain must be positive".to_string()));
    }
    let model = ctx.config.resolved_model();
    let default_path = ctx.checkpoint_path("inter-all");
    let path = checkpoint_path.unwrap_or(&default_path);
    let (params, _meta) = checkpoint::load(path, Some(&model))?;

    let domains = ctx.load_domains()?;
    // Class-balanced sample per domain; odd counts give originals the
    // extra slot. Stream indices are offset so they can never collide
    // with the embedding's own init stream (index 0).
    let mut picked: Vec<Sample> = Vec::new();
    for (i, ds) in domains.values().enumerate() {
        let n_orig = per_domain.div_ceil(2);
        let base = 1 + 2 * i as u64;
        picked.extend(sample_class(ds, Label::Original, n_orig, ctx.config.seed, base)?);
        picked.extend(sample_class(
            ds,
            Label::Recaptured,
            per_domain - n_orig,
            ctx.config.seed,
            base + 1,
        )?);
    }
    let sampled = Dataset::new(picked);

    let mut aug = ctx.config.augmentation.clone();
    aug.seed = ctx.config.seed;
    let features = extract_feature_matrix(&params, &sampled, &aug)?;
    let result = tsne_embed(&features, perplexity, iters, ctx.config.seed)?;

    let rows: Vec<TsneRow> = sampled
        .samples
        .iter()
        .zip(&result.points)
        .map(|(s, p)| TsneRow {
            id: s.id.clone(),
            domain: s.domain.clone(),
            label: s.label,
            x: p[0],
            y: p[1],
        })
        .collect();

    // One series per (domain, class) in a fixed order: the six categories
    // of the standard three-domain setup.
    let mut series: Vec<ScatterSeries> = Vec::new();
    for domain in domains.keys() {
        for label in [Label::Original, Label::Recaptured] {
            let points: Vec<[f64; 2]> = rows
                .iter()
                .filter(|r| &r.domain == domain && r.label == label)
                .map(|r| [r.x, r.y])
                .collect();
            series.push(ScatterSeries {
                label: format!("{domain} {}", label.as_str()),
                points,
            });
        }
    }

    let domain_index: BTreeMap<&String, usize> =
        domains.keys().enumerate().map(|(i, d)| (d, i)).collect();
    let groups: Vec<usize> =
        sampled.samples.iter().map(|s| domain_index[&s.domain]).collect();
    let sil = silhouette(&result.points, &groups)?;

    ensure_dir(&ctx.out)?;
    let csv_path = ctx.out.join("tsne-points.csv");
    save_csv(&rows, &csv_path)?;
    let svg_path = ctx.out.join("tsne.svg");
    std::fs::write(&svg_path, scatter_svg("feature embedding", &series))
        .map_err(|e| Error::io(&svg_path, e))?;

    println!(
        "embedded {} points: KL {:.4} -> {:.4}, domain silhouette {:.4}",
        rows.len(),
        result.kl_initial,
        result.kl_final,
        sil,
    );
    println!("coordinates -> {} plot -> {}", csv_path.display(), svg_path.display());
    Ok(())
}
