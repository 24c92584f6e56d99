//! `recap baseline` — classical features + a linear model, same protocols.
//!
//! Extracts the chosen descriptor for every image once, fits the linear
//! classifier on each protocol's fitted pool (train + val), and scores its
//! test pool. The report schema is identical to the transformer's so the
//! two tables diff column-for-column; margins pass through a sigmoid so
//! the fixed 0.5 score threshold coincides with the margin sign.

use std::collections::HashMap;

use recap_core::baselines::{
    extract_all, predict_linear, train_linear, Extractor, FeatureVector, LinearHyper,
};
use recap_core::data::{Dataset, Label};
use recap_core::harness::{compute_metrics, protocol_splits, MetricsReport};
use recap_core::io::{save_csv, save_feature_csv, MetricsRow};
use recap_core::Result;

use super::{ensure_dir, Ctx};

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Fits on the pool and scores the test set; both stay in dataset order.
fn fit_and_score(
    features: &HashMap<&str, &FeatureVector>,
    pool: &Dataset,
    test: &Dataset,
    seed: u64,
) -> Result<MetricsReport> {
    let fit_features: Vec<FeatureVector> =
        pool.samples.iter().map(|s| features[s.id.as_str()].clone()).collect();
    let fit_labels: Vec<Label> = pool.samples.iter().map(|s| s.label).collect();
    let model = train_linear(&fit_features, &fit_labels, LinearHyper { seed, ..LinearHyper::default() })?;
    let mut scores = Vec::with_capacity(test.len());
    let mut labels = Vec::with_capacity(test.len());
    for s in &test.samples {
        scores.push(sigmoid(predict_linear(&model, features[s.id.as_str()])?));
        labels.push(s.label);
    }
    compute_metrics(&scores, &labels)
}

pub fn run(ctx: &Ctx, extractor: Extractor) -> Result<()> {
    let domains = ctx.load_domains()?;
    let ids = ctx.domain_ids(&domains);
    let protocols = ctx.protocols(&ids)?;

    // One extraction pass over everything; protocols reuse it by id.
    let all: Vec<&Dataset> = domains.values().collect();
    let pooled = Dataset::concat(&all);
    let vectors = extract_all(&pooled, extractor)?;
    let by_id: HashMap<&str, &FeatureVector> =
        vectors.iter().map(|fv| (fv.sample_id.as_str(), fv)).collect();

    let mut rows: Vec<MetricsRow> = Vec::new();
    let mut lines: Vec<String> = Vec::new();
    for protocol in &protocols {
        let (train_split, val_split, test_pool) =
            protocol_splits(protocol, &domains, ctx.config.seed)?;
        let fitted = Dataset::concat(&[&train_split, &val_split]);
        let report = fit_and_score(&by_id, &fitted, &test_pool, ctx.config.seed)?;
        let auc = report.auc.map_or("n/a".to_string(), |a| format!("{a:.4}"));
        lines.push(format!(
            "{}: AUC = {auc} (accuracy {:.4}, {} samples)",
            protocol.name,
            report.accuracy,
            report.tp + report.fp + report.tn + report.fn_,
        ));
        rows.push(MetricsRow::from_report(
            &protocol.name,
            protocol.kind.as_str(),
            &protocol.train_domains,
            &protocol.test_domains,
            &report,
        ));
    }

    ensure_dir(&ctx.out)?;
    let name = extractor.name();
    save_csv(&rows, &ctx.out.join(format!("baseline-{name}-metrics.csv")))?;
    let ids_col: Vec<String> = pooled.samples.iter().map(|s| s.id.clone()).collect();
    let domains_col: Vec<String> = pooled.samples.iter().map(|s| s.domain.clone()).collect();
    let labels_col: Vec<Label> = pooled.samples.iter().map(|s| s.label).collect();
    let values: Vec<Vec<f64>> = vectors.into_iter().map(|fv| fv.values).collect();
    save_feature_csv(
        &ids_col,
        &domains_col,
        &labels_col,
        &values,
        &ctx.out.join(format!("baseline-{name}-features.csv")),
    )?;

    for line in &lines {
        println!("{line}");
    }
    println!(
        "baseline {name} ({} dims) -> {}",
        extractor.dim(),
        ctx.out.join(format!("baseline-{name}-metrics.csv")).display(),
    );
    Ok(())
}
