//! `recap eval` — score trained checkpoints on their protocol test sets.
//!
//! Rebuilds each protocol's splits from the run seed (the split machinery
//! is deterministic, so the test pool is exactly the one training held
//! out), evaluates the stored weights, and emits the metrics table, the
//! per-protocol ROC points, and one combined ROC plot. Everything is
//! computed before anything is written.

use std::collections::BTreeMap;

use recap_core::data::Dataset;
use recap_core::harness::{evaluate, protocol_splits, ExperimentProtocol, MetricsReport};
use recap_core::io::{roc_rows, roc_svg, save_csv, MetricsRow, RocCurve};
use recap_core::swin::checkpoint;
use recap_core::Result;

use super::{ensure_dir, Ctx};

/// Evaluates the given protocols' checkpoints and writes all reports.
/// Shared between `eval` and `train --resume`.
pub fn evaluate_and_write(
    ctx: &Ctx,
    domains: &BTreeMap<String, Dataset>,
    protocols: &[ExperimentProtocol],
) -> Result<()> {
    let model = ctx.config.resolved_model();
    let mut aug = ctx.config.augmentation.clone();
    aug.seed = ctx.config.seed;

    let mut reports: Vec<(&ExperimentProtocol, MetricsReport)> = Vec::new();
    for protocol in protocols {
        let (params, _meta) = checkpoint::load(ctx.checkpoint_path(&protocol.name), Some(&model))?;
        let (_, _, test_pool) = protocol_splits(protocol, domains, ctx.config.seed)?;
        let report = evaluate(&params, &test_pool, &aug)?;
        reports.push((protocol, report));
    }

    let metrics: Vec<MetricsRow> = reports
        .iter()
        .map(|(p, r)| {
            MetricsRow::from_report(&p.name, p.kind.as_str(), &p.train_domains, &p.test_domains, r)
        })
        .collect();
    let curves: Vec<RocCurve> = reports
        .iter()
        .map(|(p, r)| RocCurve { label: p.name.clone(), points: r.roc.clone(), auc: r.auc })
        .collect();

    ensure_dir(&ctx.out)?;
    ensure_dir(&ctx.out.join("roc"))?;
    save_csv(&metrics, &ctx.out.join("metrics.csv"))?;
    for (p, r) in &reports {
        save_csv(&roc_rows(&p.name, r), &ctx.out.join("roc").join(format!("{}.csv", p.name)))?;
    }
    let svg_path = ctx.out.join("roc.svg");
    std::fs::write(&svg_path, roc_svg(&curves))
        .map_err(|e| recap_core::Error::io(&svg_path, e))?;

    for (p, r) in &reports {
        let auc = r.auc.map_or("n/a".to_string(), |a| format!("{a:.4}"));
        println!(
            "{}: AUC = {auc} (accuracy {:.4}, f1 {:.4}, {} samples)",
            p.name,
            r.accuracy,
            r.f1,
            r.tp + r.fp + r.tn + r.fn_,
        );
    }
    println!("reports -> {} and {}", ctx.out.join("metrics.csv").display(), svg_path.display());
    Ok(())
}

pub fn run(ctx: &Ctx) -> Result<()> {
    let domains = ctx.load_domains()?;
    let ids = ctx.domain_ids(&domains);
    let protocols = ctx.protocols(&ids)?;
    evaluate_and_write(ctx, &domains, &protocols)
}
