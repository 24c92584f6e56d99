//! `recap train` — run the training loop for every selected protocol.
//!
//! Each protocol gets its own checkpoint and epoch-curve CSV under the
//! output directory. `--resume` skips training when the stored checkpoint
//! already covers the requested epochs and goes straight to evaluation,
//! which must reproduce the metrics of the original run exactly.

use recap_core::error::Error;
use recap_core::harness::run_protocol;
use recap_core::io::{save_csv, CurveRow};
use recap_core::swin::checkpoint::{self, CheckpointMeta};
use recap_core::Result;

use super::{ensure_dir, eval, Ctx};

pub fn run(ctx: &Ctx, resume: bool) -> Result<()> {
    let domains = ctx.load_domains()?;
    let ids = ctx.domain_ids(&domains);
    let protocols = ctx.protocols(&ids)?;
    let model = ctx.config.resolved_model();

    if resume {
        // Nothing left to train: verify coverage, then re-evaluate.
        for protocol in &protocols {
            let path = ctx.checkpoint_path(&protocol.name);
            let (_, meta) = checkpoint::load(&path, Some(&model))?;
            if meta.epoch < ctx.config.training.epochs {
                return Err(Error::InvalidInput(format!(
                    "checkpoint {} covers {} of {} epochs; mid-run resume is not \
                     supported — rerun training or lower --epochs",
                    path.display(),
                    meta.epoch,
                    ctx.config.training.epochs
                )));
            }
        }
        return eval::evaluate_and_write(ctx, &domains, &protocols);
    }

    ensure_dir(&ctx.out.join("checkpoints"))?;
    ensure_dir(&ctx.out.join("curves"))?;
    for protocol in &protocols {
        let outcome = run_protocol(
            protocol,
            &domains,
            &model,
            &ctx.config.training,
            &ctx.config.augmentation,
            &ctx.config.adversarial,
            ctx.config.seed,
        )?;
        for s in &outcome.train_run.stats {
            println!(
                "{}: epoch {}/{} train loss {:.4} acc {:.3} | val loss {:.4} acc {:.3}",
                protocol.name,
                s.epoch,
                ctx.config.training.epochs,
                s.train_loss,
                s.train_acc,
                s.val_loss,
                s.val_acc,
            );
        }
        let ckpt_path = ctx.checkpoint_path(&protocol.name);
        checkpoint::save(
            &ckpt_path,
            &outcome.params,
            CheckpointMeta { epoch: ctx.config.training.epochs, seed: ctx.config.seed },
        )?;
        let curves: Vec<CurveRow> = outcome
            .train_run
            .stats
            .iter()
            .map(|s| CurveRow {
                protocol: protocol.name.clone(),
                epoch: s.epoch,
                train_loss: s.train_loss,
                train_acc: s.train_acc,
                val_loss: s.val_loss,
                val_acc: s.val_acc,
            })
            .collect();
        save_csv(&curves, &ctx.out.join("curves").join(format!("{}.csv", protocol.name)))?;
        let auc = outcome
            .metrics
            .auc
            .map_or("n/a".to_string(), |a| format!("{a:.4}"));
        println!(
            "{}: done in {:.1}s -> {} (test AUC {auc})",
            protocol.name,
            outcome.train_run.wall_secs,
            ckpt_path.display(),
        );
    }
    Ok(())
}
