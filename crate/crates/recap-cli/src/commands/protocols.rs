//! `recap protocols` — print the evaluation table: which rows will run,
//! what each trains on, and what each is scored against.

use recap_core::io::load_manifest;
use recap_core::Result;

use super::Ctx;

pub fn run(ctx: &Ctx) -> Result<()> {
    // Domain ids without loading any pixels: config order for synthetic
    // domains, sorted manifest tags otherwise.
    let ids: Vec<String> = if ctx.config.manifests.is_empty() {
        ctx.config.domain_ids()
    } else {
        let mut ids: Vec<String> = Vec::new();
        for rel in &ctx.config.manifests {
            let manifest = load_manifest(&ctx.resolve_path(rel))?;
            for entry in &manifest.entries {
                if !ids.contains(&entry.domain) {
                    ids.push(entry.domain.clone());
                }
            }
        }
        ids.sort();
        ids
    };
    let rows = ctx.protocols(&ids)?;
    println!("{:<24} {:<6} {:<14} {}", "name", "kind", "train", "test");
    for p in &rows {
        println!(
            "{:<24} {:<6} {:<14} {}",
            p.name,
            p.kind.as_str(),
            p.train_domains.join("+"),
            p.test_domains.join("+"),
        );
    }
    Ok(())
}
