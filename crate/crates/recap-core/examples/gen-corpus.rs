//! Regenerates the checked-in fuzz corpus seeds.
//!
//! Each seed is a small, representative input for one fuzz target: valid
//! documents exercising the happy path plus a few that fail in
//! characteristic ways. Run from the repository root after changing any
//! format:
//!
//! ```text
//! cargo run -p recap-core --example gen-corpus -- fuzz/corpus
//! ```

use std::fs;
use std::path::Path;

use recap_core::config::ExperimentConfig;
use recap_core::data::Label;
use recap_core::harness::{compute_metrics, MetricsReport};
use recap_core::io::{
    roc_rows, write_csv, CurveRow, Manifest, ManifestEntry, MetricsRow, TsneRow,
};
use recap_core::swin::checkpoint::{encode, CheckpointMeta};
use recap_core::swin::{SwinConfig, SwinParams};

fn write(dir: &Path, name: &str, bytes: &[u8]) {
    fs::create_dir_all(dir).expect("corpus dir");
    fs::write(dir.join(name), bytes).expect("seed file");
    println!("{} ({} bytes)", dir.join(name).display(), bytes.len());
}

fn sample_report() -> MetricsReport {
    let scores = [0.9, 0.7, 0.4, 0.2];
    let labels = [Label::Recaptured, Label::Original, Label::Recaptured, Label::Original];
    compute_metrics(&scores, &labels).expect("sample metrics")
}

fn main() {
    let root = std::env::args().nth(1).unwrap_or_else(|| "fuzz/corpus".to_string());
    let root = Path::new(&root);

    let dir = root.join("config_parse");
    write(&dir, "default.toml", ExperimentConfig::default().to_toml().as_bytes());
    let mut tweaked = ExperimentConfig::default();
    tweaked.protocols = vec!["cross".to_string()];
    tweaked.adversarial.enabled = true;
    tweaked.adversarial.lambda_adv = 0.1;
    tweaked.manifests = vec!["data/real.json".to_string()];
    write(&dir, "tweaked.toml", tweaked.to_toml().as_bytes());
    write(&dir, "empty.toml", b"");
    write(&dir, "bad-key.toml", b"uknown_key = 1\n[training]\nepochs = 3\n");

    let dir = root.join("manifest_parse");
    let manifest = Manifest {
        name: "d1".to_string(),
        version: 1,
        entries: vec![
            ManifestEntry {
                path: "a.png".to_string(),
                label: Label::Original,
                domain: "d1".to_string(),
                device: None,
            },
            ManifestEntry {
                path: "b.png".to_string(),
                label: Label::Recaptured,
                domain: "d1".to_string(),
                device: Some("oled-panel".to_string()),
            },
        ],
    };
    write(&dir, "basic.json", manifest.to_json().as_bytes());
    write(&dir, "empty.json", b"{}");
    let mut dup = manifest.clone();
    dup.entries[1].path = "a.png".to_string();
    write(&dir, "dup-path.json", dup.to_json().as_bytes());

    let dir = root.join("checkpoint_decode");
    // Smallest valid model so the seed stays a few kilobytes.
    let config = SwinConfig {
        input_size: 32,
        patch_size: 4,
        embed_dim: 1,
        depths: [2, 2, 2, 2],
        num_heads: [1, 1, 1, 1],
        window_size: 4,
        ..SwinConfig::toy()
    };
    let params = SwinParams::<f32>::init(&config, 1).expect("tiny params");
    let bytes = encode(&params, CheckpointMeta { epoch: 1, seed: 1 });
    write(&dir, "tiny.ckpt", &bytes);
    write(&dir, "truncated.ckpt", &bytes[..64.min(bytes.len())]);
    write(&dir, "bad-magic.ckpt", b"NOTACKPT rest of the file");

    let dir = root.join("metrics_csv");
    let report = sample_report();
    let rows = vec![
        MetricsRow::from_report(
            "cross-d1+d2-to-d3",
            "cross",
            &["d1".to_string(), "d2".to_string()],
            &["d3".to_string()],
            &report,
        ),
        MetricsRow { auc: None, ..MetricsRow::from_report("intra-d1", "intra", &[], &[], &report) },
    ];
    let mut buf = Vec::new();
    write_csv(&rows, &mut buf).expect("metrics csv");
    write(&dir, "metrics.csv", &buf);
    let mut buf = Vec::new();
    write_csv(&roc_rows("intra-d1", &report), &mut buf).expect("roc csv");
    write(&dir, "roc.csv", &buf);
    let mut buf = Vec::new();
    write_csv(
        &[CurveRow {
            protocol: "inter-all".to_string(),
            epoch: 1,
            train_loss: 0.69,
            train_acc: 0.5,
            val_loss: 0.7,
            val_acc: 0.5,
        }],
        &mut buf,
    )
    .expect("curve csv");
    write(&dir, "curves.csv", &buf);
    let mut buf = Vec::new();
    write_csv(
        &[TsneRow {
            id: "d1-00000-orig".to_string(),
            domain: "d1".to_string(),
            label: Label::Original,
            x: -1.5,
            y: 2.25,
        }],
        &mut buf,
    )
    .expect("tsne csv");
    write(&dir, "tsne.csv", &buf);
    write(&dir, "garbage.csv", b"a,b\n1,\"unterminated");
}
