//! Detection of recaptured screen images and the machinery needed to study
//! how well detectors generalize across capture setups.
//!
//! The crate is organized bottom-up:
//!
//! * [`tensor`] — a small reverse-mode autodiff engine on a tape, plus Adam.
//! * [`swin`] — a hierarchical windowed-attention image classifier built on
//!   the tape, with shifted-window masking, patch merging, and checkpoints.
//! * [`augment`] — normalization, flips, CutOut, and CutMix with exact
//!   pixel-area label accounting.
//! * [`synth`] — procedural scene generation and a parametric screen-recapture
//!   artefact pipeline (blur, moiré, tone/tint, sensor noise) used to build
//!   labeled domains with controllable shift.
//! * [`baselines`] — classical forensic features (uniform LBP histograms,
//!   noise-residual correlation features) and a linear max-margin classifier.
//! * [`harness`] — stratified splits, train/eval protocols (intra-domain,
//!   inter-domain, leave-one-domain-out), metrics with ROC/AUC, an exact
//!   t-SNE embedding, and the training loop.
//! * [`io`] — dataset manifests, PNG round-trips, CSV emission, SVG plots.
//! * [`config`] — the experiment configuration document shared by the CLI.
//!
//! Everything is deterministic given a seed: parallelism only ever maps over
//! independent samples and reduces in a fixed order, so results do not depend
//! on worker count.

pub mod augment;
pub mod baselines;
pub mod config;
pub mod data;
pub mod error;
pub mod harness;
pub mod io;
pub mod rng;
pub mod swin;
pub mod synth;
pub mod tensor;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Builds the global rayon pool honoring the `RECAP_THREADS` cap.
///
/// Call once at process start; later calls are no-ops (the pool can only be
/// initialized once). Results never depend on the worker count, only wall
/// time does.
pub fn init_thread_pool(cap: Option<usize>) {
    let cap = cap.or_else(|| {
        std::env::var("RECAP_THREADS")
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
    });
    if let Some(n) = cap {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
}
