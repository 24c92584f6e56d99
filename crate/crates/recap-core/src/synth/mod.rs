//! Synthetic recapture-domain generator.
//!
//! Real recapture corpora entangle capture hardware with content; here the
//! two are controlled separately. Procedural scenes supply the content,
//! and a per-domain artefact pipeline — blur, moiré banding, tone/tint,
//! sensor noise — supplies the capture style. Each scene ships both as an
//! `Original` and as its `Recaptured` counterpart, so a detector can only
//! succeed by reading artefacts, and generalization across domains means
//! generalizing across artefact styles.

mod artefacts;
mod domain;
mod scenes;

pub use artefacts::{apply_blur, apply_moire, apply_noise, apply_tone, gaussian_kernel};
pub use domain::{build_domain, dataset_hash, default_domains, recapture, DomainSpec};
pub use scenes::{generate_scene, SceneKind, SceneSpec, SCENE_KINDS};
