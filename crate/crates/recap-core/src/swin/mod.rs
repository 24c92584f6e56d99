//! The hierarchical shifted-window attention classifier.
//!
//! Images are split into non-overlapping patches, linearly embedded, and
//! refined through four stages of windowed multi-head self-attention.
//! Within a stage, blocks alternate between plain windows and windows
//! shifted by half a side — the shifted pass lets information cross window
//! borders while a seam mask keeps tokens that were never spatial
//! neighbors from attending to each other. Between stages a 2×2 patch
//! merge halves the grid and doubles the width, building a feature pyramid
//! that ends in global average pooling and a two-class head.

pub mod checkpoint;
pub mod config;
pub mod model;
pub mod params;
pub mod windows;

pub use checkpoint::CheckpointMeta;
pub use config::{SwinConfig, STAGES};
pub use model::{ForwardGraph, SwinNet};
pub use params::{param_count, SwinParams};
