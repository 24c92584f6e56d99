//! Model configuration for the hierarchical windowed-attention classifier.
//!
//! The network is a four-stage pyramid: patch embedding, then per stage a
//! run of attention blocks at a fixed token resolution, with a 2×2 patch
//! merge between stages that halves the grid side and doubles the channel
//! width. Every tensor shape downstream is a pure function of this config,
//! so it is the single source of truth echoed into checkpoints and
//! validated on load.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// Number of pyramid stages; merges sit between stages, so there are three.
pub const STAGES: usize = 4;

/// Hyperparameters of the classifier. Immutable once validated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwinConfig {
    /// Input images are square, `input_size` pixels per side.
    pub input_size: usize,
    /// Patch side in pixels; stage-0 tokens are `input_size / patch_size`
    /// per side and each raw token is `patch_size² · 3` values.
    pub patch_size: usize,
    /// Stage-0 channel width; stage `s` runs at `embed_dim · 2^s`.
    pub embed_dim: usize,
    /// Attention blocks per stage. Each depth must be even so plain and
    /// shifted windowing strictly alternate within the stage.
    pub depths: [usize; 4],
    /// Attention heads per stage; must divide that stage's channel width.
    pub num_heads: [usize; 4],
    /// Window side in tokens. Stages whose grid is smaller than this clamp
    /// the window to the grid (see [`SwinConfig::window_for_stage`]).
    pub window_size: usize,
    /// Adds a learned per-head relative-position bias inside each window.
    #[serde(default)]
    pub use_attention_bias: bool,
    /// Hidden width of each block's MLP, as a multiple of the stage width.
    #[serde(default = "default_mlp_ratio")]
    pub mlp_ratio: usize,
}

fn default_mlp_ratio() -> usize {
    4
}

impl SwinConfig {
    /// The classifier separates recaptured from original images: two logits.
    pub const NUM_CLASSES: usize = 2;

    /// Small default that exercises every mechanism yet trains on a CPU in
    /// minutes: 64×64 input, 4-pixel patches, widths 32/64/128/256.
    pub fn toy() -> Self {
        SwinConfig {
            input_size: 64,
            patch_size: 4,
            embed_dim: 32,
            depths: [2, 2, 2, 2],
            num_heads: [2, 4, 8, 16],
            window_size: 4,
            use_attention_bias: false,
            mlp_ratio: 4,
        }
    }

    /// Smaller instantiation for experiment sweeps: 32×32 input, widths
    /// 16/32/64/128. Same block structure as [`SwinConfig::toy`].
    pub fn small() -> Self {
        SwinConfig {
            input_size: 32,
            patch_size: 4,
            embed_dim: 16,
            depths: [2, 2, 2, 2],
            num_heads: [2, 4, 4, 8],
            window_size: 4,
            use_attention_bias: false,
            mlp_ratio: 4,
        }
    }

    /// Token-grid side at stage `s` (0-based): `input / (patch · 2^s)`.
    pub fn stage_grid(&self, s: usize) -> usize {
        (self.input_size / self.patch_size) >> s
    }

    /// Channel width at stage `s`: `embed_dim · 2^s`.
    pub fn stage_channels(&self, s: usize) -> usize {
        self.embed_dim << s
    }

    /// Effective window side and shift at stage `s`. When the window would
    /// cover the whole grid it is clamped to the grid side and the shift
    /// drops to zero — a single window sees every token, so shifting would
    /// be a pure relabeling.
    pub fn window_for_stage(&self, s: usize) -> (usize, usize) {
        let grid = self.stage_grid(s);
        let m = self.window_size.min(grid);
        let shift = if m < grid { m / 2 } else { 0 };
        (m, shift)
    }

    /// Pooled feature width ahead of the classifier head: `embed_dim · 2³`.
    pub fn feature_dim(&self) -> usize {
        self.stage_channels(STAGES - 1)
    }

    /// Length of one flattened raw patch: `patch_size² · 3`.
    pub fn patch_dim(&self) -> usize {
        self.patch_size * self.patch_size * 3
    }

    /// Checks every structural constraint at once and reports the full list
    /// of violations, not just the first.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.input_size == 0 || self.patch_size == 0 {
            problems.push(format!(
                "input_size {} and patch_size {} must be positive",
                self.input_size, self.patch_size
            ));
        } else {
            if self.input_size % self.patch_size != 0 {
                problems.push(format!(
                    "input_size {} is not divisible by patch_size {}",
                    self.input_size, self.patch_size
                ));
            }
            let grid = self.input_size / self.patch_size;
            if grid % (1 << (STAGES - 1)) != 0 {
                problems.push(format!(
                    "token grid {grid} must be divisible by {} so every \
                     merge sees even extents",
                    1 << (STAGES - 1)
                ));
            } else if self.window_size == 0 {
                problems.push("window_size must be positive".into());
            } else {
                for s in 0..STAGES {
                    let (m, _) = self.window_for_stage(s);
                    if self.stage_grid(s) % m != 0 {
                        problems.push(format!(
                            "stage {s} grid {} is not divisible by window {m}",
                            self.stage_grid(s)
                        ));
                    }
                }
            }
        }
        if self.embed_dim == 0 {
            problems.push("embed_dim must be positive".into());
        }
        for s in 0..STAGES {
            if self.depths[s] == 0 || self.depths[s] % 2 != 0 {
                problems.push(format!(
                    "depths[{s}] = {} must be positive and even so plain and \
                     shifted blocks alternate",
                    self.depths[s]
                ));
            }
            let width = self.stage_channels(s);
            if self.num_heads[s] == 0 || width % self.num_heads[s] != 0 {
                problems.push(format!(
                    "num_heads[{s}] = {} must be positive and divide the \
                     stage width {width}",
                    self.num_heads[s]
                ));
            }
        }
        if self.mlp_ratio == 0 {
            problems.push("mlp_ratio must be positive".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config { problems })
        }
    }
}
