//! Training-set augmentation: normalization, horizontal flips, CutOut
//! holes, and CutMix splices.
//!
//! Every operation is a pure function of (input, rng state), and the
//! [`Augmentor`] derives one RNG substream per (epoch, sample) pair, so an
//! augmented stream is reproducible regardless of how work is scheduled
//! across threads. Geometry is exact: CutMix label weights come from
//! counting the integer pixels actually pasted, never from the λ draw
//! alone.

use rand::Rng;
use rand_distr::{Beta, Distribution};

use crate::data::{ImageTensor, Label, Sample};
use crate::error::Error;
use crate::rng::{substream, StreamId};
use crate::Result;

/// Augmentation settings; part of the experiment config file.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugConfig {
    /// Per-channel mean subtracted by [`normalize`].
    #[serde(default = "default_mean")]
    pub normalize_mean: [f32; 3],
    /// Per-channel divisor; strictly positive.
    #[serde(default = "default_std")]
    pub normalize_std: [f32; 3],
    /// Side of the CutOut square as a fraction of the shorter image side.
    #[serde(default = "default_cutout")]
    pub cutout_fraction: f32,
    /// Beta-distribution parameter for the CutMix mixing draw.
    #[serde(default = "default_beta")]
    pub cutmix_beta: f32,
    /// Probability of mirroring a training image left-to-right.
    #[serde(default = "default_flip")]
    pub horizontal_flip_prob: f32,
    /// Apply the full augmentation stack to evaluation data too. Off by
    /// default: evaluation normally sees only normalization.
    #[serde(default)]
    pub augment_eval: bool,
    /// Base seed for the augmentation stream; the harness overwrites this
    /// with the run seed.
    #[serde(default)]
    pub seed: u64,
}

fn default_mean() -> [f32; 3] {
    [0.485, 0.456, 0.406]
}
fn default_std() -> [f32; 3] {
    [0.229, 0.224, 0.225]
}
fn default_cutout() -> f32 {
    0.25
}
fn default_beta() -> f32 {
    1.0
}
fn default_flip() -> f32 {
    0.5
}

impl Default for AugConfig {
    fn default() -> Self {
        AugConfig {
            normalize_mean: default_mean(),
            normalize_std: default_std(),
            cutout_fraction: default_cutout(),
            cutmix_beta: default_beta(),
            horizontal_flip_prob: default_flip(),
            augment_eval: false,
            seed: 0,
        }
    }
}

impl AugConfig {
    /// Checks ranges, reporting every violation at once.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.normalize_std.iter().any(|&s| !(s > 0.0)) {
            problems.push(format!(
                "normalize_std {:?} must be strictly positive",
                self.normalize_std
            ));
        }
        if self.normalize_mean.iter().any(|m| !m.is_finite()) {
            problems.push(format!(
                "normalize_mean {:?} must be finite",
                self.normalize_mean
            ));
        }
        for (name, v) in [
            ("cutout_fraction", self.cutout_fraction),
            ("horizontal_flip_prob", self.horizontal_flip_prob),
        ] {
            if !(0.0..=1.0).contains(&v) {
                problems.push(format!("{name} = {v} outside [0, 1]"));
            }
        }
        if !(self.cutmix_beta > 0.0) || !self.cutmix_beta.is_finite() {
            problems.push(format!(
                "cutmix_beta = {} must be a positive real",
                self.cutmix_beta
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config { problems })
        }
    }
}

/// Per-channel `(x − mean) / std`. Output pixels leave the [0, 1] storage
/// range by design; this is the final step before the network.
pub fn normalize(img: &ImageTensor, mean: [f32; 3], std: [f32; 3]) -> ImageTensor {
    let mut out = img.clone();
    for px in out.data.chunks_exact_mut(3) {
        for ch in 0..3 {
            px[ch] = (px[ch] - mean[ch]) / std[ch];
        }
    }
    out
}

/// Inverse of [`normalize`]: per-channel `x · std + mean`.
pub fn denormalize(img: &ImageTensor, mean: [f32; 3], std: [f32; 3]) -> ImageTensor {
    let mut out = img.clone();
    for px in out.data.chunks_exact_mut(3) {
        for ch in 0..3 {
            px[ch] = px[ch] * std[ch] + mean[ch];
        }
    }
    out
}

/// Horizontal mirror with probability `p`.
pub fn random_flip(img: &ImageTensor, p: f32, rng: &mut impl Rng) -> ImageTensor {
    debug_assert!((0.0..=1.0).contains(&p));
    if p > 0.0 && rng.random_bool(p as f64) {
        mirror(img)
    } else {
        img.clone()
    }
}

/// Unconditional left-right mirror.
pub fn mirror(img: &ImageTensor) -> ImageTensor {
    let mut out = img.clone();
    for r in 0..img.h {
        for c in 0..img.w {
            out.set_pixel(r, c, img.pixel(r, img.w - 1 - c));
        }
    }
    out
}

/// Blanks one square of side `fraction · min(H, W)` to `fill`. The square
/// is placed uniformly over the positions where it fits entirely inside
/// the image, so `fraction = 1` blanks everything.
pub fn cutout(
    img: &ImageTensor,
    fraction: f32,
    fill: [f32; 3],
    rng: &mut impl Rng,
) -> ImageTensor {
    debug_assert!((0.0..=1.0).contains(&fraction));
    let side = (fraction as f64 * img.h.min(img.w) as f64).round() as usize;
    let mut out = img.clone();
    if side == 0 {
        // Still consume the placement draws so the downstream stream
        // does not depend on the fraction.
        let _ = (rng.random_range(0..img.h), rng.random_range(0..img.w));
        return out;
    }
    let r0 = rng.random_range(0..=img.h - side);
    let c0 = rng.random_range(0..=img.w - side);
    for r in r0..r0 + side {
        for c in c0..c0 + side {
            out.set_pixel(r, c, fill);
        }
    }
    out
}

/// CutMix with an explicit mixing draw: pastes a rectangle of target area
/// `(1 − λ) · H · W` (aspect matched to the image) from `b` into `a`,
/// placed uniformly over the positions where it fits, and returns the
/// image with the *measured* weight of `a`,
/// `λ_eff = 1 − pasted_pixels / (H · W)` — exact integer accounting, so
/// λ_eff differs from λ only by pixel rounding.
pub fn cutmix_with_lambda(
    a: &ImageTensor,
    b: &ImageTensor,
    lambda: f64,
    rng: &mut impl Rng,
) -> Result<(ImageTensor, f32)> {
    if a.h != b.h || a.w != b.w {
        return Err(Error::shape("cutmix inputs", &[a.h, a.w], &[b.h, b.w]));
    }
    // Aspect-matched rectangle: both sides scale by √(1−λ).
    let scale = (1.0 - lambda).max(0.0).sqrt();
    let rh = ((a.h as f64 * scale).round() as usize).min(a.h);
    let rw = ((a.w as f64 * scale).round() as usize).min(a.w);
    let mut out = a.clone();
    if rh > 0 && rw > 0 {
        let r0 = rng.random_range(0..=a.h - rh);
        let c0 = rng.random_range(0..=a.w - rw);
        for r in r0..r0 + rh {
            for c in c0..c0 + rw {
                out.set_pixel(r, c, b.pixel(r, c));
            }
        }
    }
    let lambda_eff = 1.0 - (rh * rw) as f64 / (a.h * a.w) as f64;
    Ok((out, lambda_eff as f32))
}

/// CutMix with `λ ~ Beta(beta, beta)`.
pub fn cutmix(
    a: &ImageTensor,
    b: &ImageTensor,
    beta: f32,
    rng: &mut impl Rng,
) -> Result<(ImageTensor, f32)> {
    let dist = Beta::new(beta as f64, beta as f64)
        .map_err(|e| Error::config(format!("cutmix_beta = {beta}: {e}")))?;
    let lambda = dist.sample(rng);
    cutmix_with_lambda(a, b, lambda, rng)
}

/// A network-ready training sample, possibly spliced from two sources.
#[derive(Debug, Clone)]
pub struct MixedSample {
    /// Normalized pixels, ready for patch embedding.
    pub image: ImageTensor,
    /// Weight of each source's label, in source order; sums to 1.
    pub label_weights: (f32, f32),
    /// Labels of the two sources (equal for unmixed samples).
    pub labels: (Label, Label),
    /// Domains of the two sources (equal for unmixed samples).
    pub domains: (String, String),
}

impl MixedSample {
    /// Scatters the source weights onto class indices; sources sharing a
    /// class sum, so the result is a valid soft target for the loss.
    pub fn class_weights(&self) -> [f32; 2] {
        let mut w = [0.0; 2];
        w[self.labels.0.class_index()] += self.label_weights.0;
        w[self.labels.1.class_index()] += self.label_weights.1;
        w
    }
}

/// Applies the configured augmentation policy with per-sample RNG
/// substreams.
#[derive(Debug, Clone)]
pub struct Augmentor {
    cfg: AugConfig,
}

impl Augmentor {
    pub fn new(cfg: AugConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Augmentor { cfg })
    }

    pub fn config(&self) -> &AugConfig {
        &self.cfg
    }

    /// One training view: flip, then an even-odds choice between CutMix
    /// (against `partner`) and CutOut, then normalization. `stream_index`
    /// must be unique per (epoch, sample) so streams never collide.
    pub fn train_view(
        &self,
        sample: &Sample,
        partner: &Sample,
        stream_index: u64,
    ) -> Result<MixedSample> {
        let cfg = &self.cfg;
        let mut rng = substream(cfg.seed, StreamId::Augment, stream_index);
        let img = random_flip(&sample.image, cfg.horizontal_flip_prob, &mut rng);
        let (image, weights, labels, domains) = if rng.random_bool(0.5) {
            let pb = random_flip(&partner.image, cfg.horizontal_flip_prob, &mut rng);
            let (mixed, lam) = cutmix(&img, &pb, cfg.cutmix_beta, &mut rng)?;
            (
                mixed,
                (lam, 1.0 - lam),
                (sample.label, partner.label),
                (sample.domain.clone(), partner.domain.clone()),
            )
        } else {
            let cut = cutout(
                &img,
                cfg.cutout_fraction,
                cfg.normalize_mean,
                &mut rng,
            );
            (
                cut,
                (1.0, 0.0),
                (sample.label, sample.label),
                (sample.domain.clone(), sample.domain.clone()),
            )
        };
        Ok(MixedSample {
            image: normalize(&image, cfg.normalize_mean, cfg.normalize_std),
            label_weights: weights,
            labels,
            domains,
        })
    }

    /// One evaluation view: normalization only, unless `augment_eval`
    /// opts the evaluation data into the full stack.
    pub fn eval_view(
        &self,
        sample: &Sample,
        partner: &Sample,
        stream_index: u64,
    ) -> Result<MixedSample> {
        if self.cfg.augment_eval {
            self.train_view(sample, partner, stream_index)
        } else {
            Ok(MixedSample {
                image: normalize(
                    &sample.image,
                    self.cfg.normalize_mean,
                    self.cfg.normalize_std,
                ),
                label_weights: (1.0, 0.0),
                labels: (sample.label, sample.label),
                domains: (sample.domain.clone(), sample.domain.clone()),
            })
        }
    }
}
