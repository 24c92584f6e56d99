//! The four recapture artefacts, each a standalone image op.
//!
//! Every op treats its neutral parameter value as a bit-exact identity, so
//! a domain configured with all-neutral settings recaptures an image into
//! a pixel-identical copy — only the label changes.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::data::ImageTensor;

/// Multiplicative moiré banding.
///
/// Scales every channel by `1 + amplitude * sin(2π f (x cosθ + y sinθ) + φ)`
/// where `f` is in cycles per pixel, `x` runs along columns and `y` along
/// rows. Each channel gets a slight phase offset so the bands shimmer with
/// a color fringe, as real screen/lens interference does. Output clipped
/// to [0, 1]; `amplitude == 0` returns the input unchanged.
pub fn apply_moire(img: &ImageTensor, frequency: f32, angle: f32, amplitude: f32) -> ImageTensor {
    if amplitude == 0.0 {
        return img.clone();
    }
    const CHANNEL_PHASE: [f64; 3] = [0.0, 0.35, 0.70];
    let (freq, amp) = (frequency as f64, amplitude as f64);
    let (cos_t, sin_t) = ((angle as f64).cos(), (angle as f64).sin());
    let mut out = img.clone();
    for r in 0..img.h {
        for c in 0..img.w {
            let t = std::f64::consts::TAU * freq * (c as f64 * cos_t + r as f64 * sin_t);
            let mut px = img.pixel(r, c);
            for ch in 0..3 {
                let gain = 1.0 + amp * (t + CHANNEL_PHASE[ch]).sin();
                px[ch] = (px[ch] as f64 * gain).clamp(0.0, 1.0) as f32;
            }
            out.set_pixel(r, c, px);
        }
    }
    out
}

/// Normalized 1-D Gaussian taps over `[-radius, radius]`, `radius = ⌈3σ⌉`.
pub fn gaussian_kernel(sigma: f32) -> Vec<f64> {
    let sigma = sigma as f64;
    let radius = (3.0 * sigma).ceil() as i64;
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|d| (-(d as f64).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= total;
    }
    taps
}

/// Separable Gaussian blur with edge-replicate padding.
///
/// `sigma == 0` returns the input unchanged.
pub fn apply_blur(img: &ImageTensor, sigma: f32) -> ImageTensor {
    if sigma == 0.0 {
        return img.clone();
    }
    let taps = gaussian_kernel(sigma);
    let radius = (taps.len() / 2) as i64;
    let (h, w) = (img.h as i64, img.w as i64);
    // Horizontal pass in f64, then vertical, then one cast back.
    let mut mid = vec![0.0f64; img.data.len()];
    for r in 0..h {
        for c in 0..w {
            for ch in 0..3 {
                let mut acc = 0.0;
                for (k, tap) in taps.iter().enumerate() {
                    let cc = (c + k as i64 - radius).clamp(0, w - 1);
                    acc += tap * img.get(r as usize, cc as usize, ch) as f64;
                }
                mid[((r * w + c) * 3) as usize + ch] = acc;
            }
        }
    }
    let mut out = img.clone();
    for r in 0..h {
        for c in 0..w {
            let mut px = [0.0f32; 3];
            for ch in 0..3 {
                let mut acc = 0.0;
                for (k, tap) in taps.iter().enumerate() {
                    let rr = (r + k as i64 - radius).clamp(0, h - 1);
                    acc += tap * mid[((rr * w + c) * 3) as usize + ch];
                }
                px[ch] = acc as f32;
            }
            out.set_pixel(r as usize, c as usize, px);
        }
    }
    out
}

/// Additive white Gaussian noise, clipped to [0, 1].
///
/// Draws one normal deviate per channel per pixel in raster order, so the
/// result is a pure function of the RNG state. `std == 0` returns the
/// input unchanged without consuming any draws.
pub fn apply_noise(img: &ImageTensor, std: f32, rng: &mut impl Rng) -> ImageTensor {
    if std == 0.0 {
        return img.clone();
    }
    // std is validated > 0 and finite upstream.
    let normal = Normal::new(0.0f64, std as f64).expect("noise std must be finite");
    let mut out = img.clone();
    for v in &mut out.data {
        *v = (*v as f64 + normal.sample(rng)).clamp(0.0, 1.0) as f32;
    }
    out
}

/// Display tone response: per-channel `x^gamma`, then an additive tint,
/// then clipping. `gamma == 1` with a zero tint returns the input
/// unchanged.
pub fn apply_tone(img: &ImageTensor, gamma: f32, tint: [f32; 3]) -> ImageTensor {
    if gamma == 1.0 && tint == [0.0; 3] {
        return img.clone();
    }
    let g = gamma as f64;
    let mut out = img.clone();
    for r in 0..img.h {
        for c in 0..img.w {
            let mut px = img.pixel(r, c);
            for ch in 0..3 {
                let toned = (px[ch].max(0.0) as f64).powf(g) + tint[ch] as f64;
                px[ch] = toned.clamp(0.0, 1.0) as f32;
            }
            out.set_pixel(r, c, px);
        }
    }
    out
}
