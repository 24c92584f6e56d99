//! Procedural source scenes.
//!
//! Four generator families cover the content mix a screen-capture corpus
//! needs: smooth gradients (low frequency), dense textures (energy well
//! above Nyquist/4), flat-color shape collages (sharp edges, broad
//! spectrum), and text-like stroke rows (periodic high-contrast detail).
//! Everything is a pure function of the spec, so datasets regenerate
//! byte-identically from seeds.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::ImageTensor;
use crate::rng::{stream, StreamId};

/// Scene generator family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneKind {
    Gradient,
    Texture,
    Shapes,
    TextLike,
}

/// All four kinds, in the order [`build_domain`](crate::synth::build_domain)
/// cycles through them.
pub const SCENE_KINDS: [SceneKind; 4] =
    [SceneKind::Gradient, SceneKind::Texture, SceneKind::Shapes, SceneKind::TextLike];

/// Recipe for one procedural image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub kind: SceneKind,
    pub size: usize,
    pub seed: u64,
}

/// Renders the scene. Deterministic in the spec; pixels in [0, 1].
pub fn generate_scene(spec: &SceneSpec) -> ImageTensor {
    let mut rng = stream(spec.seed, StreamId::Data);
    let n = spec.size;
    let mut img = match spec.kind {
        SceneKind::Gradient => gradient(n, &mut rng),
        SceneKind::Texture => texture(n, &mut rng),
        SceneKind::Shapes => shapes(n, &mut rng),
        SceneKind::TextLike => text_like(n, &mut rng),
    };
    img.clamp_unit();
    img
}

/// Two superposed low-frequency color ramps plus a broad sinusoidal swell.
fn gradient(n: usize, rng: &mut impl Rng) -> ImageTensor {
    let dir = rng.random::<f64>() * std::f64::consts::TAU;
    let (dx, dy) = (dir.cos(), dir.sin());
    let base: [f64; 3] = [
        0.25 + 0.5 * rng.random::<f64>(),
        0.25 + 0.5 * rng.random::<f64>(),
        0.25 + 0.5 * rng.random::<f64>(),
    ];
    let slope: [f64; 3] = [
        0.4 * (rng.random::<f64>() - 0.5),
        0.4 * (rng.random::<f64>() - 0.5),
        0.4 * (rng.random::<f64>() - 0.5),
    ];
    let swell_freq = 0.5 + rng.random::<f64>() * 1.5;
    let swell_phase = rng.random::<f64>() * std::f64::consts::TAU;
    let mut img = ImageTensor::filled(n, n, [0.0; 3]);
    for r in 0..n {
        for c in 0..n {
            let t = (c as f64 * dx + r as f64 * dy) / n as f64;
            let swell =
                0.08 * (std::f64::consts::TAU * swell_freq * t + swell_phase).sin();
            let px = [
                (base[0] + slope[0] * t + swell) as f32,
                (base[1] + slope[1] * t + swell) as f32,
                (base[2] + slope[2] * t + swell) as f32,
            ];
            img.set_pixel(r, c, px);
        }
    }
    img
}

/// Sum of oriented sinusoids between 0.15 and 0.45 cycles/pixel plus a
/// little white noise: guaranteed energy above a quarter of Nyquist.
fn texture(n: usize, rng: &mut impl Rng) -> ImageTensor {
    let mut waves = Vec::new();
    for _ in 0..5 {
        let freq = 0.15 + 0.30 * rng.random::<f64>();
        let angle = rng.random::<f64>() * std::f64::consts::TAU;
        let phase = rng.random::<f64>() * std::f64::consts::TAU;
        let amp = 0.05 + 0.10 * rng.random::<f64>();
        waves.push((freq * angle.cos(), freq * angle.sin(), phase, amp));
    }
    let base: [f64; 3] =
        [0.4 + 0.2 * rng.random::<f64>(), 0.4 + 0.2 * rng.random::<f64>(), 0.4 + 0.2 * rng.random::<f64>()];
    let mut img = ImageTensor::filled(n, n, [0.0; 3]);
    for r in 0..n {
        for c in 0..n {
            let mut v = 0.0;
            for &(fx, fy, phase, amp) in &waves {
                v += amp
                    * (std::f64::consts::TAU * (fx * c as f64 + fy * r as f64)
                        + phase)
                        .sin();
            }
            let grain = 0.03 * (rng.random::<f64>() - 0.5);
            let px = [
                (base[0] + v + grain) as f32,
                (base[1] + v * 0.8 + grain) as f32,
                (base[2] + v * 1.2 + grain) as f32,
            ];
            img.set_pixel(r, c, px);
        }
    }
    img
}

/// Flat background with a dozen solid rectangles and disks.
fn shapes(n: usize, rng: &mut impl Rng) -> ImageTensor {
    let bg = [
        0.2 + 0.6 * rng.random::<f32>(),
        0.2 + 0.6 * rng.random::<f32>(),
        0.2 + 0.6 * rng.random::<f32>(),
    ];
    let mut img = ImageTensor::filled(n, n, bg);
    for _ in 0..12 {
        let color = [rng.random::<f32>(), rng.random::<f32>(), rng.random::<f32>()];
        let cy = rng.random_range(0..n);
        let cx = rng.random_range(0..n);
        let half = rng.random_range(2..=n / 4);
        if rng.random_bool(0.5) {
            for r in cy.saturating_sub(half)..(cy + half).min(n) {
                for c in cx.saturating_sub(half)..(cx + half).min(n) {
                    img.set_pixel(r, c, color);
                }
            }
        } else {
            let rr = half * half;
            for r in cy.saturating_sub(half)..(cy + half).min(n) {
                for c in cx.saturating_sub(half)..(cx + half).min(n) {
                    let (dr, dc) =
                        (r as i64 - cy as i64, c as i64 - cx as i64);
                    if (dr * dr + dc * dc) as usize <= rr {
                        img.set_pixel(r, c, color);
                    }
                }
            }
        }
    }
    img
}

/// Pale background with rows of dark dashes in a text-like rhythm.
fn text_like(n: usize, rng: &mut impl Rng) -> ImageTensor {
    let paper = 0.82 + 0.12 * rng.random::<f32>();
    let ink = 0.05 + 0.15 * rng.random::<f32>();
    let mut img = ImageTensor::filled(n, n, [paper; 3]);
    let line_height = rng.random_range(5..9);
    let glyph_height = line_height - 2;
    let mut row = rng.random_range(1..line_height);
    while row + glyph_height < n {
        let mut col = rng.random_range(1..4);
        while col + 2 < n {
            let width = rng.random_range(2..7).min(n - col - 1);
            // A short gap between "words" now and then.
            let gap = if rng.random_bool(0.2) {
                rng.random_range(3..6)
            } else {
                1
            };
            if rng.random_bool(0.85) {
                for r in row..row + glyph_height {
                    for c in col..col + width {
                        img.set_pixel(r, c, [ink; 3]);
                    }
                }
            }
            col += width + gap;
        }
        row += line_height;
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenes_are_deterministic_and_in_range() {
        for kind in SCENE_KINDS {
            let spec = SceneSpec { kind, size: 64, seed: 31 };
            let a = generate_scene(&spec);
            let b = generate_scene(&spec);
            assert_eq!(a.data, b.data, "{kind:?}");
            assert_eq!((a.h, a.w), (64, 64));
            assert!(a.data.iter().all(|&v| (0.0..=1.0).contains(&v)));
            // Different seeds move at least one pixel.
            let c = generate_scene(&SceneSpec { seed: 32, ..spec });
            assert_ne!(a.data, c.data, "{kind:?}");
        }
    }

    #[test]
    fn scene_content_is_not_flat() {
        for kind in SCENE_KINDS {
            let img = generate_scene(&SceneSpec { kind, size: 64, seed: 7 });
            let lum = img.luminance();
            let mean: f32 = lum.iter().sum::<f32>() / lum.len() as f32;
            let var: f32 = lum.iter().map(|v| (v - mean).powi(2)).sum::<f32>()
                / lum.len() as f32;
            assert!(var > 1e-4, "{kind:?} variance {var}");
        }
    }
}
