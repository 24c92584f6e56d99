//! Uniform local binary patterns, 8 neighbors at radius 1.
//!
//! Each interior pixel compares eight bilinearly sampled circle points
//! against its center (ties count as brighter) to form an 8-bit pattern.
//! Patterns with at most two 0/1 transitions around the circle are
//! "uniform"; there are 58 of them, and everything else shares one
//! catch-all bin, giving the classic 59-bin histogram.

use crate::baselines::{Extractor, FeatureVector};
use crate::data::ImageTensor;
use crate::error::Error;
use crate::Result;

/// 58 uniform patterns plus the non-uniform catch-all.
pub const LBP_DIM: usize = 59;

/// Circular transition count of an 8-bit pattern.
fn transitions(pattern: u8) -> u32 {
    (pattern ^ pattern.rotate_left(1)).count_ones()
}

/// Maps each uniform pattern (ascending byte order) to 0..58; everything
/// else to bin 58.
fn bin_table() -> [usize; 256] {
    let mut table = [LBP_DIM - 1; 256];
    let mut next = 0;
    for pattern in 0..=255u8 {
        if transitions(pattern) <= 2 {
            table[pattern as usize] = next;
            next += 1;
        }
    }
    debug_assert_eq!(next, LBP_DIM - 1);
    table
}

/// Bilinear luminance lookup at fractional coordinates, in-bounds only.
///
/// Uses the nested-lerp form `a + t(b - a)` rather than a sum of four
/// weighted corners: lerp returns equal corners exactly, so flat regions
/// tie with their center instead of drifting by an ulp.
fn sample(lum: &[f32], w: usize, y: f64, x: f64) -> f64 {
    let (y0, x0) = (y.floor(), x.floor());
    let (fy, fx) = (y - y0, x - x0);
    let (r, c) = (y0 as usize, x0 as usize);
    let v00 = lum[r * w + c] as f64;
    if fy == 0.0 && fx == 0.0 {
        return v00;
    }
    let lerp = |a: f64, b: f64, t: f64| a + t * (b - a);
    let v01 = lum[r * w + c + 1] as f64;
    let v10 = lum[(r + 1) * w + c] as f64;
    let v11 = lum[(r + 1) * w + c + 1] as f64;
    lerp(lerp(v00, v01, fx), lerp(v10, v11, fx), fy)
}

/// 59-bin uniform LBP histogram over the luminance plane, L1-normalized.
pub fn lbp_histogram(img: &ImageTensor) -> Result<FeatureVector> {
    if img.h < 3 || img.w < 3 {
        return Err(Error::InvalidInput(format!(
            "LBP needs at least 3x3 pixels, got {}x{}",
            img.h, img.w
        )));
    }
    let lum = img.luminance();
    let table = bin_table();
    // Neighbor k sits at angle 2πk/8 on the unit circle around the center.
    let offsets: Vec<(f64, f64)> = (0..8)
        .map(|k| {
            let theta = std::f64::consts::TAU * k as f64 / 8.0;
            // Snap the axis-aligned points to exact integers.
            let round = |v: f64| if v.abs() < 1e-9 { 0.0 } else { v };
            (round(theta.sin()), round(theta.cos()))
        })
        .collect();
    let mut counts = [0u64; LBP_DIM];
    for r in 1..img.h - 1 {
        for c in 1..img.w - 1 {
            let center = lum[r * img.w + c] as f64;
            let mut pattern = 0u8;
            for (k, &(dy, dx)) in offsets.iter().enumerate() {
                let v = sample(&lum, img.w, r as f64 + dy, c as f64 + dx);
                if v >= center {
                    pattern |= 1 << k;
                }
            }
            counts[table[pattern as usize]] += 1;
        }
    }
    let total = ((img.h - 2) * (img.w - 2)) as f64;
    let values = counts.iter().map(|&c| c as f64 / total).collect();
    Ok(FeatureVector { values, extractor: Extractor::Lbp, sample_id: String::new() })
}
