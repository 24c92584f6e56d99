//! Noise-residual correlation features.
//!
//! Recapture artefacts (aliasing, optical blur) correlate neighboring
//! noise-residual pixels in ways clean sensor noise does not. The
//! descriptor: per channel, subtract a 3×3 binomial-smoothed copy to get
//! the residual, then take the Pearson correlation between the residual
//! and its shifted self at 18 fixed offsets — all displacements with
//! squared Euclidean length ≤ 10, deduplicated by half-plane symmetry
//! (corr at +d equals corr at −d up to the overlap window, so only one
//! representative per ± pair is kept). Three channels × 18 offsets = 54.

use crate::baselines::{Extractor, FeatureVector};
use crate::data::ImageTensor;
use crate::error::Error;
use crate::Result;

/// Feature length: 3 channels × [`CORR_OFFSETS`].len().
pub const CORR_DIM: usize = 54;

/// Half-plane representatives (dy, dx) of all nonzero offsets with
/// `dy² + dx² ≤ 10`, ordered by (dy, dx). `dy > 0`, or `dy == 0 && dx > 0`.
pub const CORR_OFFSETS: [(i64, i64); 18] = [
    (0, 1),
    (0, 2),
    (0, 3),
    (1, -3),
    (1, -2),
    (1, -1),
    (1, 0),
    (1, 1),
    (1, 2),
    (1, 3),
    (2, -2),
    (2, -1),
    (2, 0),
    (2, 1),
    (2, 2),
    (3, -1),
    (3, 0),
    (3, 1),
];

/// One channel plane minus its 3×3 binomial ([1 2 1]/4 per axis) smoothing,
/// edge-replicated.
fn residual(img: &ImageTensor, ch: usize) -> Vec<f64> {
    let (h, w) = (img.h as i64, img.w as i64);
    let taps = [0.25f64, 0.5, 0.25];
    let mut horiz = vec![0.0f64; (h * w) as usize];
    for r in 0..h {
        for c in 0..w {
            let mut acc = 0.0;
            for (k, t) in taps.iter().enumerate() {
                let cc = (c + k as i64 - 1).clamp(0, w - 1);
                acc += t * img.get(r as usize, cc as usize, ch) as f64;
            }
            horiz[(r * w + c) as usize] = acc;
        }
    }
    let mut out = vec![0.0f64; (h * w) as usize];
    for r in 0..h {
        for c in 0..w {
            let mut acc = 0.0;
            for (k, t) in taps.iter().enumerate() {
                let rr = (r + k as i64 - 1).clamp(0, h - 1);
                acc += t * horiz[(rr * w + c) as usize];
            }
            out[(r * w + c) as usize] =
                img.get(r as usize, c as usize, ch) as f64 - acc;
        }
    }
    out
}

/// Pearson autocorrelations of one plane at every [`CORR_OFFSETS`] shift.
///
/// This is the statistical stage of the descriptor, split out so it can
/// be probed with synthetic planes (e.g. a plane that *is* white noise
/// correlates near zero everywhere — note the residual of a white-noise
/// image does not, because the high-pass filter colors it).
pub fn autocorrelations(plane: &[f64], h: usize, w: usize) -> Vec<f64> {
    assert_eq!(plane.len(), h * w, "plane extent");
    CORR_OFFSETS
        .iter()
        .map(|&(dy, dx)| shift_correlation(plane, h, w, dy, dx))
        .collect()
}

/// Pearson correlation between `plane` and itself shifted by `(dy, dx)`,
/// over the region where both positions are in bounds. Degenerate
/// (zero-variance) overlaps correlate as 0.
fn shift_correlation(plane: &[f64], h: usize, w: usize, dy: i64, dx: i64) -> f64 {
    let r_lo = 0.max(-dy) as usize;
    let r_hi = (h as i64).min(h as i64 - dy) as usize;
    let c_lo = 0.max(-dx) as usize;
    let c_hi = (w as i64).min(w as i64 - dx) as usize;
    let n = ((r_hi - r_lo) * (c_hi - c_lo)) as f64;
    let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for r in r_lo..r_hi {
        for c in c_lo..c_hi {
            let a = plane[r * w + c];
            let b = plane[(r as i64 + dy) as usize * w + (c as i64 + dx) as usize];
            sa += a;
            sb += b;
            saa += a * a;
            sbb += b * b;
            sab += a * b;
        }
    }
    let cov = sab - sa * sb / n;
    let var_a = saa - sa * sa / n;
    let var_b = sbb - sb * sb / n;
    if var_a <= 0.0 || var_b <= 0.0 {
        return 0.0;
    }
    (cov / (var_a * var_b).sqrt()).clamp(-1.0, 1.0)
}

/// 54 noise-residual autocorrelations: channels R, G, B, each at the 18
/// offsets of [`CORR_OFFSETS`], every value in [-1, 1].
pub fn corr_features(img: &ImageTensor) -> Result<FeatureVector> {
    if img.h < 16 || img.w < 16 {
        return Err(Error::InvalidInput(format!(
            "correlation features need at least 16x16 pixels, got {}x{}",
            img.h, img.w
        )));
    }
    let mut values = Vec::with_capacity(CORR_DIM);
    for ch in 0..3 {
        let plane = residual(img, ch);
        values.extend(autocorrelations(&plane, img.h, img.w));
    }
    Ok(FeatureVector { values, extractor: Extractor::Corr, sample_id: String::new() })
}
