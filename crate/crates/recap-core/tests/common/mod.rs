//! Shared numeric-oracle helpers for integration tests.
//!
//! The gradient oracle is intentionally independent of the tape: it only
//! ever calls a black-box `f(&[f64]) -> f64` and perturbs one coordinate at
//! a time with central differences.

#![allow(dead_code)]

/// Central-difference gradient of `f` at `x`, step `h`.
pub fn numerical_grad(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut grad = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let up = f(&probe);
        probe[i] = orig - h;
        let down = f(&probe);
        probe[i] = orig;
        grad[i] = (up - down) / (2.0 * h);
    }
    grad
}

/// Relative error with an absolute floor for near-zero pairs.
pub fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < 1e-7 {
        (a - b).abs()
    } else {
        (a - b).abs() / scale
    }
}

/// Asserts every analytic/numeric gradient pair agrees within `tol`
/// relative error.
pub fn assert_grads_close(analytic: &[f64], numeric: &[f64], tol: f64, what: &str) {
    assert_eq!(analytic.len(), numeric.len(), "{what}: gradient length");
    for (i, (&a, &n)) in analytic.iter().zip(numeric).enumerate() {
        let e = rel_err(a, n);
        assert!(
            e < tol,
            "{what}: grad[{i}] analytic {a} vs numeric {n} (rel err {e:.3e} ≥ {tol:.0e})"
        );
    }
}

/// Deterministic pseudo-random values in [-1, 1] for test fixtures.
pub fn pseudo_uniform(seed: u64, n: usize) -> Vec<f64> {
    // SplitMix64: tiny, stable, and independent of the crate's own RNG.
    let mut state = seed.wrapping_add(0x9e3779b97f4a7c15);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        state = state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^= z >> 31;
        out.push((z >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0);
    }
    out
}
