//! Exact t-SNE for feature-space visualization.
//!
//! The O(n²) original: per-point Gaussian bandwidths found by bisection to
//! hit the target perplexity, symmetrized affinities, Student-t kernel in
//! the plane, gradient descent with momentum and early exaggeration. Fine
//! for a few hundred points, which is all the visualizations sample.

use rand_distr::{Distribution, Normal};

use crate::error::Error;
use crate::rng::{substream, StreamId};
use crate::Result;

/// Embedded points plus the objective at the start and end of descent.
#[derive(Debug, Clone)]
pub struct TsneResult {
    pub points: Vec<[f64; 2]>,
    /// KL(P||Q) right after initialization (true P, no exaggeration).
    pub kl_initial: f64,
    /// KL(P||Q) at the final iterate.
    pub kl_final: f64,
}

/// Pairwise squared Euclidean distances, row-major `n x n`.
fn squared_distances(features: &[Vec<f64>]) -> Vec<f64> {
    let n = features.len();
    let mut d2 = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d: f64 = features[i]
                .iter()
                .zip(&features[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d2[i * n + j] = d;
            d2[j * n + i] = d;
        }
    }
    d2
}

/// Conditional p_{j|i} for one row, with the bandwidth beta bisected until
/// the row entropy matches ln(perplexity).
fn conditional_row(d2_row: &[f64], i: usize, perplexity: f64) -> Vec<f64> {
    let n = d2_row.len();
    let target = perplexity.ln();
    let mut beta = 1.0f64;
    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    let mut row = vec![0.0; n];
    for _ in 0..64 {
        let mut sum = 0.0;
        for j in 0..n {
            row[j] = if j == i { 0.0 } else { (-beta * d2_row[j]).exp() };
            sum += row[j];
        }
        // Entropy H = ln(sum) + beta * E[d²]; monotone decreasing in beta.
        let mut expected_d2 = 0.0;
        for j in 0..n {
            row[j] /= sum.max(f64::MIN_POSITIVE);
            expected_d2 += row[j] * d2_row[j];
        }
        let entropy = sum.max(f64::MIN_POSITIVE).ln() + beta * expected_d2;
        if (entropy - target).abs() < 1e-7 {
            break;
        }
        if entropy > target {
            lo = beta;
            beta = if hi.is_finite() { (lo + hi) / 2.0 } else { beta * 2.0 };
        } else {
            hi = beta;
            beta = (lo + hi) / 2.0;
        }
    }
    row
}

/// Symmetrized, normalized affinities with the usual 1e-12 floor.
fn joint_affinities(features: &[Vec<f64>], perplexity: f64) -> Vec<f64> {
    let n = features.len();
    let d2 = squared_distances(features);
    let mut cond = vec![0.0; n * n];
    for i in 0..n {
        let row = conditional_row(&d2[i * n..(i + 1) * n], i, perplexity);
        cond[i * n..(i + 1) * n].copy_from_slice(&row);
    }
    let mut p = vec![0.0; n * n];
    let norm = 2.0 * n as f64;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                p[i * n + j] = ((cond[i * n + j] + cond[j * n + i]) / norm).max(1e-12);
            }
        }
    }
    p
}

/// Student-t kernel weights (unnormalized) and their total.
fn low_dim_kernel(points: &[[f64; 2]]) -> (Vec<f64>, f64) {
    let n = points.len();
    let mut w = vec![0.0; n * n];
    let mut total = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = points[i][0] - points[j][0];
            let dy = points[i][1] - points[j][1];
            let k = 1.0 / (1.0 + dx * dx + dy * dy);
            w[i * n + j] = k;
            w[j * n + i] = k;
            total += 2.0 * k;
        }
    }
    (w, total)
}

fn kl_divergence(p: &[f64], kernel: &[f64], kernel_total: f64, n: usize) -> f64 {
    let mut kl = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let pij = p[i * n + j];
            let qij = (kernel[i * n + j] / kernel_total).max(1e-12);
            kl += pij * (pij / qij).ln();
        }
    }
    kl
}

/// Embeds `features` into the plane. Deterministic given `seed`.
///
/// Requires at least `3 * perplexity` points (the bisection target is
/// meaningless otherwise).
pub fn tsne_embed(
    features: &[Vec<f64>],
    perplexity: f64,
    iters: usize,
    seed: u64,
) -> Result<TsneResult> {
    let n = features.len();
    if !(perplexity >= 2.0) || !perplexity.is_finite() {
        return Err(Error::config(format!("perplexity {perplexity} must be at least 2")));
    }
    let needed = (3.0 * perplexity).ceil() as usize;
    if n < needed {
        return Err(Error::InvalidInput(format!(
            "t-SNE with perplexity {perplexity} needs at least {needed} points, got {n}"
        )));
    }
    if iters == 0 {
        return Err(Error::config("t-SNE needs at least one iteration"));
    }
    let dim = features[0].len();
    if features.iter().any(|f| f.len() != dim) {
        return Err(Error::InvalidInput("feature vectors have mixed lengths".to_string()));
    }

    let p = joint_affinities(features, perplexity);
    let mut rng = substream(seed, StreamId::Embedding, 0);
    // Variance 1e-4: tight enough that structure comes from the descent,
    // loose enough that coincident clusters feel each other's repulsion.
    let init = Normal::new(0.0f64, 1e-2).expect("fixed std");
    let mut y: Vec<[f64; 2]> =
        (0..n).map(|_| [init.sample(&mut rng), init.sample(&mut rng)]).collect();
    let mut velocity = vec![[0.0f64; 2]; n];
    // Adaptive per-coordinate gains keep the fixed step usable at any
    // point count: grow while the gradient keeps its direction, shrink on
    // a flip.
    let mut gains = vec![[1.0f64; 2]; n];

    let (k0, t0) = low_dim_kernel(&y);
    let kl_initial = kl_divergence(&p, &k0, t0, n);

    let exaggeration_until = (iters / 4).min(250);
    let exaggeration_factor = 12.0;
    // Affinities scale like 1/n², so the workable step scales with n.
    let learning_rate = (n as f64 / (4.0 * exaggeration_factor)).max(50.0);
    let mut grad = vec![[0.0f64; 2]; n];
    for iter in 0..iters {
        let exaggeration = if iter < exaggeration_until { exaggeration_factor } else { 1.0 };
        let momentum = if iter < exaggeration_until { 0.5 } else { 0.8 };
        let (kernel, kernel_total) = low_dim_kernel(&y);
        for g in &mut grad {
            *g = [0.0, 0.0];
        }
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let w = kernel[i * n + j];
                let q = (w / kernel_total).max(1e-12);
                let coeff = 4.0 * (exaggeration * p[i * n + j] - q) * w;
                grad[i][0] += coeff * (y[i][0] - y[j][0]);
                grad[i][1] += coeff * (y[i][1] - y[j][1]);
            }
        }
        let mut mean = [0.0f64; 2];
        for i in 0..n {
            for d in 0..2 {
                gains[i][d] = if (grad[i][d] > 0.0) != (velocity[i][d] > 0.0) {
                    gains[i][d] + 0.2
                } else {
                    (gains[i][d] * 0.8).max(0.01)
                };
                velocity[i][d] =
                    momentum * velocity[i][d] - learning_rate * gains[i][d] * grad[i][d];
                y[i][d] += velocity[i][d];
                mean[d] += y[i][d];
            }
        }
        // Recenter: the objective is translation-invariant and drift only
        // hurts the plots.
        for point in &mut y {
            point[0] -= mean[0] / n as f64;
            point[1] -= mean[1] / n as f64;
        }
    }
    let (k1, t1) = low_dim_kernel(&y);
    let kl_final = kl_divergence(&p, &k1, t1, n);
    Ok(TsneResult { points: y, kl_initial, kl_final })
}

/// Mean silhouette coefficient of `points` under the given group labels:
/// (nearest-other-group mean distance − own-group mean distance) / max.
/// Positive means groups are visually separated.
pub fn silhouette(points: &[[f64; 2]], groups: &[usize]) -> Result<f64> {
    if points.len() != groups.len() || points.is_empty() {
        return Err(Error::InvalidInput("silhouette needs one group per point".to_string()));
    }
    let distinct: std::collections::BTreeSet<usize> = groups.iter().copied().collect();
    if distinct.len() < 2 {
        return Err(Error::InvalidInput("silhouette needs at least two groups".to_string()));
    }
    let dist = |a: &[f64; 2], b: &[f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
    let mut total = 0.0;
    for i in 0..points.len() {
        let mut sums: std::collections::BTreeMap<usize, (f64, usize)> =
            distinct.iter().map(|&g| (g, (0.0, 0))).collect();
        for j in 0..points.len() {
            if i == j {
                continue;
            }
            let entry = sums.get_mut(&groups[j]).expect("group seen");
            entry.0 += dist(&points[i], &points[j]);
            entry.1 += 1;
        }
        let own = sums[&groups[i]];
        // Singleton groups contribute 0, the standard convention.
        if own.1 == 0 {
            continue;
        }
        let a = own.0 / own.1 as f64;
        let b = sums
            .iter()
            .filter(|(&g, &(_, count))| g != groups[i] && count > 0)
            .map(|(_, &(sum, count))| sum / count as f64)
            .fold(f64::INFINITY, f64::min);
        total += (b - a) / a.max(b);
    }
    Ok(total / points.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Three well-separated Gaussian-ish blobs in 5-D.
    fn blobs(per_blob: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
        let centers = [[0.0; 5], [8.0, 8.0, 0.0, 0.0, 0.0], [0.0, 0.0, 8.0, 8.0, 8.0]];
        let mut features = Vec::new();
        let mut groups = Vec::new();
        for (g, center) in centers.iter().enumerate() {
            for i in 0..per_blob {
                let mut v: Vec<f64> = center.to_vec();
                for (d, x) in v.iter_mut().enumerate() {
                    *x += ((i * 7 + d * 13 + g * 29) % 11) as f64 / 11.0 - 0.5;
                }
                features.push(v);
                groups.push(g);
            }
        }
        (features, groups)
    }

    #[test]
    fn descent_reduces_the_objective_and_separates_blobs() {
        let (features, groups) = blobs(12);
        let result = tsne_embed(&features, 6.0, 300, 3).unwrap();
        assert_eq!(result.points.len(), features.len());
        assert!(
            result.kl_final < result.kl_initial,
            "KL {} -> {}",
            result.kl_initial,
            result.kl_final
        );
        let s = silhouette(&result.points, &groups).unwrap();
        assert!(s > 0.0, "silhouette {s}");
    }

    #[test]
    fn duplicate_inputs_land_close_together() {
        let (mut features, _) = blobs(10);
        features[1] = features[0].clone();
        let result = tsne_embed(&features, 5.0, 250, 7).unwrap();
        let d = |a: &[f64; 2], b: &[f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        let pair = d(&result.points[0], &result.points[1]);
        let mut all: Vec<f64> = Vec::new();
        for i in 0..result.points.len() {
            for j in (i + 1)..result.points.len() {
                all.push(d(&result.points[i], &result.points[j]));
            }
        }
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = all[all.len() / 2];
        assert!(pair < median, "duplicates {pair} vs median {median}");
    }

    #[test]
    fn embedding_is_deterministic_in_the_seed() {
        let (features, _) = blobs(8);
        let a = tsne_embed(&features, 4.0, 100, 11).unwrap();
        let b = tsne_embed(&features, 4.0, 100, 11).unwrap();
        assert_eq!(a.points, b.points);
        let c = tsne_embed(&features, 4.0, 100, 12).unwrap();
        assert_ne!(a.points, c.points);
    }

    #[test]
    fn too_few_points_is_an_error() {
        let (features, _) = blobs(3); // 9 points
        let err = tsne_embed(&features, 10.0, 50, 0).unwrap_err();
        assert!(err.to_string().contains("at least 30"));
    }

    #[test]
    fn silhouette_flags_mixed_labels() {
        let (features, groups) = blobs(10);
        let result = tsne_embed(&features, 5.0, 250, 5).unwrap();
        let good = silhouette(&result.points, &groups).unwrap();
        // Scrambled labels destroy the separation the true labels show.
        let scrambled: Vec<usize> = (0..groups.len()).map(|i| i % 3).collect();
        let bad = silhouette(&result.points, &scrambled).unwrap();
        assert!(good > bad, "good {good} vs scrambled {bad}");
    }
}
