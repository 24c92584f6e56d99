//! Independent oracles for the forensic baselines.
//!
//! The LBP check reimplements the descriptor from scratch (weighted-sum
//! bilinear, string-rotation uniformity) and demands bin-exact agreement.
//! Correlation features get distributional checks, the linear model gets
//! a brute-force pairwise AUC, and the synthesis pipeline gets a
//! two-sample permutation test showing domains differ where the
//! descriptor looks.

use rand::Rng;
use recap_core::baselines::{
    autocorrelations, corr_features, extract_all, lbp_histogram, predict_linear, train_linear,
    Extractor, LinearHyper, CORR_OFFSETS, LBP_DIM,
};
use recap_core::data::{ImageTensor, Label};
use recap_core::rng::{stream, substream, StreamId};
use recap_core::synth::{apply_blur, build_domain, default_domains};

mod common;

/// Pairwise-count AUC: probability a positive outranks a negative, ties
/// counting half. Quadratic and obviously correct.
fn pair_auc(scores: &[f64], labels: &[Label]) -> f64 {
    let mut wins = 0.0f64;
    let mut pairs = 0.0f64;
    for (i, &si) in scores.iter().enumerate() {
        if labels[i] != Label::Recaptured {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] != Label::Original {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// From-scratch uniform LBP. Bilinear is the four-corner weighted sum
/// (a different formulation than the implementation), with an epsilon
/// tie so the weighted sum's ulp drift on flat patches still counts as
/// "neighbor >= center".
fn brute_force_lbp(img: &ImageTensor) -> Vec<f64> {
    let lum = img.luminance();
    let (h, w) = (img.h, img.w);
    let bilinear = |y: f64, x: f64| -> f64 {
        let (r, c) = (y.floor() as usize, x.floor() as usize);
        let (fy, fx) = (y - y.floor(), x - x.floor());
        // Clamp the far corners: when a neighbor lands exactly on a grid
        // line its far weight is 0, but the read must stay in bounds.
        let (r1, c1) = ((r + 1).min(h - 1), (c + 1).min(w - 1));
        let mut v = lum[r * w + c] as f64 * (1.0 - fy) * (1.0 - fx);
        v += lum[r * w + c1] as f64 * (1.0 - fy) * fx;
        v += lum[r1 * w + c] as f64 * fy * (1.0 - fx);
        v += lum[r1 * w + c1] as f64 * fy * fx;
        v
    };
    let uniform_patterns: Vec<u8> = (0..=255u8)
        .filter(|p| {
            let bits: Vec<bool> = (0..8).map(|k| p >> k & 1 == 1).collect();
            let trans = (0..8).filter(|&k| bits[k] != bits[(k + 1) % 8]).count();
            trans <= 2
        })
        .collect();
    assert_eq!(uniform_patterns.len(), 58);
    let mut counts = vec![0u64; LBP_DIM];
    for r in 1..img.h - 1 {
        for c in 1..img.w - 1 {
            let center = lum[r * w + c] as f64;
            let mut pattern = 0u8;
            for k in 0..8 {
                let theta = std::f64::consts::TAU * k as f64 / 8.0;
                let v = bilinear(r as f64 + theta.sin(), c as f64 + theta.cos());
                if v >= center - 1e-12 {
                    pattern |= 1 << k;
                }
            }
            let bin = uniform_patterns
                .iter()
                .position(|&u| u == pattern)
                .unwrap_or(LBP_DIM - 1);
            counts[bin] += 1;
        }
    }
    let total = ((img.h - 2) * (img.w - 2)) as f64;
    counts.iter().map(|&n| n as f64 / total).collect()
}

/// Four-level pseudo-random image: comparison margins are fat except on
/// flat patches, where both formulations agree by the tie rule.
fn leveled_image(seed: u64, n: usize) -> ImageTensor {
    let levels = [0.1f32, 0.35, 0.68, 0.9];
    let vals = common::pseudo_uniform(seed, n * n);
    let mut img = ImageTensor::filled(n, n, [0.0; 3]);
    for r in 0..n {
        for c in 0..n {
            let v = levels[((vals[r * n + c] + 1.0) * 2.0) as usize % 4];
            img.set_pixel(r, c, [v; 3]);
        }
    }
    img
}

#[test]
fn lbp_matches_a_from_scratch_reimplementation() {
    for seed in [1, 2, 3, 4] {
        let img = leveled_image(seed, 14);
        let ours = lbp_histogram(&img).unwrap();
        let brute = brute_force_lbp(&img);
        assert_eq!(ours.values, brute, "seed {seed}");
        assert!((ours.values.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn white_noise_plane_has_near_zero_autocorrelations() {
    let mut rng = stream(11, StreamId::Data);
    let (h, w) = (64, 64);
    let plane: Vec<f64> = (0..h * w).map(|_| rng.random::<f64>() - 0.5).collect();
    let corrs = autocorrelations(&plane, h, w);
    assert_eq!(corrs.len(), CORR_OFFSETS.len());
    for (r, &(dy, dx)) in corrs.iter().zip(&CORR_OFFSETS) {
        assert!(r.abs() < 0.05, "offset ({dy}, {dx}): correlation {r}");
    }
}

#[test]
fn heavy_blur_orders_correlations_by_shift_distance() {
    // Residuals of smoothed content decay slowly: lag-1 correlations must
    // beat lag-2 on a heavily blurred noise field.
    let mut rng = stream(12, StreamId::Data);
    let mut img = ImageTensor::filled(64, 64, [0.0; 3]);
    for v in &mut img.data {
        *v = rng.random::<f32>();
    }
    let blurred = apply_blur(&img, 2.0);
    let fv = corr_features(&blurred).unwrap();
    let idx = |off: (i64, i64)| CORR_OFFSETS.iter().position(|&o| o == off).unwrap();
    for ch in 0..3 {
        let base = ch * CORR_OFFSETS.len();
        let lag1 = (fv.values[base + idx((0, 1))] + fv.values[base + idx((1, 0))]) / 2.0;
        let lag2 = (fv.values[base + idx((0, 2))] + fv.values[base + idx((2, 0))]) / 2.0;
        assert!(lag1 > lag2, "channel {ch}: lag-1 {lag1} vs lag-2 {lag2}");
    }
}

#[test]
fn linear_model_separates_held_out_blobs_perfectly() {
    let mut train_f = Vec::new();
    let mut train_l = Vec::new();
    let mut test_f = Vec::new();
    let mut test_l = Vec::new();
    let noise = common::pseudo_uniform(7, 400);
    for i in 0..50 {
        let (fs, ls, side) = if i % 2 == 0 {
            (&mut train_f, &mut train_l, i)
        } else {
            (&mut test_f, &mut test_l, i)
        };
        let jx = 0.3 * noise[2 * side];
        let jy = 0.3 * noise[2 * side + 1];
        fs.push(recap_core::baselines::FeatureVector {
            values: vec![1.0 + jx, 0.8 + jy],
            extractor: Extractor::Corr,
            sample_id: String::new(),
        });
        ls.push(Label::Recaptured);
        fs.push(recap_core::baselines::FeatureVector {
            values: vec![-1.0 + jy, -0.8 + jx],
            extractor: Extractor::Corr,
            sample_id: String::new(),
        });
        ls.push(Label::Original);
    }
    let model = train_linear(&train_f, &train_l, LinearHyper::default()).unwrap();
    let scores: Vec<f64> =
        test_f.iter().map(|f| predict_linear(&model, f).unwrap()).collect();
    let auc = pair_auc(&scores, &test_l);
    assert_eq!(auc, 1.0, "held-out AUC {auc}");
}

#[test]
fn lbp_plus_linear_beats_chance_inside_a_domain() {
    let ds = build_domain(&default_domains()[0], 30, 32).unwrap();
    let features = extract_all(&ds, Extractor::Lbp).unwrap();
    let labels: Vec<Label> = ds.samples.iter().map(|s| s.label).collect();
    // Alternate pairs into train/test so both halves stay class-balanced.
    let train_idx: Vec<usize> = (0..ds.len()).filter(|i| (i / 2) % 2 == 0).collect();
    let test_idx: Vec<usize> = (0..ds.len()).filter(|i| (i / 2) % 2 == 1).collect();
    let tf: Vec<_> = train_idx.iter().map(|&i| features[i].clone()).collect();
    let tl: Vec<_> = train_idx.iter().map(|&i| labels[i]).collect();
    let model = train_linear(&tf, &tl, LinearHyper::default()).unwrap();
    let scores: Vec<f64> =
        test_idx.iter().map(|&i| predict_linear(&model, &features[i]).unwrap()).collect();
    let test_labels: Vec<Label> = test_idx.iter().map(|&i| labels[i]).collect();
    let auc = pair_auc(&scores, &test_labels);
    assert!(auc > 0.6, "intra-domain LBP AUC {auc}");
}

#[test]
fn domains_differ_under_a_two_sample_permutation_test() {
    // Mean-difference statistic on LBP histograms of recaptured samples
    // from two domains; labels permuted 999 times. The artefact recipes
    // are far apart, so the observed statistic should beat essentially
    // every permutation: p < 0.01.
    let domains = default_domains();
    let a = build_domain(&domains[0], 15, 32).unwrap();
    let b = build_domain(&domains[1], 15, 32).unwrap();
    let feats = |ds: &recap_core::data::Dataset| -> Vec<Vec<f64>> {
        ds.samples
            .iter()
            .filter(|s| s.label == Label::Recaptured)
            .map(|s| lbp_histogram(&s.image).unwrap().values)
            .collect()
    };
    let fa = feats(&a);
    let fb = feats(&b);
    assert_eq!((fa.len(), fb.len()), (15, 15));
    let stat = |xs: &[&Vec<f64>], ys: &[&Vec<f64>]| -> f64 {
        let mut t = 0.0;
        for d in 0..LBP_DIM {
            let ma = xs.iter().map(|v| v[d]).sum::<f64>() / xs.len() as f64;
            let mb = ys.iter().map(|v| v[d]).sum::<f64>() / ys.len() as f64;
            t += (ma - mb).powi(2);
        }
        t
    };
    let observed = stat(&fa.iter().collect::<Vec<_>>(), &fb.iter().collect::<Vec<_>>());
    let pooled: Vec<&Vec<f64>> = fa.iter().chain(fb.iter()).collect();
    let mut hits = 0usize;
    let rounds = 999;
    for round in 0..rounds {
        let mut idx: Vec<usize> = (0..pooled.len()).collect();
        // Fisher-Yates with the crate's seeded substreams.
        let mut rng = substream(99, StreamId::Shuffle, round as u64);
        for i in (1..idx.len()).rev() {
            let j = rng.random_range(0..=i);
            idx.swap(i, j);
        }
        let xs: Vec<&Vec<f64>> = idx[..fa.len()].iter().map(|&i| pooled[i]).collect();
        let ys: Vec<&Vec<f64>> = idx[fa.len()..].iter().map(|&i| pooled[i]).collect();
        if stat(&xs, &ys) >= observed {
            hits += 1;
        }
    }
    let p = (1 + hits) as f64 / (rounds + 1) as f64;
    assert!(p < 0.01, "permutation test p = {p}");
}
