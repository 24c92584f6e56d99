//! Linear max-margin classifier (hinge loss + L2, primal subgradient).
//!
//! A small Pegasos-style trainer: per-example subgradient steps with the
//! 1/(λt) schedule, one shuffled pass per epoch. Deterministic given the
//! seed. The positive class is `Recaptured`, so positive scores feed the
//! ROC as recapture confidence.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::baselines::FeatureVector;
use crate::data::Label;
use crate::error::Error;
use crate::rng::{substream, StreamId};
use crate::Result;

/// Trainer settings; the defaults suit 50-dim descriptors at desk scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearHyper {
    /// L2 regularization strength; must be positive.
    pub lambda: f64,
    /// Full passes over the training set.
    pub epochs: usize,
    /// Seeds the per-epoch shuffles.
    pub seed: u64,
}

impl Default for LinearHyper {
    fn default() -> Self {
        LinearHyper { lambda: 1e-4, epochs: 60, seed: 0 }
    }
}

/// Trained linear decision function `score = w·x + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub hyper: LinearHyper,
}

/// `+1` for the positive (recaptured) class, `-1` otherwise.
fn sign_of(label: Label) -> f64 {
    match label {
        Label::Recaptured => 1.0,
        Label::Original => -1.0,
    }
}

/// Fits hinge loss + L2 by Pegasos subgradient descent.
///
/// Requires both classes. If every feature vector is identical the margin
/// carries no information, and training falls back to the constant
/// majority-class model (zero weights, bias ±1, ties to recaptured).
pub fn train_linear(
    features: &[FeatureVector],
    labels: &[Label],
    hyper: LinearHyper,
) -> Result<LinearModel> {
    if features.len() != labels.len() {
        return Err(Error::InvalidInput(format!(
            "{} feature vectors vs {} labels",
            features.len(),
            labels.len()
        )));
    }
    if features.len() < 2 {
        return Err(Error::InvalidInput("training needs at least 2 samples".to_string()));
    }
    let dim = features[0].values.len();
    for fv in features {
        if fv.values.len() != dim {
            return Err(Error::shape("feature dimensions", &[dim], &[fv.values.len()]));
        }
    }
    let positives = labels.iter().filter(|&&l| l == Label::Recaptured).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::InvalidInput(
            "training needs both classes present".to_string(),
        ));
    }
    if hyper.lambda <= 0.0 || !hyper.lambda.is_finite() {
        return Err(Error::config(format!("lambda {} must be positive", hyper.lambda)));
    }
    if hyper.epochs == 0 {
        return Err(Error::config("epochs must be positive"));
    }
    if features.windows(2).all(|w| w[0].values == w[1].values) {
        let majority = if 2 * positives >= labels.len() { 1.0 } else { -1.0 };
        return Ok(LinearModel { weights: vec![0.0; dim], bias: majority, hyper });
    }

    // The bias rides along as a constant-1 feature so the 1/(λt) schedule
    // and the norm projection cover it too; unregularized bias under these
    // huge early steps drifts and never recovers.
    let mut w = vec![0.0f64; dim + 1];
    let mut order: Vec<usize> = (0..features.len()).collect();
    let radius = 1.0 / hyper.lambda.sqrt();
    let mut t = 0u64;
    for epoch in 0..hyper.epochs {
        order.shuffle(&mut substream(hyper.seed, StreamId::Shuffle, epoch as u64));
        for &i in &order {
            t += 1;
            let eta = 1.0 / (hyper.lambda * t as f64);
            let y = sign_of(labels[i]);
            let x = &features[i].values;
            let margin = y * (dot(&w[..dim], x) + w[dim]);
            // L2 shrinkage applies every step; the hinge term only inside
            // the margin.
            let shrink = 1.0 - eta * hyper.lambda;
            for wj in w.iter_mut() {
                *wj *= shrink;
            }
            if margin < 1.0 {
                for (wj, xj) in w.iter_mut().zip(x.iter().chain(std::iter::once(&1.0))) {
                    *wj += eta * y * xj;
                }
            }
            // Project back onto the ball the optimum is known to live in;
            // this tames the enormous first steps of the 1/(λt) schedule.
            let norm = dot(&w, &w).sqrt();
            if norm > radius {
                let scale = radius / norm;
                for wj in w.iter_mut() {
                    *wj *= scale;
                }
            }
        }
    }
    let bias = w[dim];
    w.truncate(dim);
    Ok(LinearModel { weights: w, bias, hyper })
}

/// Decision score `w·x + b`; sign is the class, magnitude feeds the ROC.
pub fn predict_linear(model: &LinearModel, feature: &FeatureVector) -> Result<f64> {
    if feature.values.len() != model.weights.len() {
        return Err(Error::shape(
            "predict dimensions",
            &[model.weights.len()],
            &[feature.values.len()],
        ));
    }
    Ok(dot(&model.weights, &feature.values) + model.bias)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::Extractor;

    fn fv(values: Vec<f64>) -> FeatureVector {
        FeatureVector { values, extractor: Extractor::Lbp, sample_id: String::new() }
    }

    /// Two well-separated 2-D blobs, `n` points per class.
    fn blobs(n: usize, gap: f64) -> (Vec<FeatureVector>, Vec<Label>) {
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let jx = (i % 5) as f64 * 0.1;
            let jy = (i % 7) as f64 * 0.07;
            features.push(fv(vec![gap + jx, gap + jy]));
            labels.push(Label::Recaptured);
            features.push(fv(vec![-gap - jx, -gap - jy]));
            labels.push(Label::Original);
        }
        (features, labels)
    }

    #[test]
    fn separable_blobs_reach_full_training_accuracy() {
        let (features, labels) = blobs(20, 1.0);
        let model = train_linear(&features, &labels, LinearHyper::default()).unwrap();
        for (f, &l) in features.iter().zip(&labels) {
            let score = predict_linear(&model, f).unwrap();
            assert!(score * sign_of(l) > 0.0, "score {score} for {l:?}");
        }
    }

    #[test]
    fn flipping_labels_negates_the_decision_function() {
        let (features, labels) = blobs(12, 0.8);
        let flipped: Vec<Label> = labels
            .iter()
            .map(|&l| if l == Label::Recaptured { Label::Original } else { Label::Recaptured })
            .collect();
        let m1 = train_linear(&features, &labels, LinearHyper::default()).unwrap();
        let m2 = train_linear(&features, &flipped, LinearHyper::default()).unwrap();
        for (a, b) in m1.weights.iter().zip(&m2.weights) {
            assert!((a + b).abs() < 1e-9, "{a} vs {b}");
        }
        assert!((m1.bias + m2.bias).abs() < 1e-9);
    }

    #[test]
    fn identical_features_fall_back_to_majority_class() {
        let features = vec![fv(vec![0.5, 0.5]); 5];
        let labels = vec![
            Label::Recaptured,
            Label::Recaptured,
            Label::Recaptured,
            Label::Original,
            Label::Original,
        ];
        let model = train_linear(&features, &labels, LinearHyper::default()).unwrap();
        assert_eq!(model.weights, vec![0.0, 0.0]);
        assert_eq!(model.bias, 1.0);
        let score = predict_linear(&model, &features[0]).unwrap();
        assert_eq!(score, 1.0);
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        let (features, labels) = blobs(3, 1.0);
        // Single class.
        let one_class = vec![Label::Recaptured; features.len()];
        assert!(train_linear(&features, &one_class, LinearHyper::default()).is_err());
        // Too few samples.
        assert!(train_linear(&features[..1], &labels[..1], LinearHyper::default()).is_err());
        // Mismatched lengths.
        assert!(train_linear(&features, &labels[..3], LinearHyper::default()).is_err());
        // Ragged dimensions.
        let ragged = vec![fv(vec![1.0]), fv(vec![1.0, 2.0])];
        assert!(train_linear(&ragged, &labels[..2], LinearHyper::default()).is_err());
        // Bad hyperparameters.
        let bad = LinearHyper { lambda: 0.0, ..Default::default() };
        assert!(train_linear(&features, &labels, bad).is_err());
    }

    #[test]
    fn prediction_is_affine_in_the_input() {
        let model = LinearModel {
            weights: vec![0.3, -0.7, 2.0],
            bias: 0.25,
            hyper: LinearHyper::default(),
        };
        let x1 = fv(vec![1.0, 2.0, -1.0]);
        let x2 = fv(vec![0.5, -0.25, 3.0]);
        let sum = fv(x1.values.iter().zip(&x2.values).map(|(a, b)| a + b).collect());
        let p1 = predict_linear(&model, &x1).unwrap();
        let p2 = predict_linear(&model, &x2).unwrap();
        let ps = predict_linear(&model, &sum).unwrap();
        assert!((ps - (p1 + p2 - model.bias)).abs() < 1e-12);
        // Zero weights score the bias everywhere.
        let zero = LinearModel { weights: vec![0.0; 3], bias: 0.3, hyper: LinearHyper::default() };
        assert_eq!(predict_linear(&zero, &x1).unwrap(), 0.3);
    }

    #[test]
    fn training_is_deterministic_in_the_seed() {
        let (features, labels) = blobs(10, 0.6);
        let h = LinearHyper { seed: 9, ..Default::default() };
        let m1 = train_linear(&features, &labels, h).unwrap();
        let m2 = train_linear(&features, &labels, h).unwrap();
        assert_eq!(m1, m2);
        let m3 =
            train_linear(&features, &labels, LinearHyper { seed: 10, ..h }).unwrap();
        assert_ne!(m1.weights, m3.weights);
    }
}
