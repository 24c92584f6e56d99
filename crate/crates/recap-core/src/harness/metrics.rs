//! Confusion-matrix metrics, ROC curves, and AUC.
//!
//! Scores are recapture confidences (higher = more likely recaptured);
//! recaptured is the positive class throughout. The confusion matrix uses
//! the fixed 0.5 threshold, the ROC sweeps every distinct score, and AUC
//! integrates it by trapezoid. Single-class evaluations still report the
//! threshold metrics but carry no ROC/AUC.

use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::error::Error;
use crate::Result;

/// One ROC operating point: predict positive iff `score >= threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    pub threshold: f64,
}

/// Everything the evaluation tables need for one test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Absent when the test set contains a single class.
    pub auc: Option<f64>,
    pub roc: Vec<RocPoint>,
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_from(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Computes the full report from per-sample scores and true labels.
pub fn compute_metrics(scores: &[f64], labels: &[Label]) -> Result<MetricsReport> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidInput(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.is_empty() {
        return Err(Error::InvalidInput("cannot evaluate an empty test set".to_string()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Runtime("non-finite score in evaluation".to_string()));
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0usize, 0, 0, 0);
    for (&s, &l) in scores.iter().zip(labels) {
        let predicted_positive = s >= 0.5;
        match (predicted_positive, l == Label::Recaptured) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let total = scores.len() as f64;
    let accuracy = (tp + tn) as f64 / total;
    let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
    let f1 = f1_from(precision, recall);

    let positives = (tp + fn_) as f64;
    let negatives = (fp + tn) as f64;
    let (roc, auc) = if positives == 0.0 || negatives == 0.0 {
        (Vec::new(), None)
    } else {
        let roc = roc_points(scores, labels, positives, negatives);
        let auc = trapezoid(&roc);
        (roc, Some(auc))
    };
    Ok(MetricsReport { tp, fp, tn, fn_, accuracy, precision, recall, f1, auc, roc })
}

/// Sweeps thresholds from +inf down through every distinct score.
fn roc_points(scores: &[f64], labels: &[Label], positives: f64, negatives: f64) -> Vec<RocPoint> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
    let mut points = vec![RocPoint { fpr: 0.0, tpr: 0.0, threshold: f64::INFINITY }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let t = scores[order[i]];
        // Consume the whole tie group before emitting a point.
        while i < order.len() && scores[order[i]] == t {
            if labels[order[i]] == Label::Recaptured {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            fpr: fp as f64 / negatives,
            tpr: tp as f64 / positives,
            threshold: t,
        });
    }
    points
}

/// Trapezoidal area under the ROC polyline.
fn trapezoid(points: &[RocPoint]) -> f64 {
    let mut area = 0.0;
    for w in points.windows(2) {
        area += (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0;
    }
    area.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(pattern: &[u8]) -> Vec<Label> {
        pattern
            .iter()
            .map(|&b| if b == 1 { Label::Recaptured } else { Label::Original })
            .collect()
    }

    #[test]
    fn perfect_separation_scores_auc_one() {
        let scores = [0.9, 0.8, 0.2, 0.1];
        let report = compute_metrics(&scores, &labels(&[1, 1, 0, 0])).unwrap();
        assert_eq!(report.auc, Some(1.0));
        assert_eq!((report.tp, report.fp, report.tn, report.fn_), (2, 0, 2, 0));
        assert_eq!(report.accuracy, 1.0);
        assert_eq!(report.f1, 1.0);
        // A perfect ROC passes through (0, 1).
        assert!(report.roc.iter().any(|p| p.fpr == 0.0 && p.tpr == 1.0));
    }

    #[test]
    fn all_equal_scores_give_auc_half() {
        let scores = [0.5; 6];
        let report = compute_metrics(&scores, &labels(&[1, 0, 1, 0, 1, 0])).unwrap();
        assert_eq!(report.auc, Some(0.5));
        assert_eq!(report.roc.len(), 2);
    }

    #[test]
    fn reversed_classifier_scores_auc_zero() {
        let scores = [0.1, 0.2, 0.8, 0.9];
        let report = compute_metrics(&scores, &labels(&[1, 1, 0, 0])).unwrap();
        assert_eq!(report.auc, Some(0.0));
    }

    #[test]
    fn confusion_identities_hold() {
        let scores = [0.9, 0.6, 0.4, 0.3, 0.7, 0.2];
        let lab = labels(&[1, 0, 1, 0, 1, 1]);
        let r = compute_metrics(&scores, &lab).unwrap();
        let total = (r.tp + r.fp + r.tn + r.fn_) as f64;
        assert_eq!(total as usize, scores.len());
        assert_eq!(r.accuracy, (r.tp + r.tn) as f64 / total);
        assert_eq!(r.precision, r.tp as f64 / (r.tp + r.fp) as f64);
        assert_eq!(r.recall, r.tp as f64 / (r.tp + r.fn_) as f64);
        assert_eq!(r.f1, f1_from(r.precision, r.recall));
    }

    #[test]
    fn single_class_reports_no_auc() {
        let scores = [0.9, 0.4, 0.6];
        let report = compute_metrics(&scores, &labels(&[1, 1, 1])).unwrap();
        assert_eq!(report.auc, None);
        assert!(report.roc.is_empty());
        assert_eq!(report.recall, 2.0 / 3.0);
        assert_eq!(report.precision, 1.0);
    }

    #[test]
    fn roc_is_monotone_in_both_coordinates() {
        let scores = [0.1, 0.9, 0.5, 0.5, 0.3, 0.8, 0.2, 0.7];
        let lab = labels(&[0, 1, 1, 0, 0, 1, 1, 0]);
        let r = compute_metrics(&scores, &lab).unwrap();
        for w in r.roc.windows(2) {
            assert!(w[1].fpr >= w[0].fpr);
            assert!(w[1].tpr >= w[0].tpr);
            assert!(w[1].threshold < w[0].threshold);
        }
        let last = r.roc.last().unwrap();
        assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
    }

    #[test]
    fn published_precision_recall_pair_gives_the_published_f1() {
        // 99.66 precision with total recall harmonically averages to 99.83.
        let f1 = 100.0 * f1_from(0.9966, 1.0);
        assert!((f1 - 99.83).abs() < 0.005, "f1 {f1}");
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        assert!(compute_metrics(&[], &[]).is_err());
        assert!(compute_metrics(&[0.5], &labels(&[1, 0])).is_err());
        assert!(compute_metrics(&[f64::NAN], &labels(&[1])).is_err());
    }
}
