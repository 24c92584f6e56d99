//! Handcrafted forensic baselines.
//!
//! Two classic texture descriptors — uniform LBP histograms and noise-
//! residual correlation features — each feeding a small linear max-margin
//! classifier. They anchor the evaluation: a learned detector has to beat
//! what thirty lines of feature engineering already buy, and the gap
//! between intra- and cross-domain scores shows up here first.

mod corr;
mod lbp;
mod linear;

pub use corr::{autocorrelations, corr_features, CORR_DIM, CORR_OFFSETS};
pub use lbp::{lbp_histogram, LBP_DIM};
pub use linear::{predict_linear, train_linear, LinearHyper, LinearModel};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Sample};
use crate::Result;

/// Which descriptor produced a feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extractor {
    Lbp,
    Corr,
}

impl Extractor {
    pub fn dim(self) -> usize {
        match self {
            Extractor::Lbp => LBP_DIM,
            Extractor::Corr => CORR_DIM,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Extractor::Lbp => "lbp",
            Extractor::Corr => "corr",
        }
    }
}

/// A fixed-length descriptor tied back to the sample it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub extractor: Extractor,
    /// Empty when extracted from a bare image rather than a dataset sample.
    pub sample_id: String,
}

/// Extracts one sample, stamping its id onto the vector.
pub fn extract_sample(sample: &Sample, extractor: Extractor) -> Result<FeatureVector> {
    let mut fv = match extractor {
        Extractor::Lbp => lbp_histogram(&sample.image)?,
        Extractor::Corr => corr_features(&sample.image)?,
    };
    fv.sample_id = sample.id.clone();
    Ok(fv)
}

/// Extracts every sample in dataset order. Work is parallel across images;
/// the output order is the dataset order regardless of thread count.
pub fn extract_all(ds: &Dataset, extractor: Extractor) -> Result<Vec<FeatureVector>> {
    ds.samples
        .par_iter()
        .map(|s| extract_sample(s, extractor))
        .collect()
}
