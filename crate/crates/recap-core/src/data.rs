//! Core sample and dataset types shared by every stage of the pipeline.
//!
//! Images are float RGB in `[0, 1]`, row-major, channel-interleaved. The
//! positive class throughout the crate is `Recaptured`, and it sits at class
//! index 0 (`Original` is index 1); every confusion matrix, score vector, and
//! loss target uses that ordering.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// Binary ground-truth label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    /// Screen recapture of a displayed image (the positive class, index 0).
    Recaptured,
    /// Straight capture of the scene (index 1).
    Original,
}

impl Label {
    /// Class index used for logits, losses, and confusion matrices.
    pub fn class_index(self) -> usize {
        match self {
            Label::Recaptured => 0,
            Label::Original => 1,
        }
    }

    pub fn from_class_index(idx: usize) -> Result<Self> {
        match idx {
            0 => Ok(Label::Recaptured),
            1 => Ok(Label::Original),
            _ => Err(Error::InvalidInput(format!("class index {idx} out of range"))),
        }
    }

    /// Name used in manifests and CSVs; the closed label set.
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Recaptured => "recaptured",
            Label::Original => "original",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "recaptured" => Ok(Label::Recaptured),
            "original" => Ok(Label::Original),
            other => Err(Error::Manifest(format!(
                "unknown label {other:?}; expected \"original\" or \"recaptured\""
            ))),
        }
    }
}

/// Float RGB image, `[0, 1]`, row-major, channel-interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    pub h: usize,
    pub w: usize,
    /// Length `h * w * 3`, layout `[r, g, b]` per pixel.
    pub data: Vec<f32>,
}

impl ImageTensor {
    pub fn new(h: usize, w: usize, data: Vec<f32>) -> Result<Self> {
        if h == 0 || w == 0 {
            return Err(Error::InvalidInput(format!("image extent {h}x{w} is empty")));
        }
        if data.len() != h * w * 3 {
            return Err(Error::InvalidInput(format!(
                "image buffer holds {} values, {}x{}x3 = {} expected",
                data.len(),
                h,
                w,
                h * w * 3
            )));
        }
        Ok(ImageTensor { h, w, data })
    }

    /// Solid-color image.
    pub fn filled(h: usize, w: usize, rgb: [f32; 3]) -> Self {
        let mut data = Vec::with_capacity(h * w * 3);
        for _ in 0..h * w {
            data.extend_from_slice(&rgb);
        }
        ImageTensor { h, w, data }
    }

    #[inline]
    pub fn pixel(&self, r: usize, c: usize) -> [f32; 3] {
        let i = (r * self.w + c) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, r: usize, c: usize, rgb: [f32; 3]) {
        let i = (r * self.w + c) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize, ch: usize) -> f32 {
        self.data[(r * self.w + c) * 3 + ch]
    }

    /// Rec. 601 luma, one value per pixel.
    pub fn luminance(&self) -> Vec<f32> {
        self.data
            .chunks_exact(3)
            .map(|p| 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2])
            .collect()
    }

    /// Clamps every value into `[0, 1]` in place.
    pub fn clamp_unit(&mut self) {
        for v in &mut self.data {
            *v = v.clamp(0.0, 1.0);
        }
    }
}

/// One labeled image with its provenance.
#[derive(Debug, Clone)]
pub struct Sample {
    /// Unique within a dataset; manifests and CSVs key on it.
    pub id: String,
    pub domain: String,
    pub label: Label,
    pub image: ImageTensor,
}

/// A flat bag of samples. Order is meaningful: splits and shuffles index
/// into it, so two datasets with the same samples in the same order behave
/// identically.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>) -> Self {
        Dataset { samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Distinct domain names in first-appearance order.
    pub fn domains(&self) -> Vec<String> {
        let mut seen = Vec::new();
        for s in &self.samples {
            if !seen.contains(&s.domain) {
                seen.push(s.domain.clone());
            }
        }
        seen
    }

    /// Concatenates datasets, preserving argument order.
    pub fn concat(parts: &[&Dataset]) -> Dataset {
        let mut samples = Vec::new();
        for p in parts {
            samples.extend(p.samples.iter().cloned());
        }
        Dataset { samples }
    }

    /// Fails if any id appears twice; split audits rely on unique ids.
    pub fn check_unique_ids(&self) -> Result<()> {
        let mut ids: Vec<&str> = self.samples.iter().map(|s| s.id.as_str()).collect();
        ids.sort_unstable();
        for w in ids.windows(2) {
            if w[0] == w[1] {
                return Err(Error::InvalidInput(format!("duplicate sample id {:?}", w[0])));
            }
        }
        Ok(())
    }
}
