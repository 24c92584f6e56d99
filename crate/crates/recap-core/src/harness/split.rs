//! Stratified train/validation/test splitting.
//!
//! Samples are grouped into (domain, class) cells; each cell is shuffled
//! with its own seeded substream and apportioned by largest remainder, so
//! every cell lands in every split whenever it has at least three members
//! and the overall ratios hold as exactly as integer counts allow.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::Error;
use crate::rng::{substream, StreamId};
use crate::Result;

/// Split ratios and the seed for the per-cell shuffles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec { train: 0.8, val: 0.1, test: 0.1, seed: 0 }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        for (name, f) in [("train", self.train), ("val", self.val), ("test", self.test)] {
            if !f.is_finite() || f <= 0.0 {
                problems.push(format!("{name} fraction {f} must be positive"));
            }
        }
        if (self.train + self.val + self.test - 1.0).abs() > 1e-9 {
            problems.push(format!(
                "fractions sum to {}, not 1",
                self.train + self.val + self.test
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config { problems })
        }
    }
}

/// Largest-remainder apportionment of `n` into three non-negative parts.
/// When `n >= 3`, every part is kept non-empty by donating from the
/// largest part (each split must see each cell when feasible).
fn apportion(n: usize, fractions: [f64; 3]) -> [usize; 3] {
    let mut parts = [0usize; 3];
    let mut remainders = [0.0f64; 3];
    let mut assigned = 0;
    for i in 0..3 {
        let quota = n as f64 * fractions[i];
        parts[i] = quota.floor() as usize;
        remainders[i] = quota - quota.floor();
        assigned += parts[i];
    }
    // Hand out leftovers by remainder, ties resolved train > val > test.
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| remainders[b].partial_cmp(&remainders[a]).unwrap().then(a.cmp(&b)));
    for &i in order.iter().cycle().take(n - assigned) {
        parts[i] += 1;
    }
    if n >= 3 {
        for i in 0..3 {
            if parts[i] == 0 {
                let donor =
                    (0..3).max_by_key(|&j| parts[j]).expect("three parts");
                parts[donor] -= 1;
                parts[i] += 1;
            }
        }
    }
    parts
}

/// Splits stratified by (domain, class). Deterministic in the spec's seed;
/// the three outputs are disjoint and exhaustive, preserving dataset order
/// inside each split.
pub fn split_8_1_1(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset, Dataset)> {
    spec.validate()?;
    if ds.is_empty() {
        return Err(Error::InvalidInput("cannot split an empty dataset".to_string()));
    }
    // Cells keyed by (domain, class), ordered for stable substream indices.
    let mut cells: Vec<((String, usize), Vec<usize>)> = Vec::new();
    for (i, s) in ds.samples.iter().enumerate() {
        let key = (s.domain.clone(), s.label.class_index());
        match cells.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(i),
            None => cells.push((key, vec![i])),
        }
    }
    cells.sort_by(|a, b| a.0.cmp(&b.0));

    let mut assignment = vec![0u8; ds.len()];
    for (cell_idx, (_, indices)) in cells.iter().enumerate() {
        let mut shuffled = indices.clone();
        shuffled.shuffle(&mut substream(spec.seed, StreamId::Split, cell_idx as u64));
        let [n_train, n_val, _] =
            apportion(shuffled.len(), [spec.train, spec.val, spec.test]);
        for (pos, &sample_idx) in shuffled.iter().enumerate() {
            assignment[sample_idx] = if pos < n_train {
                0
            } else if pos < n_train + n_val {
                1
            } else {
                2
            };
        }
    }
    let collect = |which: u8| -> Dataset {
        Dataset::new(
            ds.samples
                .iter()
                .enumerate()
                .filter(|(i, _)| assignment[*i] == which)
                .map(|(_, s)| s.clone())
                .collect(),
        )
    };
    Ok((collect(0), collect(1), collect(2)))
}
