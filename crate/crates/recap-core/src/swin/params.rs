//! Parameter storage for the classifier.
//!
//! Every parameter tensor has a canonical name and a canonical position,
//! both pure functions of the config, so the optimizer state, checkpoint
//! layout, and initialization draw order all agree without coordination.
//! Weight matrices draw from a truncated normal (σ = 0.02, cut at ±2σ);
//! biases and norm offsets start at zero, norm gains at one.

use std::collections::HashMap;

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Error;
use crate::rng::{stream, StreamId};
use crate::swin::config::{SwinConfig, STAGES};
use crate::swin::windows;
use crate::tensor::{Element, Tensor};
use crate::Result;

/// How a tensor is filled at initialization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Init {
    TruncNormal,
    Zeros,
    Ones,
}

/// One registry row: canonical name, shape, and init rule.
struct Entry {
    name: String,
    shape: Vec<usize>,
    init: Init,
}

/// Enumerates every parameter in canonical (network) order.
fn registry(cfg: &SwinConfig) -> Vec<Entry> {
    let mut out = Vec::new();
    let mut push = |name: String, shape: Vec<usize>, init: Init| {
        out.push(Entry { name, shape, init });
    };
    push(
        "patch_embed.weight".into(),
        vec![cfg.patch_dim(), cfg.embed_dim],
        Init::TruncNormal,
    );
    push("patch_embed.bias".into(), vec![cfg.embed_dim], Init::Zeros);
    for s in 0..STAGES {
        let c = cfg.stage_channels(s);
        let hidden = cfg.mlp_ratio * c;
        let (m, _) = cfg.window_for_stage(s);
        for b in 0..cfg.depths[s] {
            let p = format!("stage{s}.block{b}");
            push(format!("{p}.ln1.gamma"), vec![c], Init::Ones);
            push(format!("{p}.ln1.beta"), vec![c], Init::Zeros);
            push(format!("{p}.qkv.weight"), vec![c, 3 * c], Init::TruncNormal);
            push(format!("{p}.qkv.bias"), vec![3 * c], Init::Zeros);
            push(format!("{p}.proj.weight"), vec![c, c], Init::TruncNormal);
            push(format!("{p}.proj.bias"), vec![c], Init::Zeros);
            push(format!("{p}.ln2.gamma"), vec![c], Init::Ones);
            push(format!("{p}.ln2.beta"), vec![c], Init::Zeros);
            push(format!("{p}.mlp.fc1.weight"), vec![c, hidden], Init::TruncNormal);
            push(format!("{p}.mlp.fc1.bias"), vec![hidden], Init::Zeros);
            push(format!("{p}.mlp.fc2.weight"), vec![hidden, c], Init::TruncNormal);
            push(format!("{p}.mlp.fc2.bias"), vec![c], Init::Zeros);
            if cfg.use_attention_bias {
                push(
                    format!("{p}.attn_bias.table"),
                    vec![windows::bias_table_rows(m), cfg.num_heads[s]],
                    Init::TruncNormal,
                );
            }
        }
        if s + 1 < STAGES {
            push(format!("merge{s}.weight"), vec![4 * c, 2 * c], Init::TruncNormal);
        }
    }
    push(
        "head.weight".into(),
        vec![cfg.feature_dim(), SwinConfig::NUM_CLASSES],
        Init::TruncNormal,
    );
    push("head.bias".into(), vec![SwinConfig::NUM_CLASSES], Init::Zeros);
    out
}

/// Total scalar count for a config.
pub fn param_count(cfg: &SwinConfig) -> usize {
    registry(cfg).iter().map(|e| e.shape.iter().product::<usize>()).sum()
}

fn trunc_normal<F: Element>(rng: &mut ChaCha8Rng, n: usize) -> Vec<F> {
    let unit = Normal::new(0.0f64, 1.0).unwrap();
    (0..n)
        .map(|_| {
            let z = loop {
                let z = unit.sample(rng);
                if z.abs() <= 2.0 {
                    break z;
                }
            };
            F::from_f64(z * 0.02)
        })
        .collect()
}

/// The full parameter set of one model, tensors in canonical order.
#[derive(Debug, Clone)]
pub struct SwinParams<F: Element> {
    config: SwinConfig,
    names: Vec<String>,
    tensors: Vec<Tensor<F>>,
    by_name: HashMap<String, usize>,
}

impl<F: Element> SwinParams<F> {
    fn assemble(
        config: SwinConfig,
        names: Vec<String>,
        tensors: Vec<Tensor<F>>,
    ) -> Self {
        let by_name =
            names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        SwinParams { config, names, tensors, by_name }
    }

    /// Fresh parameters for `cfg`, drawn deterministically from `seed`.
    pub fn init(cfg: &SwinConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = stream(seed, StreamId::Params);
        let mut names = Vec::new();
        let mut tensors = Vec::new();
        for entry in registry(cfg) {
            let n = entry.shape.iter().product();
            let data = match entry.init {
                Init::TruncNormal => trunc_normal(&mut rng, n),
                Init::Zeros => vec![F::ZERO; n],
                Init::Ones => vec![F::ONE; n],
            };
            names.push(entry.name);
            tensors.push(Tensor::from_vec(entry.shape, data)?);
        }
        Ok(Self::assemble(cfg.clone(), names, tensors))
    }

    /// Rebuilds a parameter set from named tensors (checkpoint load). The
    /// tensors must match the canonical registry exactly — same order, same
    /// names, same shapes.
    pub fn from_tensors(
        cfg: &SwinConfig,
        named: Vec<(String, Tensor<F>)>,
    ) -> Result<Self> {
        cfg.validate()?;
        let reg = registry(cfg);
        if named.len() != reg.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} parameter tensors, found {}",
                reg.len(),
                named.len()
            )));
        }
        let mut names = Vec::with_capacity(reg.len());
        let mut tensors = Vec::with_capacity(reg.len());
        for (entry, (name, tensor)) in reg.into_iter().zip(named) {
            if name != entry.name {
                return Err(Error::Checkpoint(format!(
                    "parameter {name:?} out of place; expected {:?}",
                    entry.name
                )));
            }
            if tensor.shape() != entry.shape.as_slice() {
                return Err(Error::shape(
                    format!("checkpoint tensor {name}"),
                    &entry.shape,
                    tensor.shape(),
                ));
            }
            names.push(name);
            tensors.push(tensor);
        }
        Ok(Self::assemble(cfg.clone(), names, tensors))
    }

    pub fn config(&self) -> &SwinConfig {
        &self.config
    }

    /// Number of parameter tensors.
    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Total scalar count.
    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(|t| t.len()).sum()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.by_name.get(name).copied()
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<F>> {
        self.index_of(name).map(|i| &self.tensors[i])
    }

    pub fn tensors(&self) -> &[Tensor<F>] {
        &self.tensors
    }

    /// Mutable access for the optimizer; order is canonical.
    pub fn tensors_mut(&mut self) -> &mut [Tensor<F>] {
        &mut self.tensors
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<F>)> {
        self.names.iter().map(String::as_str).zip(self.tensors.iter())
    }

    /// Element-type conversion, e.g. f32 weights → f64 gradient checking.
    pub fn cast<G: Element>(&self) -> SwinParams<G> {
        SwinParams::assemble(
            self.config.clone(),
            self.names.clone(),
            self.tensors.iter().map(Tensor::cast).collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_parameter_count_matches_the_hand_derived_total() {
        // patch embed 48·32+32 = 1 568; a width-c block holds 12c² + 13c
        // (2c+2c norms, 3c²+3c qkv, c²+c proj, 8c²+5c mlp), two blocks per
        // stage at c = 32/64/128/256; merges 128·64 + 256·128 + 512·256;
        // head 256·2 + 2. Total 2 275 554.
        assert_eq!(param_count(&SwinConfig::toy()), 2_275_554);
    }

    #[test]
    fn bias_tables_add_exactly_their_own_size() {
        // Per stage: (2m−1)² rows × heads per block; windows clamp to the
        // grid, so stage 3 uses m = 2. 2·(49·2 + 49·4 + 49·8 + 9·16) = 1 660.
        let cfg = SwinConfig { use_attention_bias: true, ..SwinConfig::toy() };
        assert_eq!(param_count(&cfg), 2_275_554 + 1_660);
    }

    #[test]
    fn init_is_deterministic_in_the_seed() {
        let cfg = SwinConfig::toy();
        let a = SwinParams::<f32>::init(&cfg, 7).unwrap();
        let b = SwinParams::<f32>::init(&cfg, 7).unwrap();
        let c = SwinParams::<f32>::init(&cfg, 8).unwrap();
        assert_eq!(a.scalar_count(), 2_275_554);
        for i in 0..a.len() {
            assert_eq!(a.tensors()[i].data(), b.tensors()[i].data());
        }
        let first = a.get("patch_embed.weight").unwrap().data()[0];
        let other = c.get("patch_embed.weight").unwrap().data()[0];
        assert_ne!(first, other);
    }

    #[test]
    fn init_rules_hold_per_tensor_kind() {
        let params =
            SwinParams::<f32>::init(&SwinConfig::toy(), 0).unwrap();
        for (name, t) in params.iter() {
            if name.ends_with(".gamma") {
                assert!(t.data().iter().all(|&v| v == 1.0), "{name}");
            } else if name.ends_with(".beta") || name.ends_with(".bias") {
                assert!(t.data().iter().all(|&v| v == 0.0), "{name}");
            } else {
                // Truncated normal: everything within ±2σ of zero and not
                // degenerate.
                assert!(t.data().iter().all(|&v| v.abs() <= 0.04), "{name}");
                assert!(t.data().iter().any(|&v| v != 0.0), "{name}");
            }
        }
    }

    #[test]
    fn names_are_unique_and_indexable() {
        let params =
            SwinParams::<f32>::init(&SwinConfig::toy(), 0).unwrap();
        for i in 0..params.len() {
            assert_eq!(params.index_of(params.name(i)), Some(i));
        }
    }

    #[test]
    fn eight_pixel_patches_project_from_192_values() {
        let cfg = SwinConfig {
            input_size: 128,
            patch_size: 8,
            ..SwinConfig::toy()
        };
        cfg.validate().unwrap();
        assert_eq!(cfg.patch_dim(), 192);
        let params = SwinParams::<f32>::init(&cfg, 0).unwrap();
        assert_eq!(params.get("patch_embed.weight").unwrap().shape(), [192, 32]);
    }

    #[test]
    fn rebuild_rejects_shape_and_name_drift() {
        let cfg = SwinConfig::toy();
        let params = SwinParams::<f32>::init(&cfg, 0).unwrap();
        let named: Vec<(String, Tensor<f32>)> = params
            .iter()
            .map(|(n, t)| (n.to_string(), t.clone()))
            .collect();
        assert!(SwinParams::from_tensors(&cfg, named.clone()).is_ok());

        let mut renamed = named.clone();
        renamed[3].0 = "stage0.block0.ln1.betaX".into();
        assert!(SwinParams::from_tensors(&cfg, renamed).is_err());

        let mut reshaped = named;
        reshaped[0].1 = Tensor::zeros(vec![1, 1]);
        assert!(SwinParams::from_tensors(&cfg, reshaped).is_err());
    }
}
