//! Forward-graph construction for the classifier.
//!
//! A [`SwinNet`] precomputes, per stage, every index table the blocks need
//! (window partitions, cyclic shifts, seam masks, merge gathers), then
//! stamps out the same tape program for each image: patch embedding, four
//! stages of alternating plain/shifted attention blocks with 2×2 merges
//! between stages, global average pooling, and a linear two-class head.
//! One tape carries one image; batching happens across tapes.

use std::sync::Arc;

use crate::data::ImageTensor;
use crate::error::Error;
use crate::swin::config::{SwinConfig, STAGES};
use crate::swin::params::SwinParams;
use crate::swin::windows;
use crate::tensor::{Element, Tape, Tensor, Var, WindowLayout};
use crate::Result;

/// Handles into a forward graph built on a caller-owned tape.
pub struct ForwardGraph {
    /// Parameter leaves in canonical order, aligned with [`SwinParams`].
    pub param_vars: Vec<Var>,
    /// Pooled pre-head representation, `[1, feature_dim]`.
    pub features: Var,
    /// Class logits, `[1, 2]`.
    pub logits: Var,
}

/// Precomputed geometry for one stage.
struct StagePlan {
    grid: usize,
    channels: usize,
    heads: usize,
    window: usize,
    window_count: usize,
    /// Raster → window-major, plain and shift-composed variants with their
    /// inverses. With a zero shift the shifted tables alias the plain ones,
    /// so a degenerate shifted block runs the identical tape program.
    partition: Arc<Vec<usize>>,
    unpartition: Arc<Vec<usize>>,
    shifted_partition: Arc<Vec<usize>>,
    shifted_unpartition: Arc<Vec<usize>>,
    /// Blocked pairs for shifted windows; `None` when the shift is zero.
    mask: Option<Arc<Vec<bool>>>,
    /// Relative-position rows per (query, key) pair, when bias is enabled.
    bias_map: Option<Arc<Vec<usize>>>,
    /// Quartet gather feeding the 2×2 merge after this stage.
    merge: Option<Arc<Vec<usize>>>,
}

/// The classifier: a validated config plus its per-stage plans.
pub struct SwinNet {
    cfg: SwinConfig,
    stages: Vec<StagePlan>,
}

impl SwinNet {
    pub fn new(cfg: SwinConfig) -> Result<Self> {
        cfg.validate()?;
        let mut stages = Vec::with_capacity(STAGES);
        for s in 0..STAGES {
            let grid = cfg.stage_grid(s);
            let (m, shift) = cfg.window_for_stage(s);
            let partition = Arc::new(windows::partition_perm(grid, m));
            let unpartition = Arc::new(windows::inverse_perm(&partition));
            let (shifted_partition, shifted_unpartition, mask) = if shift == 0 {
                (partition.clone(), unpartition.clone(), None)
            } else {
                let roll = windows::shift_perm(grid, shift);
                let fwd = windows::compose(&roll, &partition);
                let inv = windows::inverse_perm(&fwd);
                (
                    Arc::new(fwd),
                    Arc::new(inv),
                    Some(Arc::new(windows::attention_mask(grid, m, shift))),
                )
            };
            stages.push(StagePlan {
                grid,
                channels: cfg.stage_channels(s),
                heads: cfg.num_heads[s],
                window: m,
                window_count: (grid / m) * (grid / m),
                partition,
                unpartition,
                shifted_partition,
                shifted_unpartition,
                mask,
                bias_map: cfg
                    .use_attention_bias
                    .then(|| Arc::new(windows::relative_bias_map(m))),
                merge: (s + 1 < STAGES)
                    .then(|| Arc::new(windows::merge_perm(grid))),
            });
        }
        Ok(SwinNet { cfg, stages })
    }

    pub fn config(&self) -> &SwinConfig {
        &self.cfg
    }

    /// Rearranges an image into flattened raw patches, `[tokens, P²·3]`:
    /// tokens in raster order, each row the patch's pixels in raster order
    /// with interleaved RGB.
    pub fn patch_tokens<F: Element>(&self, img: &ImageTensor) -> Result<Tensor<F>> {
        let size = self.cfg.input_size;
        if img.h != size || img.w != size {
            return Err(Error::shape(
                "input image",
                &[size, size],
                &[img.h, img.w],
            ));
        }
        let p = self.cfg.patch_size;
        let grid = size / p;
        let mut data = Vec::with_capacity(grid * grid * self.cfg.patch_dim());
        for tr in 0..grid {
            for tc in 0..grid {
                for py in 0..p {
                    for px in 0..p {
                        for ch in 0..3 {
                            let v = img.get(tr * p + py, tc * p + px, ch);
                            data.push(F::from_f64(v as f64));
                        }
                    }
                }
            }
        }
        Tensor::from_vec(vec![grid * grid, self.cfg.patch_dim()], data)
    }

    /// Builds the full forward graph for one image's patch tokens. With
    /// `trainable` the parameter leaves accumulate gradients; inference
    /// passes `false` and skips the bookkeeping.
    pub fn build_graph<F: Element>(
        &self,
        tape: &mut Tape<F>,
        params: &SwinParams<F>,
        tokens: &Tensor<F>,
        trainable: bool,
    ) -> Result<ForwardGraph> {
        if params.config() != &self.cfg {
            return Err(Error::config(
                "parameter set was built for a different model config",
            ));
        }
        let n0 = self.stages[0].grid * self.stages[0].grid;
        if tokens.shape() != [n0, self.cfg.patch_dim()] {
            return Err(Error::shape(
                "patch tokens",
                &[n0, self.cfg.patch_dim()],
                tokens.shape(),
            ));
        }
        let param_vars: Vec<Var> =
            params.tensors().iter().map(|t| tape.leaf(t, trainable)).collect();
        let var = |name: &str| -> Result<Var> {
            params.index_of(name).map(|i| param_vars[i]).ok_or_else(|| {
                Error::Runtime(format!("parameter {name} missing from the set"))
            })
        };

        let mut x = tape.constant(tokens);
        x = tape.matmul(x, var("patch_embed.weight")?)?;
        x = tape.add_bias(x, var("patch_embed.bias")?)?;
        for (s, plan) in self.stages.iter().enumerate() {
            for b in 0..self.cfg.depths[s] {
                x = block(tape, &var, plan, s, b, x)?;
            }
            if let Some(merge) = &plan.merge {
                let n = plan.grid * plan.grid;
                x = tape.gather_rows(x, merge.clone())?;
                x = tape.reshape(x, vec![n / 4, 4 * plan.channels])?;
                x = tape.matmul(x, var(&format!("merge{s}.weight"))?)?;
            }
        }
        let features = tape.mean_rows(x)?;
        let logits = tape.matmul(features, var("head.weight")?)?;
        let logits = tape.add_bias(logits, var("head.bias")?)?;
        Ok(ForwardGraph { param_vars, features, logits })
    }

    /// Pooled features and logits for one image, on a throwaway tape.
    pub fn infer<F: Element>(
        &self,
        params: &SwinParams<F>,
        img: &ImageTensor,
    ) -> Result<(Vec<F>, Vec<F>)> {
        let tokens = self.patch_tokens::<F>(img)?;
        let mut tape = Tape::new();
        let graph = self.build_graph(&mut tape, params, &tokens, false)?;
        Ok((
            tape.value(graph.features).data().to_vec(),
            tape.value(graph.logits).data().to_vec(),
        ))
    }

    /// Class logits for one image.
    pub fn forward<F: Element>(
        &self,
        params: &SwinParams<F>,
        img: &ImageTensor,
    ) -> Result<Vec<F>> {
        Ok(self.infer(params, img)?.1)
    }

    /// The pooled pre-head representation (`feature_dim` values).
    pub fn extract_features<F: Element>(
        &self,
        params: &SwinParams<F>,
        img: &ImageTensor,
    ) -> Result<Vec<F>> {
        Ok(self.infer(params, img)?.0)
    }
}

/// One attention block in pre-norm residual form:
/// `x = x + Proj(Attn(LN(x)))`, then `x = x + MLP(LN(x))`. Odd block
/// indices use the shift-composed partition and the seam mask.
fn block<F: Element>(
    tape: &mut Tape<F>,
    var: &impl Fn(&str) -> Result<Var>,
    plan: &StagePlan,
    s: usize,
    b: usize,
    x: Var,
) -> Result<Var> {
    let p = format!("stage{s}.block{b}");
    let c = plan.channels;
    let eps = F::from_f64(1e-5);
    let shifted = b % 2 == 1;

    let h = tape.layer_norm(
        x,
        var(&format!("{p}.ln1.gamma"))?,
        var(&format!("{p}.ln1.beta"))?,
        eps,
    )?;
    let (part, unpart, mask) = if shifted {
        (&plan.shifted_partition, &plan.shifted_unpartition, plan.mask.clone())
    } else {
        (&plan.partition, &plan.unpartition, None)
    };
    let h = tape.gather_rows(h, part.clone())?;
    let qkv = tape.matmul(h, var(&format!("{p}.qkv.weight"))?)?;
    let qkv = tape.add_bias(qkv, var(&format!("{p}.qkv.bias"))?)?;
    let q = tape.slice_cols(qkv, 0, c)?;
    let k = tape.slice_cols(qkv, c, c)?;
    let v = tape.slice_cols(qkv, 2 * c, c)?;
    let layout = WindowLayout {
        windows: plan.window_count,
        tokens: plan.window * plan.window,
        heads: plan.heads,
    };
    let bias = match &plan.bias_map {
        Some(map) => Some((var(&format!("{p}.attn_bias.table"))?, map.clone())),
        None => None,
    };
    let a = tape.window_attention(q, k, v, layout, mask, bias)?;
    let a = tape.gather_rows(a, unpart.clone())?;
    let a = tape.matmul(a, var(&format!("{p}.proj.weight"))?)?;
    let a = tape.add_bias(a, var(&format!("{p}.proj.bias"))?)?;
    let x = tape.add(x, a)?;

    let h = tape.layer_norm(
        x,
        var(&format!("{p}.ln2.gamma"))?,
        var(&format!("{p}.ln2.beta"))?,
        eps,
    )?;
    let h = tape.matmul(h, var(&format!("{p}.mlp.fc1.weight"))?)?;
    let h = tape.add_bias(h, var(&format!("{p}.mlp.fc1.bias"))?)?;
    let h = tape.gelu(h);
    let h = tape.matmul(h, var(&format!("{p}.mlp.fc2.weight"))?)?;
    let h = tape.add_bias(h, var(&format!("{p}.mlp.fc2.bias"))?)?;
    tape.add(x, h)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image(seed: u64, size: usize) -> ImageTensor {
        // Cheap deterministic pixels; the tests only need variety.
        let mut data = Vec::with_capacity(size * size * 3);
        let mut state = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) | 1;
        for _ in 0..size * size * 3 {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            data.push((state >> 40) as f32 / (1 << 24) as f32);
        }
        ImageTensor::new(size, size, data).unwrap()
    }

    #[test]
    fn patch_tokens_tile_a_64_pixel_input_into_a_16_grid() {
        let net = SwinNet::new(SwinConfig::toy()).unwrap();
        let tokens = net.patch_tokens::<f32>(&image(1, 64)).unwrap();
        assert_eq!(tokens.shape(), [256, 48]);
        // Token (1, 2), offset (3, 1), green: raster position maps through
        // the patch layout exactly.
        let img = image(1, 64);
        let got = tokens.data()[(16 + 2) * 48 + (3 * 4 + 1) * 3 + 1];
        assert_eq!(got, img.get(4 + 3, 8 + 1, 1));
    }

    #[test]
    fn zero_image_and_zero_bias_embed_to_zero_tokens() {
        let cfg = SwinConfig::toy();
        let net = SwinNet::new(cfg.clone()).unwrap();
        let params = SwinParams::<f32>::init(&cfg, 3).unwrap();
        let black = ImageTensor::filled(64, 64, [0.0; 3]);
        let tokens = net.patch_tokens::<f32>(&black).unwrap();
        assert!(tokens.data().iter().all(|&v| v == 0.0));
        let mut tape = Tape::new();
        let t = tape.constant(&tokens);
        let w = tape.leaf(params.get("patch_embed.weight").unwrap(), false);
        let b = tape.leaf(params.get("patch_embed.bias").unwrap(), false);
        let e = tape.matmul(t, w).unwrap();
        let e = tape.add_bias(e, b).unwrap();
        assert!(tape.value(e).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn forward_yields_two_finite_logits() {
        let cfg = SwinConfig::toy();
        let net = SwinNet::new(cfg.clone()).unwrap();
        let params = SwinParams::<f32>::init(&cfg, 5).unwrap();
        let logits = net.forward(&params, &image(2, 64)).unwrap();
        assert_eq!(logits.len(), 2);
        assert!(logits.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn identical_images_give_bitwise_identical_outputs() {
        let cfg = SwinConfig::small();
        let net = SwinNet::new(cfg.clone()).unwrap();
        let params = SwinParams::<f32>::init(&cfg, 5).unwrap();
        let (f1, l1) = net.infer(&params, &image(9, 32)).unwrap();
        let (f2, l2) = net.infer(&params, &image(9, 32)).unwrap();
        assert_eq!(f1, f2);
        assert_eq!(l1, l2);
        assert_eq!(f1.len(), cfg.feature_dim());
    }

    #[test]
    fn wrong_image_size_is_rejected() {
        let net = SwinNet::new(SwinConfig::toy()).unwrap();
        let params = SwinParams::<f32>::init(&SwinConfig::toy(), 0).unwrap();
        assert!(net.forward(&params, &image(0, 32)).is_err());
    }

    #[test]
    fn mismatched_params_are_rejected() {
        let net = SwinNet::new(SwinConfig::toy()).unwrap();
        let params = SwinParams::<f32>::init(&SwinConfig::small(), 0).unwrap();
        let err = net.forward(&params, &image(0, 64)).unwrap_err();
        assert!(err.is_validation());
    }
}
