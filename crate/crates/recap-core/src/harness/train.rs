//! Mini-batch training, evaluation, and single-protocol execution.
//!
//! One training step builds an independent tape per sample, so sample
//! losses can be computed in parallel; gradients are then summed over
//! fixed-size chunks in a fixed order, which keeps every run bitwise
//! reproducible no matter how many workers the pool has. The optional
//! domain-adversarial head hangs off the pooled features through a
//! gradient-reversing connection and is skipped entirely (not merely
//! zero-weighted) when disabled, so the baseline loss is untouched.

use std::collections::{BTreeMap, HashSet};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::augment::{AugConfig, Augmentor, MixedSample};
use crate::data::{Dataset, Label};
use crate::error::Error;
use crate::harness::metrics::{compute_metrics, MetricsReport};
use crate::harness::protocol::{ExperimentProtocol, ProtocolKind};
use crate::harness::split::{split_8_1_1, SplitSpec};
use crate::rng::{stream, substream, StreamId};
use crate::swin::{SwinConfig, SwinNet, SwinParams};
use crate::tensor::{AdamState, CeTargets, Reduction, Tape, Tensor};
use crate::Result;

/// Samples per gradient-accumulation chunk. Chunks are processed in
/// parallel but summed in index order, so the constant fixes the floating
/// point reduction tree independent of worker count.
const GRAD_CHUNK: usize = 4;

/// Stream indices at or above this belong to evaluation views, keeping
/// them disjoint from the `epoch·n + position` indices the training loop
/// burns through.
const EVAL_STREAM_BASE: u64 = 1 << 63;

/// Optimizer selector; a closed set so config files fail loudly on typos.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam,
}

/// Loss selector; likewise closed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    CrossEntropy,
}

/// Training hyperparameters; part of the experiment config file.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_optimizer")]
    pub optimizer: OptimizerKind,
    #[serde(default = "default_loss")]
    pub loss: LossKind,
    /// Side of the square network input; must match the model config.
    #[serde(default = "default_input")]
    pub input_size: usize,
}

fn default_lr() -> f64 {
    1e-4
}
fn default_batch() -> usize {
    32
}
fn default_epochs() -> usize {
    10
}
fn default_optimizer() -> OptimizerKind {
    OptimizerKind::Adam
}
fn default_loss() -> LossKind {
    LossKind::CrossEntropy
}
fn default_input() -> usize {
    64
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: default_lr(),
            batch_size: default_batch(),
            epochs: default_epochs(),
            optimizer: default_optimizer(),
            loss: default_loss(),
            input_size: default_input(),
        }
    }
}

impl TrainConfig {
    /// Checks every field, reporting all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            problems.push(format!(
                "learning_rate = {} must be a positive real",
                self.learning_rate
            ));
        }
        if self.batch_size == 0 {
            problems.push("batch_size must be positive".to_string());
        }
        if self.epochs == 0 {
            problems.push("epochs must be positive".to_string());
        }
        if self.input_size == 0 {
            problems.push("input_size must be positive".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config { problems })
        }
    }
}

/// Which samples feed the domain discriminator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdvTarget {
    /// Single-side: weight each sample's adversarial term by how much of
    /// the original class it carries, so the discriminator only pressures
    /// original-image features toward domain invariance.
    OriginalOnly,
    /// Every sample contributes with full weight.
    All,
}

/// Domain-adversarial head settings. Off by default, so headline results
/// never depend on it.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainAdvConfig {
    #[serde(default)]
    pub enabled: bool,
    /// Weight of the adversarial cross-entropy term; ≥ 0.
    #[serde(default)]
    pub lambda_adv: f64,
    /// Hidden width of the discriminator MLP.
    #[serde(default = "default_adv_width")]
    pub width: usize,
    #[serde(default = "default_adv_target")]
    pub apply_to: AdvTarget,
}

fn default_adv_width() -> usize {
    32
}
fn default_adv_target() -> AdvTarget {
    AdvTarget::OriginalOnly
}

impl Default for DomainAdvConfig {
    fn default() -> Self {
        DomainAdvConfig {
            enabled: false,
            lambda_adv: 0.0,
            width: default_adv_width(),
            apply_to: default_adv_target(),
        }
    }
}

impl DomainAdvConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.lambda_adv >= 0.0) || !self.lambda_adv.is_finite() {
            problems.push(format!(
                "lambda_adv = {} must be a non-negative real",
                self.lambda_adv
            ));
        }
        if self.width == 0 {
            problems.push("discriminator width must be positive".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config { problems })
        }
    }

    /// The adversarial graph is built only when this holds; a zero weight
    /// is treated as off so the two are bitwise interchangeable.
    fn active(&self) -> bool {
        self.enabled && self.lambda_adv > 0.0
    }
}

/// One epoch's averaged losses and accuracies.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EpochStats {
    /// 1-based epoch number.
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

/// Record of one training run: the configuration that produced it, the
/// per-epoch curves, and where the weights ended up.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainRun {
    pub config: TrainConfig,
    pub adversarial: DomainAdvConfig,
    pub seed: u64,
    pub stats: Vec<EpochStats>,
    /// Path of the saved checkpoint; filled in by whoever writes it.
    pub checkpoint: Option<String>,
    pub wall_secs: f64,
}

/// Discriminator parameters: one hidden GELU layer over the (reversed)
/// pooled features, logits over the training domains.
struct AdvHead {
    /// `w1 [feat, width]`, `b1 [width]`, `w2 [width, domains]`, `b2 [domains]`.
    tensors: Vec<Tensor<f32>>,
}

impl AdvHead {
    fn init(feat_dim: usize, width: usize, n_domains: usize, seed: u64) -> Result<Self> {
        let mut rng = stream(seed, StreamId::Adversarial);
        let dist = Normal::new(0.0f64, 0.02).expect("fixed std");
        let mut weights = |n: usize| -> Vec<f32> {
            (0..n).map(|_| dist.sample(&mut rng) as f32).collect()
        };
        let tensors = vec![
            Tensor::from_vec(vec![feat_dim, width], weights(feat_dim * width))?,
            Tensor::from_vec(vec![width], vec![0.0; width])?,
            Tensor::from_vec(vec![width, n_domains], weights(width * n_domains))?,
            Tensor::from_vec(vec![n_domains], vec![0.0; n_domains])?,
        ];
        Ok(AdvHead { tensors })
    }
}

/// Per-chunk gradient sums and running statistics, folded across chunks in
/// index order.
struct ChunkOut {
    grads: Vec<Vec<f32>>,
    adv_grads: Vec<Vec<f32>>,
    loss: f64,
    correct: usize,
}

/// Numerically stable softmax probability of class 0 (recaptured).
fn p_recaptured(logits: &[f32]) -> f64 {
    let l0 = logits[0] as f64;
    let l1 = logits[1] as f64;
    let m = l0.max(l1);
    let e0 = (l0 - m).exp();
    e0 / (e0 + (l1 - m).exp())
}

/// Weighted cross-entropy of one logit row in f64, for logging.
fn row_ce(logits: &[f32], weights: [f32; 2]) -> f64 {
    let l0 = logits[0] as f64;
    let l1 = logits[1] as f64;
    let m = l0.max(l1);
    let lse = m + ((l0 - m).exp() + (l1 - m).exp()).ln();
    lse - weights[0] as f64 * l0 - weights[1] as f64 * l1
}

/// Predicted class index under the 0.5 threshold convention (ties go to
/// the recaptured class, index 0).
fn predicted_class(logits: &[f32]) -> usize {
    if logits[0] >= logits[1] {
        0
    } else {
        1
    }
}

/// The class a mixed sample mostly is; ties go to recaptured.
fn dominant_class(view: &MixedSample) -> usize {
    let w = view.class_weights();
    if w[0] >= w[1] {
        0
    } else {
        1
    }
}

/// Builds one sample's loss graph and accumulates its gradients into
/// `out`. Returns (loss value, correctly classified).
#[allow(clippy::too_many_arguments)]
fn sample_backward(
    net: &SwinNet,
    params: &SwinParams<f32>,
    adv: Option<(&AdvHead, &DomainAdvConfig, &BTreeMap<String, usize>)>,
    view: &MixedSample,
    out: &mut ChunkOut,
) -> Result<(f64, bool)> {
    let tokens = net.patch_tokens::<f32>(&view.image)?;
    let mut tape = Tape::new();
    let graph = net.build_graph(&mut tape, params, &tokens, true)?;
    let class_weights = view.class_weights();
    let mut loss =
        tape.cross_entropy(graph.logits, CeTargets::Soft(&class_weights), Reduction::Mean)?;

    let mut adv_vars = Vec::new();
    if let Some((head, cfg, domain_index)) = adv {
        adv_vars = head.tensors.iter().map(|t| tape.leaf(t, true)).collect();
        let reversed = tape.grad_reverse(graph.features);
        let mut h = tape.matmul(reversed, adv_vars[0])?;
        h = tape.add_bias(h, adv_vars[1])?;
        h = tape.gelu(h);
        h = tape.matmul(h, adv_vars[2])?;
        h = tape.add_bias(h, adv_vars[3])?;
        // Domain target mirrors the label mixture: each source domain gets
        // its sample's label weight.
        let mut target = vec![0.0f32; domain_index.len()];
        target[domain_index[&view.domains.0]] += view.label_weights.0;
        target[domain_index[&view.domains.1]] += view.label_weights.1;
        let ce = tape.cross_entropy(h, CeTargets::Soft(&target), Reduction::Mean)?;
        let sample_weight = match cfg.apply_to {
            AdvTarget::OriginalOnly => class_weights[Label::Original.class_index()],
            AdvTarget::All => 1.0,
        };
        let scaled = tape.scale(ce, cfg.lambda_adv as f32 * sample_weight);
        loss = tape.add(loss, scaled)?;
    }

    tape.backward(loss)?;
    for (acc, &var) in out.grads.iter_mut().zip(&graph.param_vars) {
        let g = tape.grad(var).expect("trainable leaf");
        for (a, &x) in acc.iter_mut().zip(g) {
            *a += x;
        }
    }
    for (acc, &var) in out.adv_grads.iter_mut().zip(&adv_vars) {
        let g = tape.grad(var).expect("trainable leaf");
        for (a, &x) in acc.iter_mut().zip(g) {
            *a += x;
        }
    }
    let logits = tape.value(graph.logits);
    let correct = predicted_class(logits.data()) == dominant_class(view);
    Ok((tape.value(loss).data()[0] as f64, correct))
}

/// Mean loss and accuracy of the current weights over a dataset, without
/// touching gradients. Parallel over samples, reduced in index order.
fn eval_epoch(
    net: &SwinNet,
    params: &SwinParams<f32>,
    ds: &Dataset,
    augmentor: &Augmentor,
) -> Result<(f64, f64)> {
    let per_sample: Vec<(f64, bool)> = ds
        .samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let view = augmentor.eval_view(s, s, EVAL_STREAM_BASE + i as u64)?;
            let (_, logits) = net.infer::<f32>(params, &view.image)?;
            let loss = row_ce(&logits, view.class_weights());
            Ok((loss, predicted_class(&logits) == dominant_class(&view)))
        })
        .collect::<Result<_>>()?;
    let loss: f64 = per_sample.iter().map(|(l, _)| l).sum();
    let correct = per_sample.iter().filter(|(_, c)| *c).count();
    let n = ds.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

/// Trains a fresh model. Returns the final weights and the run record.
///
/// Augmentation applies to the training stream only (unless the aug config
/// opts evaluation in); its seed is overridden with `seed` so one number
/// pins the whole run. Shuffling, parameter init, and the adversarial head
/// all draw from fixed streams of the same seed.
pub fn train(
    model_cfg: &SwinConfig,
    train_set: &Dataset,
    val_set: &Dataset,
    cfg: &TrainConfig,
    aug_cfg: &AugConfig,
    adv_cfg: &DomainAdvConfig,
    seed: u64,
) -> Result<(SwinParams<f32>, TrainRun)> {
    let started = Instant::now();
    cfg.validate()?;
    adv_cfg.validate()?;
    if model_cfg.input_size != cfg.input_size {
        return Err(Error::config(format!(
            "training input_size {} does not match model input_size {}",
            cfg.input_size, model_cfg.input_size
        )));
    }
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::InvalidInput(
            "training needs non-empty train and validation sets".to_string(),
        ));
    }
    let mut aug_seeded = aug_cfg.clone();
    aug_seeded.seed = seed;
    let augmentor = Augmentor::new(aug_seeded)?;
    let net = SwinNet::new(model_cfg.clone())?;
    let mut params = SwinParams::<f32>::init(model_cfg, seed)?;

    let domain_index: BTreeMap<String, usize> = {
        let mut names = train_set.domains();
        names.sort();
        names.into_iter().enumerate().map(|(i, d)| (d, i)).collect()
    };
    let mut adv_head = if adv_cfg.active() {
        Some(AdvHead::init(
            model_cfg.feature_dim(),
            adv_cfg.width,
            domain_index.len(),
            seed,
        )?)
    } else {
        None
    };

    let mut opt = AdamState::<f32>::new(cfg.learning_rate as f32);
    let mut adv_opt = AdamState::<f32>::new(cfg.learning_rate as f32);
    let n = train_set.len();
    let n_params = params.len();
    let n_adv = adv_head.as_ref().map_or(0, |h| h.tensors.len());
    let mut stats = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut substream(seed, StreamId::Shuffle, epoch as u64));
        let mut epoch_loss = 0.0f64;
        let mut epoch_correct = 0usize;

        for batch_start in (0..n).step_by(cfg.batch_size) {
            let batch_end = (batch_start + cfg.batch_size).min(n);
            let positions: Vec<usize> = (batch_start..batch_end).collect();
            let chunk_outs: Vec<ChunkOut> = positions
                .par_chunks(GRAD_CHUNK)
                .map(|chunk| {
                    let mut out = ChunkOut {
                        grads: params.tensors().iter().map(|t| vec![0.0; t.len()]).collect(),
                        adv_grads: adv_head
                            .as_ref()
                            .map(|h| {
                                h.tensors.iter().map(|t| vec![0.0; t.len()]).collect()
                            })
                            .unwrap_or_default(),
                        loss: 0.0,
                        correct: 0,
                    };
                    for &pos in chunk {
                        let sample = &train_set.samples[order[pos]];
                        let partner = &train_set.samples[order[(pos + 1) % n]];
                        let view = augmentor.train_view(
                            sample,
                            partner,
                            (epoch * n + pos) as u64,
                        )?;
                        let adv = adv_head
                            .as_ref()
                            .map(|h| (h, adv_cfg, &domain_index));
                        let (loss, correct) =
                            sample_backward(&net, &params, adv, &view, &mut out)?;
                        out.loss += loss;
                        out.correct += usize::from(correct);
                    }
                    Ok(out)
                })
                .collect::<Result<_>>()?;

            let batch_len = positions.len() as f32;
            let mut grads: Vec<Vec<f32>> =
                params.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
            let mut adv_grads: Vec<Vec<f32>> = adv_head
                .as_ref()
                .map(|h| h.tensors.iter().map(|t| vec![0.0; t.len()]).collect())
                .unwrap_or_default();
            for out in chunk_outs {
                for (acc, g) in grads.iter_mut().zip(&out.grads) {
                    for (a, &x) in acc.iter_mut().zip(g) {
                        *a += x;
                    }
                }
                for (acc, g) in adv_grads.iter_mut().zip(&out.adv_grads) {
                    for (a, &x) in acc.iter_mut().zip(g) {
                        *a += x;
                    }
                }
                epoch_loss += out.loss;
                epoch_correct += out.correct;
            }
            debug_assert_eq!(grads.len(), n_params);
            debug_assert_eq!(adv_grads.len(), n_adv);
            for g in grads.iter_mut().chain(adv_grads.iter_mut()) {
                for x in g.iter_mut() {
                    *x /= batch_len;
                }
            }
            opt.step(params.tensors_mut(), &grads)?;
            if let Some(head) = adv_head.as_mut() {
                adv_opt.step(&mut head.tensors, &adv_grads)?;
            }
        }

        let (val_loss, val_acc) = eval_epoch(&net, &params, val_set, &augmentor)?;
        stats.push(EpochStats {
            epoch: epoch + 1,
            train_loss: epoch_loss / n as f64,
            train_acc: epoch_correct as f64 / n as f64,
            val_loss,
            val_acc,
        });
    }

    let run = TrainRun {
        config: cfg.clone(),
        adversarial: adv_cfg.clone(),
        seed,
        stats,
        checkpoint: None,
        wall_secs: started.elapsed().as_secs_f64(),
    };
    Ok((params, run))
}

/// Scores a test set with a trained model: softmax probability of the
/// recaptured class per sample, then the full metrics report. Parallel
/// over samples, order preserved.
pub fn evaluate(
    params: &SwinParams<f32>,
    test_set: &Dataset,
    aug_cfg: &AugConfig,
) -> Result<MetricsReport> {
    if test_set.is_empty() {
        return Err(Error::InvalidInput("evaluation on an empty test set".to_string()));
    }
    let augmentor = Augmentor::new(aug_cfg.clone())?;
    let net = SwinNet::new(params.config().clone())?;
    let scored: Vec<f64> = test_set
        .samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let view = augmentor.eval_view(s, s, EVAL_STREAM_BASE + i as u64)?;
            let (_, logits) = net.infer::<f32>(params, &view.image)?;
            Ok(p_recaptured(&logits))
        })
        .collect::<Result<_>>()?;
    let labels: Vec<Label> = test_set.samples.iter().map(|s| s.label).collect();
    compute_metrics(&scored, &labels)
}

/// Pooled pre-head features for every sample, normalized the same way
/// evaluation inputs are. Rows align with `ds.samples`.
pub fn extract_feature_matrix(
    params: &SwinParams<f32>,
    ds: &Dataset,
    aug_cfg: &AugConfig,
) -> Result<Vec<Vec<f64>>> {
    let augmentor = Augmentor::new(aug_cfg.clone())?;
    let net = SwinNet::new(params.config().clone())?;
    ds.samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let view = augmentor.eval_view(s, s, EVAL_STREAM_BASE + i as u64)?;
            let feats = net.extract_features::<f32>(params, &view.image)?;
            Ok(feats.into_iter().map(|v| v as f64).collect())
        })
        .collect()
}

/// Everything one protocol run produces.
#[derive(Debug, Clone)]
pub struct ProtocolOutcome {
    pub protocol: ExperimentProtocol,
    pub train_run: TrainRun,
    pub metrics: MetricsReport,
    /// Final weights, for checkpointing and feature extraction.
    pub params: SwinParams<f32>,
}

/// Runs one protocol end to end: pools the training domains, splits 8:1:1
/// stratified by (domain, class), trains, and evaluates — on the pooled
/// test split for intra/inter protocols, or on the entire held-out
/// domain(s) for cross protocols. Errors if any sample id reaches both
/// sides.
/// Builds the (train, val, test) datasets a protocol trains and scores on.
///
/// The train-domain pool is split 8:1:1 stratified by (domain, class);
/// intra/inter protocols test on the held-out tenth, cross protocols test
/// on the entire unseen domain. Ends with a leakage audit: no id may
/// appear in both the fitted pool and the test pool. Deterministic in the
/// seed, so evaluation can rebuild the exact splits a training run used.
pub fn protocol_splits(
    protocol: &ExperimentProtocol,
    domains: &BTreeMap<String, Dataset>,
    seed: u64,
) -> Result<(Dataset, Dataset, Dataset)> {
    protocol.validate()?;
    let missing: Vec<&str> = protocol
        .train_domains
        .iter()
        .chain(&protocol.test_domains)
        .filter(|d| !domains.contains_key(*d))
        .map(String::as_str)
        .collect();
    if !missing.is_empty() {
        return Err(Error::InvalidInput(format!(
            "protocol {} names unknown domains: {}",
            protocol.name,
            missing.join(", ")
        )));
    }

    let train_parts: Vec<&Dataset> =
        protocol.train_domains.iter().map(|d| &domains[d]).collect();
    let pool = Dataset::concat(&train_parts);
    pool.check_unique_ids()?;
    let spec = SplitSpec { seed, ..SplitSpec::default() };
    let (train_split, val_split, test_split) = split_8_1_1(&pool, &spec)?;
    let test_pool = match protocol.kind {
        // Cross protocols score the whole unseen domain, not a tenth of it.
        ProtocolKind::Cross => {
            let parts: Vec<&Dataset> =
                protocol.test_domains.iter().map(|d| &domains[d]).collect();
            Dataset::concat(&parts)
        }
        ProtocolKind::Intra | ProtocolKind::Inter => test_split,
    };

    let fitted: HashSet<&str> = train_split
        .samples
        .iter()
        .chain(&val_split.samples)
        .map(|s| s.id.as_str())
        .collect();
    for s in &test_pool.samples {
        if fitted.contains(s.id.as_str()) {
            return Err(Error::Runtime(format!(
                "leakage in protocol {}: sample {} is in both the fitted pool and the test pool",
                protocol.name, s.id
            )));
        }
    }
    Ok((train_split, val_split, test_pool))
}

pub fn run_protocol(
    protocol: &ExperimentProtocol,
    domains: &BTreeMap<String, Dataset>,
    model_cfg: &SwinConfig,
    cfg: &TrainConfig,
    aug_cfg: &AugConfig,
    adv_cfg: &DomainAdvConfig,
    seed: u64,
) -> Result<ProtocolOutcome> {
    let (train_split, val_split, test_pool) = protocol_splits(protocol, domains, seed)?;
    let mut aug_seeded = aug_cfg.clone();
    aug_seeded.seed = seed;
    let (params, train_run) =
        train(model_cfg, &train_split, &val_split, cfg, &aug_seeded, adv_cfg, seed)?;
    let metrics = evaluate(&params, &test_pool, &aug_seeded)?;
    Ok(ProtocolOutcome {
        protocol: protocol.clone(),
        train_run,
        metrics,
        params,
    })
}
