//! The operation tape and reverse-mode gradients.
//!
//! A [`Tape`] owns every intermediate value of one forward pass. Recording
//! order is construction order, which is automatically topological, so
//! [`Tape::backward`] is a single reverse sweep that visits each node once.
//! Leaves carry persistent gradient accumulators; interior gradients live
//! only for the duration of the sweep.
//!
//! Masked attention uses structural zeros rather than `-inf` arithmetic:
//! blocked pairs are excluded from the softmax normalization and their
//! weights are written as exactly `0`, which is what the shifted-window
//! masking contract demands.

use std::sync::Arc;

use super::kernels::{matmul_nn_acc, matmul_nt_acc, matmul_tn_acc};
use super::{Element, Tensor};
use crate::error::Error;
use crate::Result;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

/// Batch reduction used by the loss ops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reduction {
    /// Mean over the batch: learning rates stay batch-size independent.
    #[default]
    Mean,
    /// Plain sum, the literal form of the two-class cross-entropy.
    Sum,
}

/// Classification targets: hard class indices or per-class weight rows
/// (mixed labels from CutMix).
pub enum CeTargets<'a, F: Element> {
    Hard(&'a [usize]),
    Soft(&'a [F]),
}

/// How a `[T, C]` token matrix factors into attention groups:
/// `T = windows · tokens` (window-major rows) and `C = heads · head_dim`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowLayout {
    pub windows: usize,
    pub tokens: usize,
    pub heads: usize,
}

enum Op<F: Element> {
    Leaf,
    /// 2-D (`batch == 1` and flat shapes) or batched 3-D matrix product.
    MatMul { a: usize, b: usize },
    Add { a: usize, b: usize },
    /// `[.., d] + [d]`, bias broadcast over leading dims.
    AddBias { a: usize, bias: usize },
    Mul { a: usize, b: usize },
    Scale { a: usize, c: F },
    SumAll { a: usize },
    /// `[r, c] -> [1, c]`, mean over rows (global average pooling).
    MeanRows { a: usize },
    /// Row permutation/selection: `out[i] = a[perm[i]]`.
    GatherRows { a: usize, perm: Arc<Vec<usize>> },
    /// Contiguous column slice of a 2-D tensor.
    SliceCols { a: usize, start: usize, width: usize },
    Reshape { a: usize },
    Softmax { a: usize, axis: usize },
    LayerNorm { a: usize, gamma: usize, beta: usize, eps: F },
    Gelu { a: usize },
    CrossEntropy {
        logits: usize,
        /// Per-class weights, `[n, classes]` flat; one-hot for hard labels.
        weights: Arc<Vec<F>>,
        reduction: Reduction,
    },
    WindowAttention {
        q: usize,
        k: usize,
        v: usize,
        layout: WindowLayout,
        /// Learned relative-position bias: table node `[rel_positions, heads]`
        /// plus the `[tokens, tokens]` map into its rows.
        bias: Option<(usize, Arc<Vec<usize>>)>,
        /// Softmax weights saved by the forward pass, `[w][h][i][j]`.
        /// Blocked pairs are exact zeros here, so the backward pass needs no
        /// separate record of the mask.
        saved_attn: Vec<F>,
    },
    /// Identity forward, negated gradient backward.
    GradReverse { a: usize },
}

struct Node<F: Element> {
    shape: Vec<usize>,
    data: Arc<Vec<F>>,
    requires_grad: bool,
    /// Persistent accumulator; populated for leaves with `requires_grad`.
    grad: Option<Vec<F>>,
    op: Op<F>,
}

/// Records a forward pass and replays it in reverse for gradients.
#[derive(Default)]
pub struct Tape<F: Element> {
    nodes: Vec<Node<F>>,
}

impl<F: Element> Tape<F> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, shape: Vec<usize>, data: Vec<F>, requires_grad: bool, op: Op<F>) -> Var {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        self.nodes.push(Node {
            shape,
            data: Arc::new(data),
            requires_grad,
            grad: None,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    fn node(&self, v: Var) -> &Node<F> {
        &self.nodes[v.0]
    }

    // ── Leaves and accessors ───────────────────────────────────────────────

    /// Inserts a tensor as a leaf. Storage is shared, not copied.
    pub fn leaf(&mut self, t: &Tensor<F>, requires_grad: bool) -> Var {
        let grad = requires_grad.then(|| vec![F::ZERO; t.len()]);
        self.nodes.push(Node {
            shape: t.shape().to_vec(),
            data: t.storage(),
            requires_grad,
            grad,
            op: Op::Leaf,
        });
        Var(self.nodes.len() - 1)
    }

    /// Leaf that never receives gradients (inputs, constants).
    pub fn constant(&mut self, t: &Tensor<F>) -> Var {
        self.leaf(t, false)
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.node(v).shape
    }

    /// Value as a tensor sharing the node's storage.
    pub fn value(&self, v: Var) -> Tensor<F> {
        let n = self.node(v);
        Tensor::from_storage(n.shape.clone(), Arc::clone(&n.data))
    }

    /// Accumulated gradient of a `requires_grad` leaf.
    pub fn grad(&self, v: Var) -> Option<&[F]> {
        self.node(v).grad.as_deref()
    }

    /// Resets every leaf gradient accumulator to zero.
    pub fn zero_grad(&mut self) {
        for n in &mut self.nodes {
            if let Some(g) = &mut n.grad {
                g.iter_mut().for_each(|x| *x = F::ZERO);
            }
        }
    }

    // ── Forward ops ────────────────────────────────────────────────────────

    /// `[m,k]·[k,n]` or batched `[b,m,k]·[b,k,n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        let (batch, m, k, n) = match (sa.as_slice(), sb.as_slice()) {
            ([m, k1], [k2, n]) if k1 == k2 => (1usize, *m, *k1, *n),
            ([b1, m, k1], [b2, k2, n]) if b1 == b2 && k1 == k2 => (*b1, *m, *k1, *n),
            _ => return Err(Error::shape("matmul", &sa, &sb)),
        };
        let (da, db) = (self.node(a).data.clone(), self.node(b).data.clone());
        let mut out = vec![F::ZERO; batch * m * n];
        for t in 0..batch {
            matmul_nn_acc(
                &da[t * m * k..(t + 1) * m * k],
                &db[t * k * n..(t + 1) * k * n],
                m,
                k,
                n,
                &mut out[t * m * n..(t + 1) * m * n],
            );
        }
        let shape = if sa.len() == 2 { vec![m, n] } else { vec![batch, m, n] };
        let rg = self.node(a).requires_grad || self.node(b).requires_grad;
        Ok(self.push(shape, out, rg, Op::MatMul { a: a.0, b: b.0 }))
    }

    /// Elementwise sum of two equal-shape tensors.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::shape("add", self.shape(a), self.shape(b)));
        }
        let out: Vec<F> = self
            .node(a)
            .data
            .iter()
            .zip(self.node(b).data.iter())
            .map(|(&x, &y)| x + y)
            .collect();
        let rg = self.node(a).requires_grad || self.node(b).requires_grad;
        Ok(self.push(self.shape(a).to_vec(), out, rg, Op::Add { a: a.0, b: b.0 }))
    }

    /// `[.., d] + [d]`: broadcasts a bias vector over all leading dims.
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let sa = self.shape(a).to_vec();
        let sb = self.shape(bias).to_vec();
        let d = *sa.last().unwrap_or(&0);
        if sb != [d] {
            return Err(Error::shape("add_bias", &sa, &sb));
        }
        let bdat = self.node(bias).data.clone();
        let out: Vec<F> = self
            .node(a)
            .data
            .iter()
            .enumerate()
            .map(|(i, &x)| x + bdat[i % d])
            .collect();
        let rg = self.node(a).requires_grad || self.node(bias).requires_grad;
        Ok(self.push(sa, out, rg, Op::AddBias { a: a.0, bias: bias.0 }))
    }

    /// Elementwise product of two equal-shape tensors.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::shape("mul", self.shape(a), self.shape(b)));
        }
        let out: Vec<F> = self
            .node(a)
            .data
            .iter()
            .zip(self.node(b).data.iter())
            .map(|(&x, &y)| x * y)
            .collect();
        let rg = self.node(a).requires_grad || self.node(b).requires_grad;
        Ok(self.push(self.shape(a).to_vec(), out, rg, Op::Mul { a: a.0, b: b.0 }))
    }

    /// Multiplication by a compile-time constant (not a tape value).
    pub fn scale(&mut self, a: Var, c: F) -> Var {
        let out: Vec<F> = self.node(a).data.iter().map(|&x| x * c).collect();
        let rg = self.node(a).requires_grad;
        self.push(self.shape(a).to_vec(), out, rg, Op::Scale { a: a.0, c })
    }

    /// Sum of every element, as a `[1]` scalar.
    pub fn sum_all(&mut self, a: Var) -> Var {
        let s: F = self.node(a).data.iter().copied().sum();
        let rg = self.node(a).requires_grad;
        self.push(vec![1], vec![s], rg, Op::SumAll { a: a.0 })
    }

    /// Column means of a `[r, c]` matrix, kept 2-D as `[1, c]`.
    pub fn mean_rows(&mut self, a: Var) -> Result<Var> {
        let sa = self.shape(a).to_vec();
        let [r, c] = sa[..] else {
            return Err(Error::shape("mean_rows expects 2-D", &sa, &[]));
        };
        let da = self.node(a).data.clone();
        let inv = F::ONE / F::from_f64(r as f64);
        let mut out = vec![F::ZERO; c];
        for row in da.chunks_exact(c) {
            for (o, &x) in out.iter_mut().zip(row) {
                *o += x;
            }
        }
        out.iter_mut().for_each(|x| *x = *x * inv);
        let rg = self.node(a).requires_grad;
        Ok(self.push(vec![1, c], out, rg, Op::MeanRows { a: a.0 }))
    }

    /// Row gather: `out[i] = a[perm[i]]`. Indices may repeat.
    pub fn gather_rows(&mut self, a: Var, perm: Arc<Vec<usize>>) -> Result<Var> {
        let sa = self.shape(a).to_vec();
        let [r, c] = sa[..] else {
            return Err(Error::shape("gather_rows expects 2-D", &sa, &[]));
        };
        if let Some(&bad) = perm.iter().find(|&&i| i >= r) {
            return Err(Error::InvalidInput(format!(
                "gather_rows index {bad} out of range for {r} rows"
            )));
        }
        let da = self.node(a).data.clone();
        let mut out = Vec::with_capacity(perm.len() * c);
        for &src in perm.iter() {
            out.extend_from_slice(&da[src * c..(src + 1) * c]);
        }
        let rg = self.node(a).requires_grad;
        Ok(self.push(vec![perm.len(), c], out, rg, Op::GatherRows { a: a.0, perm }))
    }

    /// Columns `[start, start+width)` of a 2-D tensor.
    pub fn slice_cols(&mut self, a: Var, start: usize, width: usize) -> Result<Var> {
        let sa = self.shape(a).to_vec();
        let [r, c] = sa[..] else {
            return Err(Error::shape("slice_cols expects 2-D", &sa, &[]));
        };
        if start + width > c || width == 0 {
            return Err(Error::InvalidInput(format!(
                "slice_cols [{start}, {}) out of range for {c} columns",
                start + width
            )));
        }
        let da = self.node(a).data.clone();
        let mut out = Vec::with_capacity(r * width);
        for row in da.chunks_exact(c) {
            out.extend_from_slice(&row[start..start + width]);
        }
        let rg = self.node(a).requires_grad;
        Ok(self.push(vec![r, width], out, rg, Op::SliceCols { a: a.0, start, width }))
    }

    /// Same elements, new shape.
    pub fn reshape(&mut self, a: Var, shape: Vec<usize>) -> Result<Var> {
        let count: usize = shape.iter().product();
        if count != self.node(a).data.len() || shape.iter().any(|&e| e == 0) {
            return Err(Error::shape("reshape", self.shape(a), &shape));
        }
        let data = self.node(a).data.as_ref().clone();
        let rg = self.node(a).requires_grad;
        Ok(self.push(shape, data, rg, Op::Reshape { a: a.0 }))
    }

    /// Softmax along `axis`, computed with max-subtraction.
    pub fn softmax(&mut self, a: Var, axis: usize) -> Result<Var> {
        let sa = self.shape(a).to_vec();
        if axis >= sa.len() {
            return Err(Error::InvalidInput(format!(
                "softmax axis {axis} invalid for shape {sa:?}"
            )));
        }
        let da = self.node(a).data.clone();
        let mut out = vec![F::ZERO; da.len()];
        for_each_line(&sa, axis, |offset, stride, len| {
            softmax_line(&da, &mut out, offset, stride, len);
        });
        let rg = self.node(a).requires_grad;
        Ok(self.push(sa, out, rg, Op::Softmax { a: a.0, axis }))
    }

    /// Layer normalization over the last axis with learned affine.
    pub fn layer_norm(&mut self, a: Var, gamma: Var, beta: Var, eps: F) -> Result<Var> {
        let sa = self.shape(a).to_vec();
        let d = *sa.last().ok_or_else(|| Error::InvalidInput("layer_norm on 0-D tensor".into()))?;
        if self.shape(gamma) != [d] {
            return Err(Error::shape("layer_norm gamma", &sa, self.shape(gamma)));
        }
        if self.shape(beta) != [d] {
            return Err(Error::shape("layer_norm beta", &sa, self.shape(beta)));
        }
        let da = self.node(a).data.clone();
        let dg = self.node(gamma).data.clone();
        let db = self.node(beta).data.clone();
        let inv_d = F::ONE / F::from_f64(d as f64);
        let mut out = vec![F::ZERO; da.len()];
        for (row, orow) in da.chunks_exact(d).zip(out.chunks_exact_mut(d)) {
            let mean: F = row.iter().copied().sum::<F>() * inv_d;
            let var: F = row.iter().map(|&x| (x - mean) * (x - mean)).sum::<F>() * inv_d;
            let inv_std = F::ONE / (var + eps).sqrt();
            for ((o, &x), (&g, &b)) in orow.iter_mut().zip(row).zip(dg.iter().zip(db.iter())) {
                *o = (x - mean) * inv_std * g + b;
            }
        }
        let rg = self.node(a).requires_grad
            || self.node(gamma).requires_grad
            || self.node(beta).requires_grad;
        Ok(self.push(
            sa,
            out,
            rg,
            Op::LayerNorm { a: a.0, gamma: gamma.0, beta: beta.0, eps },
        ))
    }

    /// Exact GELU: `x · Φ(x)` with the Gaussian CDF, not the tanh fit.
    pub fn gelu(&mut self, a: Var) -> Var {
        let out: Vec<F> = self.node(a).data.iter().map(|&x| x * gauss_cdf(x)).collect();
        let rg = self.node(a).requires_grad;
        self.push(self.shape(a).to_vec(), out, rg, Op::Gelu { a: a.0 })
    }

    /// Cross-entropy of `[n, classes]` logits against hard or mixed labels:
    /// `−Σ_c w_c · log p̂_c` per row, reduced over the batch.
    pub fn cross_entropy(
        &mut self,
        logits: Var,
        targets: CeTargets<'_, F>,
        reduction: Reduction,
    ) -> Result<Var> {
        let sl = self.shape(logits).to_vec();
        let [n, classes] = sl[..] else {
            return Err(Error::shape("cross_entropy expects 2-D logits", &sl, &[]));
        };
        if n == 0 {
            return Err(Error::InvalidInput("cross_entropy on an empty batch".into()));
        }
        let weights: Vec<F> = match targets {
            CeTargets::Hard(labels) => {
                if labels.len() != n {
                    return Err(Error::InvalidInput(format!(
                        "{} labels for {n} logit rows",
                        labels.len()
                    )));
                }
                let mut w = vec![F::ZERO; n * classes];
                for (i, &t) in labels.iter().enumerate() {
                    if t >= classes {
                        return Err(Error::InvalidInput(format!(
                            "target class {t} out of range for {classes} classes"
                        )));
                    }
                    w[i * classes + t] = F::ONE;
                }
                w
            }
            CeTargets::Soft(w) => {
                if w.len() != n * classes {
                    return Err(Error::InvalidInput(format!(
                        "{} target weights for {n}x{classes} logits",
                        w.len()
                    )));
                }
                for row in w.chunks_exact(classes) {
                    let sum: F = row.iter().copied().sum();
                    if row.iter().any(|&x| x < F::ZERO) || (sum - F::ONE).abs().to_f64() > 1e-3 {
                        return Err(Error::InvalidInput(
                            "target weight rows must be non-negative and sum to 1".into(),
                        ));
                    }
                }
                w.to_vec()
            }
        };
        let dl = self.node(logits).data.clone();
        let mut total = F::ZERO;
        for (row, wrow) in dl.chunks_exact(classes).zip(weights.chunks_exact(classes)) {
            let m = row.iter().copied().fold(row[0], F::maximum);
            let lse = m + row.iter().map(|&x| (x - m).exp()).sum::<F>().ln();
            let dot: F = row.iter().zip(wrow).map(|(&l, &w)| l * w).sum();
            total += lse - dot;
        }
        if matches!(reduction, Reduction::Mean) {
            total = total / F::from_f64(n as f64);
        }
        let rg = self.node(logits).requires_grad;
        Ok(self.push(
            vec![1],
            vec![total],
            rg,
            Op::CrossEntropy { logits: logits.0, weights: Arc::new(weights), reduction },
        ))
    }

    /// Multi-head scaled dot-product attention over independent windows.
    ///
    /// `q`, `k`, `v` are `[windows·tokens, heads·head_dim]` with window-major
    /// rows and head-major columns. Blocked pairs (`mask[w][i][j]`) are
    /// excluded from the softmax entirely, so their attention weights are
    /// exactly zero. `bias` adds a learned per-head relative-position term
    /// to the logits.
    pub fn window_attention(
        &mut self,
        q: Var,
        k: Var,
        v: Var,
        layout: WindowLayout,
        mask: Option<Arc<Vec<bool>>>,
        bias: Option<(Var, Arc<Vec<usize>>)>,
    ) -> Result<Var> {
        let WindowLayout { windows, tokens, heads } = layout;
        let sq = self.shape(q).to_vec();
        for (name, var) in [("q", q), ("k", k), ("v", v)] {
            if self.shape(var) != sq {
                return Err(Error::shape(
                    format!("window_attention {name}"),
                    &sq,
                    self.shape(var),
                ));
            }
        }
        let [t, c] = sq[..] else {
            return Err(Error::shape("window_attention expects 2-D", &sq, &[]));
        };
        if windows * tokens != t || heads == 0 || c % heads != 0 {
            return Err(Error::InvalidInput(format!(
                "window layout {layout:?} incompatible with [{t}, {c}]"
            )));
        }
        if let Some(m) = &mask {
            if m.len() != windows * tokens * tokens {
                return Err(Error::InvalidInput(format!(
                    "mask holds {} entries, {} expected",
                    m.len(),
                    windows * tokens * tokens
                )));
            }
        }
        let dh = c / heads;
        let scale = F::ONE / F::from_f64((dh as f64).sqrt());
        let (bias_data, bias_map, bias_var) = match &bias {
            Some((bv, map)) => {
                if map.len() != tokens * tokens {
                    return Err(Error::InvalidInput(format!(
                        "bias index map holds {} entries, {} expected",
                        map.len(),
                        tokens * tokens
                    )));
                }
                let rows = self.shape(*bv).first().copied().unwrap_or(0);
                if self.shape(*bv).len() != 2
                    || self.shape(*bv)[1] != heads
                    || map.iter().any(|&r| r >= rows)
                {
                    return Err(Error::InvalidInput(
                        "bias table must be [rel_positions, heads] covering the index map".into(),
                    ));
                }
                (Some(self.node(*bv).data.clone()), Some(Arc::clone(map)), Some(*bv))
            }
            None => (None, None, None),
        };

        let (dq, dk, dv) = (
            self.node(q).data.clone(),
            self.node(k).data.clone(),
            self.node(v).data.clone(),
        );
        let mut out = vec![F::ZERO; t * c];
        let mut attn = vec![F::ZERO; windows * heads * tokens * tokens];
        let mut logits = vec![F::ZERO; tokens * tokens];
        for w in 0..windows {
            let wmask = mask.as_ref().map(|m| &m[w * tokens * tokens..(w + 1) * tokens * tokens]);
            for h in 0..heads {
                // S[i, j] = <Q_i, K_j> / sqrt(dh) (+ bias)
                logits.iter_mut().for_each(|x| *x = F::ZERO);
                for i in 0..tokens {
                    let qrow = &dq[(w * tokens + i) * c + h * dh..][..dh];
                    for j in 0..tokens {
                        let krow = &dk[(w * tokens + j) * c + h * dh..][..dh];
                        let mut acc = F::ZERO;
                        for (&x, &y) in qrow.iter().zip(krow) {
                            acc += x * y;
                        }
                        acc = acc * scale;
                        if let (Some(bd), Some(bm)) = (&bias_data, &bias_map) {
                            acc += bd[bm[i * tokens + j] * heads + h];
                        }
                        logits[i * tokens + j] = acc;
                    }
                }
                let arow = &mut attn[(w * heads + h) * tokens * tokens..][..tokens * tokens];
                masked_softmax_rows(&logits, wmask, tokens, arow);
                // O_i = sum_j A[i, j] V_j
                for i in 0..tokens {
                    let orow = &mut out[(w * tokens + i) * c + h * dh..][..dh];
                    for j in 0..tokens {
                        let a = arow[i * tokens + j];
                        if a == F::ZERO {
                            continue;
                        }
                        let vrow = &dv[(w * tokens + j) * c + h * dh..][..dh];
                        for (o, &x) in orow.iter_mut().zip(vrow) {
                            *o += a * x;
                        }
                    }
                }
            }
        }
        let rg = self.node(q).requires_grad
            || self.node(k).requires_grad
            || self.node(v).requires_grad
            || bias_var.is_some_and(|b| self.node(b).requires_grad);
        Ok(self.push(
            vec![t, c],
            out,
            rg,
            Op::WindowAttention {
                q: q.0,
                k: k.0,
                v: v.0,
                layout,
                bias: bias_var.map(|b| (b.0, bias_map.unwrap())),
                saved_attn: attn,
            },
        ))
    }

    /// Identity in the forward pass; multiplies the gradient by −1 on the
    /// way back. The hinge between the feature trunk and a domain
    /// discriminator.
    pub fn grad_reverse(&mut self, a: Var) -> Var {
        let n = self.node(a);
        let (shape, data, rg) = (n.shape.clone(), Arc::clone(&n.data), n.requires_grad);
        self.nodes.push(Node {
            shape,
            data,
            requires_grad: rg,
            grad: None,
            op: Op::GradReverse { a: a.0 },
        });
        Var(self.nodes.len() - 1)
    }

    // ── Backward ───────────────────────────────────────────────────────────

    /// Accumulates `d loss / d leaf` into every `requires_grad` leaf.
    ///
    /// Repeated calls keep accumulating; [`Tape::zero_grad`] resets.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.node(loss).data.len() != 1 {
            return Err(Error::InvalidInput(format!(
                "backward needs a scalar, got shape {:?}",
                self.shape(loss)
            )));
        }
        let n = self.nodes.len();
        let mut grads: Vec<Option<Vec<F>>> = (0..n).map(|_| None).collect();
        grads[loss.0] = Some(vec![F::ONE]);

        for i in (0..n).rev() {
            let Some(g) = grads[i].take() else { continue };
            if !self.nodes[i].requires_grad {
                continue;
            }
            // Split borrows: the node being visited is read-only; gradients
            // flow into the `grads` table, and into `node.grad` for leaves.
            match &self.nodes[i].op {
                Op::Leaf => {
                    if let Some(acc) = &mut self.nodes[i].grad {
                        for (a, &x) in acc.iter_mut().zip(&g) {
                            *a += x;
                        }
                    }
                }
                Op::MatMul { a, b } => {
                    let (a, b) = (*a, *b);
                    let (sa, sb) = (&self.nodes[a].shape, &self.nodes[b].shape);
                    let (batch, m, k, nn) = if sa.len() == 2 {
                        (1, sa[0], sa[1], sb[1])
                    } else {
                        (sa[0], sa[1], sa[2], sb[2])
                    };
                    if self.nodes[a].requires_grad {
                        let db = self.nodes[b].data.clone();
                        let ga = ensure(&mut grads[a], m * k * batch);
                        for t in 0..batch {
                            matmul_nt_acc(
                                &g[t * m * nn..(t + 1) * m * nn],
                                &db[t * k * nn..(t + 1) * k * nn],
                                m,
                                nn,
                                k,
                                &mut ga[t * m * k..(t + 1) * m * k],
                            );
                        }
                    }
                    if self.nodes[b].requires_grad {
                        let da = self.nodes[a].data.clone();
                        let gb = ensure(&mut grads[b], k * nn * batch);
                        for t in 0..batch {
                            matmul_tn_acc(
                                &da[t * m * k..(t + 1) * m * k],
                                &g[t * m * nn..(t + 1) * m * nn],
                                k,
                                m,
                                nn,
                                &mut gb[t * k * nn..(t + 1) * k * nn],
                            );
                        }
                    }
                }
                Op::Add { a, b } => {
                    for &src in &[*a, *b] {
                        if self.nodes[src].requires_grad {
                            let gs = ensure(&mut grads[src], g.len());
                            for (o, &x) in gs.iter_mut().zip(&g) {
                                *o += x;
                            }
                        }
                    }
                }
                Op::AddBias { a, bias } => {
                    let (a, bias) = (*a, *bias);
                    let d = self.nodes[bias].shape[0];
                    if self.nodes[a].requires_grad {
                        let gs = ensure(&mut grads[a], g.len());
                        for (o, &x) in gs.iter_mut().zip(&g) {
                            *o += x;
                        }
                    }
                    if self.nodes[bias].requires_grad {
                        let gb = ensure(&mut grads[bias], d);
                        for (i, &x) in g.iter().enumerate() {
                            gb[i % d] += x;
                        }
                    }
                }
                Op::Mul { a, b } => {
                    let (a, b) = (*a, *b);
                    if self.nodes[a].requires_grad {
                        let db = self.nodes[b].data.clone();
                        let ga = ensure(&mut grads[a], g.len());
                        for ((o, &x), &y) in ga.iter_mut().zip(&g).zip(db.iter()) {
                            *o += x * y;
                        }
                    }
                    if self.nodes[b].requires_grad {
                        let da = self.nodes[a].data.clone();
                        let gb = ensure(&mut grads[b], g.len());
                        for ((o, &x), &y) in gb.iter_mut().zip(&g).zip(da.iter()) {
                            *o += x * y;
                        }
                    }
                }
                Op::Scale { a, c } => {
                    let (a, c) = (*a, *c);
                    if self.nodes[a].requires_grad {
                        let ga = ensure(&mut grads[a], g.len());
                        for (o, &x) in ga.iter_mut().zip(&g) {
                            *o += x * c;
                        }
                    }
                }
                Op::SumAll { a } => {
                    let a = *a;
                    if self.nodes[a].requires_grad {
                        let len = self.nodes[a].data.len();
                        let ga = ensure(&mut grads[a], len);
                        for o in ga.iter_mut() {
                            *o += g[0];
                        }
                    }
                }
                Op::MeanRows { a } => {
                    let a = *a;
                    if self.nodes[a].requires_grad {
                        let [r, c] = self.nodes[a].shape[..] else { unreachable!() };
                        let inv = F::ONE / F::from_f64(r as f64);
                        let ga = ensure(&mut grads[a], r * c);
                        for row in ga.chunks_exact_mut(c) {
                            for (o, &x) in row.iter_mut().zip(&g) {
                                *o += x * inv;
                            }
                        }
                    }
                }
                Op::GatherRows { a, perm } => {
                    let (a, perm) = (*a, Arc::clone(perm));
                    if self.nodes[a].requires_grad {
                        let c = self.nodes[a].shape[1];
                        let len = self.nodes[a].data.len();
                        let ga = ensure(&mut grads[a], len);
                        for (dst, &src) in perm.iter().enumerate() {
                            let grow = &g[dst * c..(dst + 1) * c];
                            let orow = &mut ga[src * c..(src + 1) * c];
                            for (o, &x) in orow.iter_mut().zip(grow) {
                                *o += x;
                            }
                        }
                    }
                }
                Op::SliceCols { a, start, width } => {
                    let (a, start, width) = (*a, *start, *width);
                    if self.nodes[a].requires_grad {
                        let [r, c] = self.nodes[a].shape[..] else { unreachable!() };
                        let ga = ensure(&mut grads[a], r * c);
                        for i in 0..r {
                            let grow = &g[i * width..(i + 1) * width];
                            let orow = &mut ga[i * c + start..i * c + start + width];
                            for (o, &x) in orow.iter_mut().zip(grow) {
                                *o += x;
                            }
                        }
                    }
                }
                Op::Reshape { a } => {
                    let a = *a;
                    if self.nodes[a].requires_grad {
                        let ga = ensure(&mut grads[a], g.len());
                        for (o, &x) in ga.iter_mut().zip(&g) {
                            *o += x;
                        }
                    }
                }
                Op::Softmax { a, axis } => {
                    let (a, axis) = (*a, *axis);
                    if self.nodes[a].requires_grad {
                        let s = self.nodes[i].data.clone();
                        let shape = self.nodes[a].shape.clone();
                        let ga = ensure(&mut grads[a], g.len());
                        for_each_line(&shape, axis, |offset, stride, len| {
                            // dx_i = s_i (g_i − Σ_j g_j s_j)
                            let mut dot = F::ZERO;
                            for q in 0..len {
                                let idx = offset + q * stride;
                                dot += g[idx] * s[idx];
                            }
                            for q in 0..len {
                                let idx = offset + q * stride;
                                ga[idx] += s[idx] * (g[idx] - dot);
                            }
                        });
                    }
                }
                Op::LayerNorm { a, gamma, beta, eps } => {
                    let (a, gamma, beta, eps) = (*a, *gamma, *beta, *eps);
                    let d = self.nodes[gamma].shape[0];
                    let rows = g.len() / d;
                    let da = self.nodes[a].data.clone();
                    let dg = self.nodes[gamma].data.clone();
                    let inv_d = F::ONE / F::from_f64(d as f64);
                    let need_a = self.nodes[a].requires_grad;
                    let need_g = self.nodes[gamma].requires_grad;
                    let need_b = self.nodes[beta].requires_grad;
                    let mut ga_buf = need_a.then(|| vec![F::ZERO; rows * d]);
                    let mut gg_buf = need_g.then(|| vec![F::ZERO; d]);
                    let mut gb_buf = need_b.then(|| vec![F::ZERO; d]);
                    for row in 0..rows {
                        let x = &da[row * d..(row + 1) * d];
                        let go = &g[row * d..(row + 1) * d];
                        let mean: F = x.iter().copied().sum::<F>() * inv_d;
                        let var: F = x.iter().map(|&v| (v - mean) * (v - mean)).sum::<F>() * inv_d;
                        let inv_std = F::ONE / (var + eps).sqrt();
                        if let Some(gb) = &mut gb_buf {
                            for (o, &v) in gb.iter_mut().zip(go) {
                                *o += v;
                            }
                        }
                        if let Some(gg) = &mut gg_buf {
                            for q in 0..d {
                                gg[q] += go[q] * (x[q] - mean) * inv_std;
                            }
                        }
                        if let Some(ga) = &mut ga_buf {
                            // dx = (γg − mean(γg) − x̂·mean(γg⊙x̂)) / std
                            let mut m1 = F::ZERO;
                            let mut m2 = F::ZERO;
                            for q in 0..d {
                                let gg = dg[q] * go[q];
                                m1 += gg;
                                m2 += gg * (x[q] - mean) * inv_std;
                            }
                            m1 = m1 * inv_d;
                            m2 = m2 * inv_d;
                            let out = &mut ga[row * d..(row + 1) * d];
                            for q in 0..d {
                                let xh = (x[q] - mean) * inv_std;
                                out[q] += (dg[q] * go[q] - m1 - xh * m2) * inv_std;
                            }
                        }
                    }
                    if let Some(buf) = ga_buf {
                        accumulate(&mut grads[a], buf);
                    }
                    if let Some(buf) = gg_buf {
                        accumulate(&mut grads[gamma], buf);
                    }
                    if let Some(buf) = gb_buf {
                        accumulate(&mut grads[beta], buf);
                    }
                }
                Op::Gelu { a } => {
                    let a = *a;
                    if self.nodes[a].requires_grad {
                        let da = self.nodes[a].data.clone();
                        let ga = ensure(&mut grads[a], g.len());
                        for ((o, &x), &up) in ga.iter_mut().zip(da.iter()).zip(&g) {
                            *o += up * gelu_derivative(x);
                        }
                    }
                }
                Op::CrossEntropy { logits, weights, reduction } => {
                    let (logits, weights, reduction) = (*logits, Arc::clone(weights), *reduction);
                    if self.nodes[logits].requires_grad {
                        let [n_rows, classes] = self.nodes[logits].shape[..] else {
                            unreachable!()
                        };
                        let dl = self.nodes[logits].data.clone();
                        let norm = match reduction {
                            Reduction::Mean => g[0] / F::from_f64(n_rows as f64),
                            Reduction::Sum => g[0],
                        };
                        let gl = ensure(&mut grads[logits], n_rows * classes);
                        for ((row, wrow), orow) in dl
                            .chunks_exact(classes)
                            .zip(weights.chunks_exact(classes))
                            .zip(gl.chunks_exact_mut(classes))
                        {
                            let m = row.iter().copied().fold(row[0], F::maximum);
                            let denom: F = row.iter().map(|&x| (x - m).exp()).sum();
                            for q in 0..classes {
                                let p = (row[q] - m).exp() / denom;
                                orow[q] += (p - wrow[q]) * norm;
                            }
                        }
                    }
                }
                Op::WindowAttention { q, k, v, layout, bias, saved_attn } => {
                    let (q, k, v) = (*q, *k, *v);
                    let layout = *layout;
                    let bias = bias.as_ref().map(|(b, m)| (*b, Arc::clone(m)));
                    let attn = saved_attn.clone();
                    self.window_attention_backward(q, k, v, layout, bias, attn, &g, &mut grads);
                }
                Op::GradReverse { a } => {
                    let a = *a;
                    if self.nodes[a].requires_grad {
                        let ga = ensure(&mut grads[a], g.len());
                        for (o, &x) in ga.iter_mut().zip(&g) {
                            *o += -x;
                        }
                    }
                }
            }
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn window_attention_backward(
        &self,
        q: usize,
        k: usize,
        v: usize,
        layout: WindowLayout,
        bias: Option<(usize, Arc<Vec<usize>>)>,
        attn: Vec<F>,
        g: &[F],
        grads: &mut [Option<Vec<F>>],
    ) {
        let WindowLayout { windows, tokens, heads } = layout;
        let c = self.nodes[q].shape[1];
        let dh = c / heads;
        let scale = F::ONE / F::from_f64((dh as f64).sqrt());
        let t = windows * tokens;
        let (dq_dat, dk_dat, dv_dat) = (
            self.nodes[q].data.clone(),
            self.nodes[k].data.clone(),
            self.nodes[v].data.clone(),
        );
        let need_q = self.nodes[q].requires_grad;
        let need_k = self.nodes[k].requires_grad;
        let need_v = self.nodes[v].requires_grad;
        let need_b = bias.as_ref().is_some_and(|(b, _)| self.nodes[*b].requires_grad);
        let mut gq = need_q.then(|| vec![F::ZERO; t * c]);
        let mut gk = need_k.then(|| vec![F::ZERO; t * c]);
        let mut gv = need_v.then(|| vec![F::ZERO; t * c]);
        let mut gb = if need_b {
            let (b, _) = bias.as_ref().unwrap();
            Some(vec![F::ZERO; self.nodes[*b].data.len()])
        } else {
            None
        };

        let nn = tokens * tokens;
        let mut d_attn = vec![F::ZERO; nn];
        let mut d_s = vec![F::ZERO; nn];
        for w in 0..windows {
            for h in 0..heads {
                let a_wh = &attn[(w * heads + h) * nn..][..nn];
                // dA[i, j] = <dO_i, V_j>
                for i in 0..tokens {
                    let grow = &g[(w * tokens + i) * c + h * dh..][..dh];
                    for j in 0..tokens {
                        let vrow = &dv_dat[(w * tokens + j) * c + h * dh..][..dh];
                        let mut acc = F::ZERO;
                        for (&x, &y) in grow.iter().zip(vrow) {
                            acc += x * y;
                        }
                        d_attn[i * tokens + j] = acc;
                    }
                }
                // Softmax rows: dS = A ⊙ (dA − Σ_j dA·A). Blocked entries
                // have A = 0, so they contribute and receive nothing.
                for i in 0..tokens {
                    let arow = &a_wh[i * tokens..(i + 1) * tokens];
                    let drow = &d_attn[i * tokens..(i + 1) * tokens];
                    let mut dot = F::ZERO;
                    for (&a, &d) in arow.iter().zip(drow) {
                        dot += a * d;
                    }
                    for j in 0..tokens {
                        d_s[i * tokens + j] = arow[j] * (drow[j] - dot);
                    }
                }
                if let (Some(gbias), Some((_, map))) = (&mut gb, bias.as_ref().map(|(b, m)| (b, m)))
                {
                    for i in 0..tokens {
                        for j in 0..tokens {
                            gbias[map[i * tokens + j] * heads + h] += d_s[i * tokens + j];
                        }
                    }
                }
                // Raw logits were scaled by 1/sqrt(dh).
                if let Some(gq) = &mut gq {
                    for i in 0..tokens {
                        let orow = &mut gq[(w * tokens + i) * c + h * dh..][..dh];
                        for j in 0..tokens {
                            let ds = d_s[i * tokens + j] * scale;
                            if ds == F::ZERO {
                                continue;
                            }
                            let krow = &dk_dat[(w * tokens + j) * c + h * dh..][..dh];
                            for (o, &x) in orow.iter_mut().zip(krow) {
                                *o += ds * x;
                            }
                        }
                    }
                }
                if let Some(gk) = &mut gk {
                    for j in 0..tokens {
                        let orow = &mut gk[(w * tokens + j) * c + h * dh..][..dh];
                        for i in 0..tokens {
                            let ds = d_s[i * tokens + j] * scale;
                            if ds == F::ZERO {
                                continue;
                            }
                            let qrow = &dq_dat[(w * tokens + i) * c + h * dh..][..dh];
                            for (o, &x) in orow.iter_mut().zip(qrow) {
                                *o += ds * x;
                            }
                        }
                    }
                }
                if let Some(gv) = &mut gv {
                    for j in 0..tokens {
                        let orow = &mut gv[(w * tokens + j) * c + h * dh..][..dh];
                        for i in 0..tokens {
                            let a = a_wh[i * tokens + j];
                            if a == F::ZERO {
                                continue;
                            }
                            let grow = &g[(w * tokens + i) * c + h * dh..][..dh];
                            for (o, &x) in orow.iter_mut().zip(grow) {
                                *o += a * x;
                            }
                        }
                    }
                }
            }
        }
        if let Some(buf) = gq {
            accumulate(&mut grads[q], buf);
        }
        if let Some(buf) = gk {
            accumulate(&mut grads[k], buf);
        }
        if let Some(buf) = gv {
            accumulate(&mut grads[v], buf);
        }
        if let (Some(buf), Some((b, _))) = (gb, bias) {
            accumulate(&mut grads[b], buf);
        }
    }
}

/// Gets the gradient buffer for a node, allocating zeros on first touch.
fn ensure<F: Element>(slot: &mut Option<Vec<F>>, len: usize) -> &mut Vec<F> {
    slot.get_or_insert_with(|| vec![F::ZERO; len])
}

fn accumulate<F: Element>(slot: &mut Option<Vec<F>>, buf: Vec<F>) {
    match slot {
        None => *slot = Some(buf),
        Some(g) => {
            for (o, x) in g.iter_mut().zip(buf) {
                *o += x;
            }
        }
    }
}

/// Visits every 1-D line along `axis` of a row-major tensor,
/// yielding `(offset, stride, len)`.
fn for_each_line(shape: &[usize], axis: usize, mut f: impl FnMut(usize, usize, usize)) {
    let len = shape[axis];
    let stride: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    let inner = stride;
    let block = len * stride;
    for o in 0..outer {
        for i in 0..inner {
            f(o * block + i, stride, len);
        }
    }
}

fn softmax_line<F: Element>(x: &[F], out: &mut [F], offset: usize, stride: usize, len: usize) {
    let mut m = x[offset];
    for q in 1..len {
        m = m.maximum(x[offset + q * stride]);
    }
    let mut denom = F::ZERO;
    for q in 0..len {
        let e = (x[offset + q * stride] - m).exp();
        out[offset + q * stride] = e;
        denom += e;
    }
    for q in 0..len {
        out[offset + q * stride] = out[offset + q * stride] / denom;
    }
}

/// Row-wise softmax with structural masking: blocked entries take no part
/// in the normalization and come out exactly zero.
fn masked_softmax_rows<F: Element>(logits: &[F], mask: Option<&[bool]>, n: usize, out: &mut [F]) {
    for i in 0..n {
        let row = &logits[i * n..(i + 1) * n];
        let mrow = mask.map(|m| &m[i * n..(i + 1) * n]);
        let blocked = |j: usize| mrow.is_some_and(|m| m[j]);
        let mut m = None::<F>;
        for j in 0..n {
            if !blocked(j) {
                m = Some(match m {
                    None => row[j],
                    Some(cur) => cur.maximum(row[j]),
                });
            }
        }
        let m = m.expect("attention row with every pair blocked");
        let mut denom = F::ZERO;
        for j in 0..n {
            if !blocked(j) {
                denom += (row[j] - m).exp();
            }
        }
        for j in 0..n {
            out[i * n + j] = if blocked(j) {
                F::ZERO
            } else {
                (row[j] - m).exp() / denom
            };
        }
    }
}

/// Standard Gaussian CDF, `Φ(x)`.
fn gauss_cdf<F: Element>(x: F) -> F {
    let half = F::from_f64(0.5);
    let inv_sqrt2 = F::from_f64(std::f64::consts::FRAC_1_SQRT_2);
    half * (F::ONE + (x * inv_sqrt2).erf())
}

/// d/dx [x·Φ(x)] = Φ(x) + x·φ(x).
fn gelu_derivative<F: Element>(x: F) -> F {
    let pdf = F::from_f64(1.0 / (2.0 * std::f64::consts::PI).sqrt())
        * (-(x * x) * F::from_f64(0.5)).exp();
    gauss_cdf(x) + x * pdf
}
