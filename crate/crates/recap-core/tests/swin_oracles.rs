//! Oracle tests for the classifier: brute-force index/mask enumeration,
//! finite-difference gradients through the whole network, and the
//! degeneracies (zero queries, single-token windows, unshifted masks) whose
//! outcomes are known in closed form.

mod common;

use std::sync::Arc;

use common::pseudo_uniform;
use recap_core::data::ImageTensor;
use recap_core::swin::{windows, SwinConfig, SwinNet, SwinParams};
use recap_core::tensor::{CeTargets, Reduction, Tape, Tensor, WindowLayout};

fn image(seed: u64, size: usize) -> ImageTensor {
    let data = pseudo_uniform(seed, size * size * 3)
        .into_iter()
        .map(|v| v as f32)
        .collect();
    ImageTensor::new(size, size, data).unwrap()
}

/// The seam mask, derived independently: a token at rolled position (r, c)
/// originated at ((r+shift) mod grid, (c+shift) mod grid); it wrapped on an
/// axis iff that addition overflowed the grid. Two tokens of one window may
/// attend iff their wrap status agrees on both axes.
fn brute_force_mask(grid: usize, m: usize, shift: usize) -> Vec<bool> {
    let per_side = grid / m;
    let mut out = Vec::new();
    for wr in 0..per_side {
        for wc in 0..per_side {
            let tokens: Vec<(usize, usize)> =
                (0..m * m).map(|t| (wr * m + t / m, wc * m + t % m)).collect();
            for &(r1, c1) in &tokens {
                for &(r2, c2) in &tokens {
                    let w1 = (r1 + shift >= grid, c1 + shift >= grid);
                    let w2 = (r2 + shift >= grid, c2 + shift >= grid);
                    out.push(w1 != w2);
                }
            }
        }
    }
    out
}

#[test]
fn seam_mask_matches_brute_force_wrap_enumeration() {
    for (grid, m) in [(8usize, 4usize), (16, 4), (12, 4), (8, 2)] {
        for shift in 1..m {
            assert_eq!(
                windows::attention_mask(grid, m, shift),
                brute_force_mask(grid, m, shift),
                "grid {grid}, window {m}, shift {shift}"
            );
        }
    }
}

#[test]
fn an_all_clear_mask_is_bitwise_identical_to_no_mask() {
    // The shifted machinery with shift 0 must collapse to the plain path;
    // at the attention level that means Some(all-false) ≡ None exactly.
    let layout = WindowLayout { windows: 2, tokens: 4, heads: 2 };
    let q0 = Tensor::from_vec(vec![8, 4], pseudo_uniform(1, 32)).unwrap();
    let k0 = Tensor::from_vec(vec![8, 4], pseudo_uniform(2, 32)).unwrap();
    let v0 = Tensor::from_vec(vec![8, 4], pseudo_uniform(3, 32)).unwrap();
    let mut tape = Tape::new();
    let (q, k, v) =
        (tape.constant(&q0), tape.constant(&k0), tape.constant(&v0));
    let plain = tape.window_attention(q, k, v, layout, None, None).unwrap();
    let cleared = tape
        .window_attention(q, k, v, layout, Some(Arc::new(vec![false; 32])), None)
        .unwrap();
    assert_eq!(tape.value(plain).data(), tape.value(cleared).data());
}

#[test]
fn zero_queries_average_each_window_and_single_tokens_pass_through() {
    // Q = K = 0 makes every softmax row uniform, so outputs are window
    // means of V regardless of head count.
    let layout = WindowLayout { windows: 4, tokens: 4, heads: 2 };
    let v0 = Tensor::from_vec(vec![16, 4], pseudo_uniform(7, 64)).unwrap();
    let zeros = Tensor::zeros(vec![16, 4]);
    let mut tape = Tape::new();
    let z = tape.constant(&zeros);
    let v = tape.constant(&v0);
    let out = tape.window_attention(z, z, v, layout, None, None).unwrap();
    let got = tape.value(out);
    for w in 0..4 {
        for ch in 0..4 {
            let mean: f64 =
                (0..4).map(|t| v0.data()[(w * 4 + t) * 4 + ch]).sum::<f64>() / 4.0;
            for t in 0..4 {
                let val = got.data()[(w * 4 + t) * 4 + ch];
                assert!((val - mean).abs() < 1e-12, "window {w} ch {ch}");
            }
        }
    }

    // A one-token window attends only to itself: output = V.
    let single = WindowLayout { windows: 16, tokens: 1, heads: 2 };
    let q0 = Tensor::from_vec(vec![16, 4], pseudo_uniform(8, 64)).unwrap();
    let k0 = Tensor::from_vec(vec![16, 4], pseudo_uniform(9, 64)).unwrap();
    let mut tape = Tape::new();
    let q = tape.constant(&q0);
    let k = tape.constant(&k0);
    let v = tape.constant(&v0);
    let out = tape.window_attention(q, k, v, single, None, None).unwrap();
    assert_eq!(tape.value(out).data(), v0.data());
}

#[test]
fn window_attention_is_equivariant_to_token_permutation() {
    let layout = WindowLayout { windows: 1, tokens: 4, heads: 2 };
    let q0 = Tensor::from_vec(vec![4, 4], pseudo_uniform(11, 16)).unwrap();
    let k0 = Tensor::from_vec(vec![4, 4], pseudo_uniform(12, 16)).unwrap();
    let v0 = Tensor::from_vec(vec![4, 4], pseudo_uniform(13, 16)).unwrap();
    let perm = Arc::new(vec![2usize, 0, 3, 1]);

    let mut tape = Tape::new();
    let (q, k, v) =
        (tape.constant(&q0), tape.constant(&k0), tape.constant(&v0));
    let out = tape.window_attention(q, k, v, layout, None, None).unwrap();
    let out_then_perm = tape.gather_rows(out, perm.clone()).unwrap();

    let qp = tape.gather_rows(q, perm.clone()).unwrap();
    let kp = tape.gather_rows(k, perm.clone()).unwrap();
    let vp = tape.gather_rows(v, perm.clone()).unwrap();
    let perm_then_out =
        tape.window_attention(qp, kp, vp, layout, None, None).unwrap();

    let a = tape.value(out_then_perm);
    let b = tape.value(perm_then_out);
    for (x, y) in a.data().iter().zip(b.data()) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn logits_are_exactly_the_head_applied_to_extracted_features() {
    let cfg = SwinConfig::small();
    let net = SwinNet::new(cfg.clone()).unwrap();
    let params = SwinParams::<f32>::init(&cfg, 21).unwrap();
    let (features, logits) = net.infer(&params, &image(4, 32)).unwrap();

    // Replaying the head on the extracted features must reproduce the
    // logits bitwise — same kernel, same operand bytes.
    let f = Tensor::from_vec(vec![1, cfg.feature_dim()], features).unwrap();
    let mut tape = Tape::new();
    let fv = tape.constant(&f);
    let w = tape.leaf(params.get("head.weight").unwrap(), false);
    let b = tape.leaf(params.get("head.bias").unwrap(), false);
    let out = tape.matmul(fv, w).unwrap();
    let out = tape.add_bias(out, b).unwrap();
    assert_eq!(tape.value(out).data(), logits.as_slice());
}

#[test]
fn whole_network_gradients_match_finite_differences() {
    // f64 check through every mechanism at once: real shift+mask at stage
    // 0, clamped windows later, relative-position bias on, both residual
    // branches, merges, pooling, head, and the loss.
    let cfg = SwinConfig { use_attention_bias: true, ..SwinConfig::small() };
    let net = SwinNet::new(cfg.clone()).unwrap();
    let params = SwinParams::<f32>::init(&cfg, 33).unwrap().cast::<f64>();
    let tokens = net.patch_tokens::<f64>(&image(5, 32)).unwrap();
    let label = [0usize];

    let loss_with = |mutate: Option<(usize, usize, f64)>| -> f64 {
        let mut p = params.clone();
        if let Some((ti, ei, delta)) = mutate {
            p.tensors_mut()[ti].data_mut()[ei] += delta;
        }
        let mut tape = Tape::new();
        let graph = net.build_graph(&mut tape, &p, &tokens, false).unwrap();
        let loss = tape
            .cross_entropy(graph.logits, CeTargets::Hard(&label), Reduction::Mean)
            .unwrap();
        tape.value(loss).data()[0]
    };

    let mut tape = Tape::new();
    let graph = net.build_graph(&mut tape, &params, &tokens, true).unwrap();
    let loss = tape
        .cross_entropy(graph.logits, CeTargets::Hard(&label), Reduction::Mean)
        .unwrap();
    tape.backward(loss).unwrap();

    let probes = [
        "patch_embed.weight",
        "patch_embed.bias",
        "stage0.block0.qkv.weight",
        "stage0.block1.proj.weight",
        "stage0.block1.attn_bias.table",
        "stage0.block0.ln1.gamma",
        "stage1.block1.ln2.beta",
        "stage1.block0.mlp.fc1.weight",
        "merge0.weight",
        "merge2.weight",
        "stage3.block1.mlp.fc2.bias",
        "head.weight",
        "head.bias",
    ];
    let h = 1e-5;
    for name in probes {
        let ti = params.index_of(name).unwrap();
        let len = params.tensors()[ti].len();
        let grad = tape.grad(graph.param_vars[ti]).unwrap().to_vec();
        for ei in [0, len / 2, len - 1] {
            let plus = loss_with(Some((ti, ei, h)));
            let minus = loss_with(Some((ti, ei, -h)));
            let fd = (plus - minus) / (2.0 * h);
            let got = grad[ei];
            let scale = fd.abs().max(got.abs()).max(1e-7);
            assert!(
                (fd - got).abs() / scale < 1e-4,
                "{name}[{ei}]: fd {fd} vs grad {got}"
            );
        }
    }
}

#[test]
fn stage_resolution_and_width_progression_holds_across_configs() {
    let base = SwinConfig::toy();
    let configs = [
        base.clone(),
        SwinConfig::small(),
        SwinConfig { use_attention_bias: true, ..base.clone() },
        SwinConfig {
            input_size: 128,
            patch_size: 8,
            embed_dim: 8,
            num_heads: [1, 1, 2, 4],
            mlp_ratio: 1,
            ..base
        },
    ];
    for cfg in configs {
        let grid0 = cfg.input_size / cfg.patch_size;
        for s in 0..4 {
            assert_eq!(cfg.stage_grid(s), grid0 >> s);
            assert_eq!(cfg.stage_channels(s), cfg.embed_dim << s);
        }
        let net = SwinNet::new(cfg.clone()).unwrap();
        let params = SwinParams::<f32>::init(&cfg, 1).unwrap();
        let (features, logits) =
            net.infer(&params, &image(6, cfg.input_size)).unwrap();
        assert_eq!(features.len(), cfg.embed_dim * 8);
        assert_eq!(logits.len(), 2);
        assert!(logits.iter().all(|v| v.is_finite()));
    }
}

#[test]
fn full_scale_config_constructs_and_runs() {
    // The geometry used at natural image sizes: 224 input, 4-pixel
    // patches, widths 96…768, 7-token windows, depths 2-2-6-2.
    let cfg = SwinConfig {
        input_size: 224,
        patch_size: 4,
        embed_dim: 96,
        depths: [2, 2, 6, 2],
        num_heads: [3, 6, 12, 24],
        window_size: 7,
        use_attention_bias: true,
        mlp_ratio: 4,
    };
    cfg.validate().unwrap();
    let net = SwinNet::new(cfg.clone()).unwrap();
    let params = SwinParams::<f32>::init(&cfg, 2).unwrap();
    assert!(params.scalar_count() > 25_000_000);
    let logits = net.forward(&params, &image(7, 224)).unwrap();
    assert_eq!(logits.len(), 2);
    assert!(logits.iter().all(|v| v.is_finite()));
}
