//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Runs as a plain binary (`harness = false`).

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use lsl_cli::{cmd_gen, cmd_params, cmd_search, cmd_train, parse_arch_file, ExperimentConfig, RunDir, Session};
use lsl_core::arch::{
    dense_pretrain_init, select_architecture, ArchitectureSpec, DecoderMode, LayerKind, MixingRunResult, Model,
    ModelConfig,
};
use lsl_core::data::{direction_filter, all_directions, Corpus, CorpusSpec, DirectionMode, ExamplePair};
use lsl_core::eval::{corpus_chrf, chrf, evaluate_matrix, paired_bootstrap, render_symbols, ChrfConfig, Translator};
use lsl_core::layers::{
    decoder_layer_forward, encoder_layer_forward, multi_head_attention, AttentionMask, DecoderLayerParams,
    EncoderLayerParams, ModelDims,
};
use lsl_core::lsl::{lsl_forward, mixed_layer_forward, IndexMode, LanguageId, LslBank, MixedLayer, RoutingContext};
use lsl_core::tensors::{ParamId, ParamStore, Tape, Tensor, Var};
use lsl_core::train::{train_loop, TrainConfig, TrainData, TrainMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn langs(n: usize) -> Vec<LanguageId> {
    (0..n).map(|i| LanguageId::new(format!("syn{i}")).unwrap()).collect()
}

fn random_tensor(shape: Vec<usize>, seed: u64, scale: f64) -> Tensor<f64> {
    let n = shape.iter().product();
    let mut r = rng(seed);
    Tensor::new(shape, (0..n).map(|_| scale * r.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn within_budget(start: Instant, budget: Duration) -> Result<(), String> {
    ensure(start.elapsed() < budget, || format!("took {:.1?}, budget {budget:?}", start.elapsed()))
}

// ---------------------------------------------------------------- 1

fn full_scale_dims() -> ModelDims {
    ModelDims { d_model: 512, d_ffn: 2048, n_heads: 8, n_enc_layers: 16, n_dec_layers: 3, vocab_size: 250_000 }
}

fn criterion_1() -> Check {
    let start = Instant::now();
    let all: String = (1..=16).map(|i| i.to_string()).collect::<Vec<_>>().join(",");
    let mixed = format!("enc=16 dec=separate mixed=[{all}]");
    let cases: [(&str, f64, Option<f64>); 5] = [
        ("enc=16 dec=separate src=[] tgt=[]", 299.0, Some(186.0)),
        ("enc=16 dec=separate src=[3,4] tgt=[13,14,15]", 441.0, Some(186.0)),
        ("enc=16 dec=shared src=[] tgt=[]", 186.0, None),
        ("enc=16 dec=shared src=[4] tgt=[12,13,14,15,16]", 356.0, None),
        (&mixed, 804.0, None),
    ];
    let mut detail = Vec::new();
    for (arch, total, effective) in cases {
        let spec = ArchitectureSpec::parse(arch).map_err(err)?;
        let r = cmd_params(&spec, full_scale_dims(), 10, false).map_err(err)?;
        let rel = |actual: usize, m: f64| (actual as f64 - m * 1e6).abs() / (m * 1e6);
        ensure(rel(r.total, total) <= 0.03, || format!("{arch}: total {} vs {total}M", r.total))?;
        if let Some(e) = effective {
            ensure(rel(r.effective, e) <= 0.03, || format!("{arch}: effective {} vs {e}M", r.effective))?;
        }
        detail.push(format!("{:.1}M", r.total as f64 / 1e6));
    }
    within_budget(start, Duration::from_secs(1))?;
    Ok(format!("totals {} in {:.0?}", detail.join("/"), start.elapsed()))
}

// ---------------------------------------------------------------- 2

const FD_EPS: f64 = 1e-5;
const GRAD_TOL: f64 = 1e-4;

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / (a.abs() + n.abs() + 1e-8)
}

/// `sum(y * w)` for fixed weights in [-0.01, 0.01].
fn probe(tape: &mut Tape<'_, f64>, y: Var, seed: u64) -> lsl_core::Result<Var> {
    let w = random_tensor(tape.shape(y).to_vec(), seed, 0.01);
    let w = tape.leaf(&w, false)?;
    let p = tape.mul(y, w)?;
    tape.sum(p)
}

/// Worst relative error between reverse-mode and central-difference
/// gradients over every coordinate of `ids`.
fn fd_check<F>(store: &ParamStore<f64>, ids: &[ParamId], f: F) -> f64
where
    F: Fn(&mut Tape<'_, f64>) -> lsl_core::Result<Var>,
{
    let eval = |s: &ParamStore<f64>| {
        let mut t = Tape::new(s);
        let y = f(&mut t).unwrap();
        t.value(y)[0]
    };
    let mut acc = store.clone();
    acc.zero_grad();
    let mut tape = Tape::new(store);
    let y = f(&mut tape).unwrap();
    tape.backward(y).unwrap().accumulate_into(&mut acc);
    let mut worst: f64 = 0.0;
    for &id in ids {
        for i in 0..store.value(id).numel() {
            let mut s = store.clone();
            s.get_mut(id).value.data_mut()[i] += FD_EPS;
            let up = eval(&s);
            s.get_mut(id).value.data_mut()[i] -= 2.0 * FD_EPS;
            let down = eval(&s);
            worst = worst.max(rel_err(acc.grad(id)[i], (up - down) / (2.0 * FD_EPS)));
        }
    }
    worst
}

fn desk_dims(d: usize, vocab: usize) -> ModelDims {
    ModelDims { d_model: d, d_ffn: 2 * d, n_heads: 2, n_enc_layers: 4, n_dec_layers: 2, vocab_size: vocab }
}

/// Moves norm and bias parameters off their initial values.
fn perturb(store: &mut ParamStore<f64>, seed: u64) {
    let mut r = rng(seed);
    for p in store.params_mut() {
        if p.name.contains("norm") || p.name.ends_with(".bias") {
            p.value.data_mut().iter_mut().for_each(|v| *v += r.gen_range(-0.3..0.3));
        }
    }
}

fn criterion_2() -> Check {
    let start = Instant::now();
    let dims = desk_dims(8, 10);
    let mut store = ParamStore::new();
    let mut r = rng(50);
    let enc = EncoderLayerParams::init(&mut store, "enc", &dims, &mut r);
    let dec = DecoderLayerParams::init(&mut store, "dec", &dims, &mut r);
    let bank = LslBank::init(&mut store, "lsl", IndexMode::Src, &langs(3), &dims, &mut r);
    let mixed = MixedLayer::init(&mut store, "mix", &langs(3), &dims, &mut r);
    store.get_mut(mixed.gate).value = Tensor::vector(&[0.4, -0.3, 0.1]);
    perturb(&mut store, 51);

    let x = random_tensor(vec![4, 8], 52, 1.0);
    let mem = random_tensor(vec![3, 8], 53, 1.0);
    let pad = AttentionMask::padding(2, 2, 2, &[false, false, false, true]).map_err(err)?;
    let full = AttentionMask::padding(1, 4, 4, &[false; 4]).map_err(err)?;
    let causal = AttentionMask::causal(1, 4, &[false; 4]).map_err(err)?;
    let cross = AttentionMask::padding(1, 4, 3, &[false, false, true]).map_err(err)?;
    let ctx = RoutingContext::new(langs(3)[1].clone(), langs(3)[2].clone());

    let mut results = Vec::new();
    let attn_ids = [enc.attn.query.weight, enc.attn.query.bias, enc.attn.key.weight, enc.attn.value.weight, enc.attn.output.weight, enc.attn.output.bias];
    results.push(("attention", fd_check(&store, &attn_ids, |t| {
        let xv = t.leaf(&x, false)?;
        let y = multi_head_attention(t, &enc.attn, xv, xv, &full, 2)?;
        probe(t, y, 1)
    })));
    let ffn_ids = [enc.ffn.up.weight, enc.ffn.up.bias, enc.ffn.down.weight, enc.ffn.down.bias];
    results.push(("ffn", fd_check(&store, &ffn_ids, |t| {
        let xv = t.leaf(&x, false)?;
        let y = enc.ffn.forward(t, xv)?;
        probe(t, y, 2)
    })));
    results.push(("encoder layer", fd_check(&store, &enc.param_ids(), |t| {
        let xv = t.leaf(&x, false)?;
        let y = encoder_layer_forward(t, &enc, xv, &pad, 2)?;
        probe(t, y, 3)
    })));
    results.push(("decoder layer", fd_check(&store, &dec.param_ids(), |t| {
        let xv = t.leaf(&x, false)?;
        let mv = t.leaf(&mem, false)?;
        let y = decoder_layer_forward(t, &dec, xv, mv, &causal, &cross, 2)?;
        probe(t, y, 4)
    })));
    results.push(("lsl", fd_check(&store, &bank.param_ids(), |t| {
        let xv = t.leaf(&x, false)?;
        let y = lsl_forward(t, xv, &full, &ctx, &bank, 2)?;
        probe(t, y, 5)
    })));
    let mut mixed_ids = vec![mixed.gate];
    mixed_ids.extend(mixed.shared.param_ids());
    mixed_ids.extend(mixed.bank.param_ids());
    results.push(("mixed+gates", fd_check(&store, &mixed_ids, |t| {
        let xv = t.leaf(&x, false)?;
        let g = t.param(mixed.gate);
        let y = mixed_layer_forward(t, xv, &full, &ctx, &mixed.shared, &mixed.bank, g, 2)?;
        probe(t, y, 6)
    })));
    for (name, worst) in &results {
        ensure(*worst < GRAD_TOL, || format!("{name}: worst rel err {worst:e}"))?;
    }
    within_budget(start, Duration::from_secs(60))?;
    let worst = results.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(format!("6 layer types, worst rel err {worst:.1e}, {:.1?}", start.elapsed()))
}

// ---------------------------------------------------------------- 3

fn mixed_out(store: &ParamStore<f64>, m: &MixedLayer, x: &Tensor<f64>, ctx: &RoutingContext) -> Vec<f64> {
    let mask = AttentionMask::padding(1, 4, 4, &[false; 4]).unwrap();
    let mut t = Tape::new(store);
    let xv = t.leaf(x, false).unwrap();
    let g = t.param(m.gate);
    let y = mixed_layer_forward(&mut t, xv, &mask, ctx, &m.shared, &m.bank, g, 2).unwrap();
    t.value(y).to_vec()
}

fn single_out(store: &ParamStore<f64>, p: &EncoderLayerParams, x: &Tensor<f64>) -> Vec<f64> {
    let mask = AttentionMask::padding(1, 4, 4, &[false; 4]).unwrap();
    let mut t = Tape::new(store);
    let xv = t.leaf(x, false).unwrap();
    let y = encoder_layer_forward(&mut t, p, xv, &mask, 2).unwrap();
    t.value(y).to_vec()
}

const CONVEX_TOL: f64 = 1e-12;

fn search_corpus(n_langs: usize) -> Corpus {
    let ls = langs(n_langs);
    let mut r = rng(9);
    let mut pairs = Vec::new();
    for s in &ls {
        for t in &ls {
            if s != t {
                for _ in 0..20 {
                    let len = r.gen_range(2..6);
                    let src: Vec<usize> = (0..len).map(|_| r.gen_range(0..8)).collect();
                    let tgt = src.iter().rev().copied().collect();
                    pairs.push(ExamplePair { src, tgt, ctx: RoutingContext::new(s.clone(), t.clone()) });
                }
            }
        }
    }
    Corpus { pairs }
}

fn criterion_3() -> Check {
    let dims = desk_dims(8, 10);
    let mut store = ParamStore::new();
    let m = MixedLayer::init(&mut store, "mix", &langs(3), &dims, &mut rng(70));
    perturb(&mut store, 71);
    let x = random_tensor(vec![4, 8], 72, 1.0);
    let ctx = RoutingContext::new(langs(3)[0].clone(), langs(3)[2].clone());
    let branches = [
        single_out(&store, &m.shared, &x),
        single_out(&store, m.bank.routed_by(&ctx, IndexMode::Src).map_err(err)?, &x),
        single_out(&store, m.bank.routed_by(&ctx, IndexMode::Tgt).map_err(err)?, &x),
    ];
    for (k, expected) in branches.iter().enumerate() {
        let mut logits = [-1e3; 3];
        logits[k] = 1e3;
        store.get_mut(m.gate).value = Tensor::vector(&logits);
        ensure(&mixed_out(&store, &m, &x, &ctx) == expected, || format!("vertex {k} differs from its branch"))?;
    }

    // copy the shared branch into every language sub-layer
    let shared_ids = m.shared.param_ids();
    for (_, sub) in m.bank.sub_layers() {
        for (&dst, &src) in sub.param_ids().iter().zip(&shared_ids) {
            let snapshot = store.clone();
            store.copy_value_from(dst, &snapshot, src).map_err(err)?;
        }
    }
    let reference = single_out(&store, &m.shared, &x);
    let mut worst: f64 = 0.0;
    let mut r = rng(73);
    for _ in 0..50 {
        let logits = [r.gen_range(-5.0..5.0), r.gen_range(-5.0..5.0), r.gen_range(-5.0..5.0)];
        store.get_mut(m.gate).value = Tensor::vector(&logits);
        let y = mixed_out(&store, &m, &x, &ctx);
        worst = y.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(worst, f64::max);
    }
    ensure(worst <= CONVEX_TOL, || format!("identical branches deviate by {worst:e}"))?;

    let ls = langs(3);
    let cfg = ModelConfig::new(
        ArchitectureSpec::search(2, DecoderMode::PerTarget),
        ModelDims { d_model: 8, d_ffn: 16, n_heads: 2, n_enc_layers: 2, n_dec_layers: 1, vocab_size: 5 + 3 + 8 },
        ls.clone(),
    )
    .map_err(err)?;
    let mut model = Model::<f64>::build(&cfg, 74).map_err(err)?;
    let vocab = lsl_core::data::Vocab::new(&ls, 8).map_err(err)?;
    let data = TrainData::new(&search_corpus(3), &vocab).map_err(err)?;
    let tcfg = TrainConfig { max_steps: 500, log_every: 1, batch_size: 8, base_lr: 3e-3, warmup_steps: 50, ..TrainConfig::default() };
    let mut steps = 0;
    let mut bad = None;
    train_loop(&mut model, &data, &tcfg, TrainMode::Search, |rec| {
        steps += 1;
        for w in &rec.weights {
            let sum: f64 = w.iter().sum();
            if w.iter().any(|v| !(0.0..=1.0).contains(v)) || (sum - 1.0).abs() > 1e-12 {
                bad = Some((rec.step, *w));
            }
        }
    })
    .map_err(err)?;
    ensure(bad.is_none(), || format!("off-simplex weights {bad:?}"))?;
    ensure(steps == 500, || format!("{steps} logged steps"))?;
    Ok(format!("3 vertices bit-identical, identical-branch deviation {worst:.1e}, simplex held for {steps} steps"))
}

// ---------------------------------------------------------------- 4

fn criterion_4() -> Check {
    let ls = langs(4);
    let dims = ModelDims { d_model: 32, d_ffn: 64, n_heads: 2, n_enc_layers: 4, n_dec_layers: 2, vocab_size: 73 };
    let cfg = ModelConfig::new(ArchitectureSpec::parse("enc=4 dec=separate src=[2] tgt=[3]").map_err(err)?, dims, ls)
        .map_err(err)?;
    let model = Model::<f64>::build(&cfg, 80).map_err(err)?;
    let mut counts = BTreeSet::new();
    let mut sizes = BTreeSet::new();
    let mut r = rng(81);
    let dirs = model.directions();
    for ctx in &dirs {
        let touched = model.touched_by_forward(ctx).map_err(err)?;
        ensure(touched == model.params_for_direction(ctx).map_err(err)?, || format!("{ctx:?}: traced set differs from routing"))?;
        counts.insert(touched.len());
        sizes.insert(model.numel(&touched));
        let src: Vec<Vec<usize>> = (0..3).map(|_| (0..4).map(|_| r.gen_range(3..73)).collect()).collect();
        let tgt: Vec<Vec<usize>> = (0..3).map(|_| (0..3).map(|_| r.gen_range(9..73)).collect()).collect();
        let mut acc = model.store().clone();
        acc.zero_grad();
        let mut tape = Tape::new(model.store());
        let loss = model.loss(&mut tape, ctx, &src, &tgt).map_err(err)?;
        tape.backward(loss).map_err(err)?.accumulate_into(&mut acc);
        for (id, p) in acc.iter() {
            if !touched.contains(&id) && p.grad.iter().any(|g| *g != 0.0) {
                return Err(format!("{} receives gradient for {} -> {}", p.name, ctx.src, ctx.tgt));
            }
        }
    }
    ensure(counts.len() == 1 && sizes.len() == 1, || format!("tensor counts {counts:?}, sizes {sizes:?}"))?;
    Ok(format!("{} directions, {} parameters each, zero gradient elsewhere", dirs.len(), sizes.first().unwrap()))
}

// ---------------------------------------------------------------- 5

fn criterion_5() -> Check {
    let ls = langs(4);
    let vocab = lsl_core::data::Vocab::new(&ls, 8).map_err(err)?;
    let dims = ModelDims { d_model: 16, d_ffn: 32, n_heads: 2, n_enc_layers: 4, n_dec_layers: 2, vocab_size: vocab.len() };
    let data = TrainData::new(&search_corpus(4), &vocab).map_err(err)?;
    let mut checked = 0;
    for (mode, arch) in [
        (DecoderMode::PerTarget, "enc=4 dec=separate src=[2] tgt=[3]"),
        (DecoderMode::PerTarget, "enc=4 dec=separate src=[1,2] tgt=[4]"),
        (DecoderMode::Shared, "enc=4 dec=shared src=[1] tgt=[3,4]"),
    ] {
        let base_cfg = ModelConfig::new(ArchitectureSpec::baseline(4, mode), dims, ls.clone()).map_err(err)?;
        let mut base = Model::<f64>::build(&base_cfg, 90).map_err(err)?;
        let warm = TrainConfig { max_steps: 20, batch_size: 4, base_lr: 1e-3, warmup_steps: 5, ..TrainConfig::default() };
        train_loop(&mut base, &data, &warm, TrainMode::Standard, |_| {}).map_err(err)?;
        let cfg = base_cfg.with_arch(ArchitectureSpec::parse(arch).map_err(err)?).map_err(err)?;
        let mut model = Model::<f64>::build(&cfg, 91).map_err(err)?;
        dense_pretrain_init(&mut model, &base).map_err(err)?;
        for batch in data.sequential_batches(7) {
            let eval = |m: &Model<f64>| -> lsl_core::Result<(Vec<f64>, f64)> {
                let mut t = Tape::new(m.store());
                let enc = m.encode(&mut t, &batch.ctx, &batch.src)?;
                let dec_in: Vec<Vec<usize>> = batch.tgt.iter().map(|y| [&[lsl_core::data::BOS][..], y].concat()).collect();
                let logits = m.decode_logits(&mut t, &batch.ctx, &enc, &dec_in)?;
                let out = t.value(logits).to_vec();
                let mut t2 = Tape::new(m.store());
                let loss = m.loss(&mut t2, &batch.ctx, &batch.src, &batch.tgt)?;
                Ok((out, t2.value(loss)[0]))
            };
            let (a, b) = (eval(&model).map_err(err)?, eval(&base).map_err(err)?);
            ensure(a == b, || format!("{arch}: {} -> {} differs from baseline", batch.ctx.src, batch.ctx.tgt))?;
            checked += 1;
        }
    }
    Ok(format!("{checked} direction batches over 3 layouts bit-identical to the baseline"))
}

// ---------------------------------------------------------------- 6

fn figure_runs() -> Vec<MixingRunResult> {
    let mut r = rng(60);
    (0..3)
        .map(|seed| {
            let weights = (1..=16)
                .map(|layer| {
                    let dominant = match layer {
                        3 | 4 => 1,
                        13..=15 => 2,
                        _ => 0,
                    };
                    let mut logits = [r.gen_range(-0.3..0.3), r.gen_range(-0.3..0.3), r.gen_range(-0.3..0.3)];
                    logits[dominant] += 1.0;
                    let z: f64 = logits.iter().map(|v: &f64| v.exp()).sum();
                    logits.map(|v| v.exp() / z)
                })
                .collect();
            MixingRunResult { seed, weights }
        })
        .collect()
}

fn criterion_6() -> Check {
    let runs = figure_runs();
    let spec = select_architecture(&runs, DecoderMode::PerTarget).map_err(err)?;
    ensure(spec.to_string() == "enc=16 dec=separate src=[3,4] tgt=[13,14,15]", || format!("selected {spec}"))?;
    for perm in [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
        let p: Vec<MixingRunResult> = perm.iter().map(|&i| runs[i].clone()).collect();
        ensure(select_architecture(&p, DecoderMode::PerTarget).map_err(err)? == spec, || format!("order {perm:?} changes the spec"))?;
    }
    for c in [1e-3, 0.5, 7.0, 1e4] {
        let scaled: Vec<MixingRunResult> = runs
            .iter()
            .map(|r| MixingRunResult { seed: r.seed, weights: r.weights.iter().map(|w| w.map(|v| v * c)).collect() })
            .collect();
        ensure(select_architecture(&scaled, DecoderMode::PerTarget).map_err(err)? == spec, || format!("scale {c} changes the spec"))?;
    }
    let avg = lsl_core::arch::average_weights(&runs).map_err(err)?;
    for c in [0.01, 3.0] {
        let kinds: Vec<LayerKind> = avg.iter().map(|w| lsl_core::arch::argmax_kind(&w.map(|v| v * c))).collect();
        ensure(kinds == spec.encoder_kinds, || format!("argmax changes under scale {c}"))?;
    }
    Ok(format!("selected `{spec}`, invariant to 6 run orders and 6 rescalings"))
}

// ---------------------------------------------------------------- 7

/// Reference chrF written from the metric's definition, independent of the
/// library code: character n-grams of the whitespace-stripped strings, n = 1..6,
/// corpus-level counts, precision and recall averaged over orders present on
/// both sides, F with beta = 2.
fn reference_chrf(hyps: &[&str], refs: &[&str]) -> f64 {
    let grams = |s: &str, n: usize| -> Vec<String> {
        let c: Vec<char> = s.chars().filter(|c| !c.is_whitespace()).collect();
        if c.len() < n {
            return Vec::new();
        }
        let mut v: Vec<String> = (0..=c.len() - n).map(|i| c[i..i + n].iter().collect()).collect();
        v.sort();
        v
    };
    let (mut ps, mut rs, mut any) = (Vec::new(), Vec::new(), false);
    for n in 1..=6 {
        let (mut h, mut r, mut m) = (0.0, 0.0, 0.0);
        for (hy, re) in hyps.iter().zip(refs) {
            let (a, b) = (grams(hy, n), grams(re, n));
            h += a.len() as f64;
            r += b.len() as f64;
            // sorted-list multiset intersection
            let (mut i, mut j) = (0, 0);
            while i < a.len() && j < b.len() {
                match a[i].cmp(&b[j]) {
                    std::cmp::Ordering::Less => i += 1,
                    std::cmp::Ordering::Greater => j += 1,
                    std::cmp::Ordering::Equal => {
                        m += 1.0;
                        i += 1;
                        j += 1;
                    }
                }
            }
        }
        any |= h > 0.0 || r > 0.0;
        if h > 0.0 && r > 0.0 {
            ps.push(m / h);
            rs.push(m / r);
        }
    }
    if !any {
        return 100.0;
    }
    if ps.is_empty() {
        return 0.0;
    }
    let p = ps.iter().sum::<f64>() / ps.len() as f64;
    let r = rs.iter().sum::<f64>() / rs.len() as f64;
    if p + r == 0.0 {
        0.0
    } else {
        100.0 * 5.0 * p * r / (4.0 * p + r)
    }
}

const CHRF_VECTORS: [(&str, &str); 20] = [
    ("the cat sat on the mat", "the cat sat on the mat"),
    ("the cat sat on the mat", "a cat sat on a mat"),
    ("kitten", "sitting"),
    ("a b c d", "abcd"),
    ("abc", "xyz"),
    ("", "nonempty"),
    ("nonempty", ""),
    ("ab", "abc"),
    ("abcabcabc", "abc"),
    ("aaaa", "aa"),
    ("hello world", "world hello"),
    ("0 1 2 3 4 5 6 7", "0 1 2 3 4 5 6 8"),
    ("Q r S t", "q R s T"),
    ("ünïcödé", "unicode"),
    ("x", "x"),
    ("abcdefghij", "abcdefghik"),
    ("abab abab", "baba baba"),
    ("m n o p q r s", "m n o p"),
    ("z y x w v u", "u v w x y z"),
    ("the quick brown fox", "the quick brown dog jumps"),
];

fn criterion_7() -> Check {
    let cfg = ChrfConfig::default();
    let mut worst: f64 = 0.0;
    for (h, r) in CHRF_VECTORS {
        worst = worst.max((chrf(h, r, &cfg) - reference_chrf(&[h], &[r])).abs());
    }
    let hyps: Vec<&str> = CHRF_VECTORS.iter().map(|v| v.0).collect();
    let refs: Vec<&str> = CHRF_VECTORS.iter().map(|v| v.1).collect();
    let corpus = corpus_chrf(&hyps, &refs, &cfg).map_err(err)?;
    worst = worst.max((corpus - reference_chrf(&hyps, &refs)).abs());
    ensure(worst < 1e-4, || format!("max disagreement {worst:e}"))?;
    for s in ["the cat", "ab", "z y x"] {
        ensure(chrf(s, s, &cfg) == 100.0, || format!("identity `{s}` != 100"))?;
    }
    for (a, b) in [("abc", "xyz"), ("aaa", "bbbb")] {
        ensure(chrf(a, b, &cfg) == 0.0, || format!("disjoint `{a}`/`{b}` != 0"))?;
    }
    Ok(format!("20 vectors plus corpus score, max disagreement {worst:.1e}"))
}

// ---------------------------------------------------------------- 8

const E2E_SEEDS: [u64; 3] = [1, 2, 3];
const E2E_MARGIN: f64 = 0.02;

fn e2e_config() -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.corpus = CorpusSpec {
        seed: 11,
        n_languages: 4,
        n_families: 2,
        alphabet_size: 16,
        hq_pairs: 1000,
        lq_pairs: 40_000,
        valid_pairs: 100,
        test_pairs: 100,
        ..CorpusSpec::default()
    };
    c.model.d_model = 32;
    c.model.d_ffn = 64;
    c.train.batch_size = 16;
    c.train.base_lr = 1e-3;
    c.train.max_steps = 3000;
    c.train.log_every = 500;
    c.search.n_runs = 3;
    c.search.max_steps = 1500;
    c
}

fn criterion_8() -> Check {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(err)?;
    let mut s = Session { run: RunDir::new(dir.path().join("e2e")), config: e2e_config(), config_path: None };
    let corpus = cmd_gen(&s).map_err(err)?;
    let per_dir = corpus.train.len() / 12;
    ensure((4000..=6000).contains(&per_dir), || format!("{per_dir} training pairs per direction"))?;

    let search = cmd_search(&s).map_err(err)?;
    let selected = parse_arch_file(&std::fs::read_to_string(s.run.reports().join("selected.arch")).map_err(err)?)
        .map_err(err)?;
    ensure(selected == search.spec && search.runs.len() == 3, || "search artifacts disagree".into())?;
    selected.validate().map_err(err)?;
    ensure(selected.mixed_layers().is_empty(), || format!("selected spec {selected} still has search layers"))?;
    let search_time = start.elapsed();

    let baseline = s.config.model.baseline();
    let (mut lsl, mut base) = (Vec::new(), Vec::new());
    for seed in E2E_SEEDS {
        s.config.train.seed = seed;
        lsl.push(cmd_train(&s, &format!("lsl_s{seed}"), selected.clone(), None).map_err(err)?.valid_loss);
        base.push(cmd_train(&s, &format!("base_s{seed}"), baseline.clone(), None).map_err(err)?.valid_loss);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (ml, mb) = (mean(&lsl), mean(&base));
    let detail = format!(
        "selected `{selected}`, valid loss lsl {ml:.4} {lsl:.3?} vs baseline {mb:.4} {base:.3?}, search {search_time:.0?}, total {:.0?}",
        start.elapsed()
    );
    ensure(ml <= mb + E2E_MARGIN, || format!("LSL worse than baseline + {E2E_MARGIN}: {detail}"))?;
    within_budget(start, Duration::from_secs(15 * 60)).map_err(|e| format!("{e}; {detail}"))?;
    Ok(detail)
}

// ---------------------------------------------------------------- 9

/// Returns the reference with a direction-dependent share of symbols shifted.
struct NoisyOracle {
    refs: std::collections::BTreeMap<(LanguageId, LanguageId), Vec<(Vec<usize>, Vec<usize>)>>,
    alphabet: usize,
}

impl Translator for NoisyOracle {
    fn translate(&mut self, src: &[usize], ctx: &RoutingContext) -> lsl_core::Result<String> {
        let key = (ctx.src.clone(), ctx.tgt.clone());
        let tgt = self.refs[&key].iter().find(|(s, _)| s == src).map(|(_, t)| t.clone()).unwrap_or_default();
        let shift = (ctx.src.as_str().len() + 3 * ctx.tgt.as_str().bytes().last().unwrap_or(0) as usize) % 4;
        let out: Vec<usize> = tgt.iter().enumerate().map(|(i, &t)| if i % 4 < shift { (t + 1) % self.alphabet } else { t }).collect();
        Ok(render_symbols(&out, self.alphabet))
    }
}

fn criterion_9() -> Check {
    let spec = CorpusSpec {
        seed: 5,
        n_languages: 6,
        n_families: 2,
        hq_pairs: 10,
        lq_pairs: 10,
        valid_pairs: 5,
        test_pairs: 8,
        direction_mode: DirectionMode::EnglishCentricPlusGroups,
        ..CorpusSpec::default()
    };
    let ids = spec.language_ids();
    let split = direction_filter(&spec.families(), DirectionMode::EnglishCentricPlusGroups, &ids[spec.center]).map_err(err)?;
    let all: BTreeSet<_> = all_directions(&ids).into_iter().collect();
    let train: BTreeSet<_> = split.train.iter().cloned().collect();
    let zs: BTreeSet<_> = split.zero_shot.iter().cloned().collect();
    ensure(train.is_disjoint(&zs), || "train and zero-shot overlap".into())?;
    ensure(&train | &zs == all, || "partition is not exhaustive".into())?;
    ensure(!zs.is_empty(), || "no zero-shot directions".into())?;

    let corpus = lsl_core::data::generate_corpus(&spec).map_err(err)?;
    let train_dirs: BTreeSet<_> = corpus.train.by_direction().keys().cloned().collect();
    ensure(train_dirs == train, || "training data covers the wrong directions".into())?;

    let mut refs = std::collections::BTreeMap::new();
    for p in &corpus.test.pairs {
        refs.entry((p.ctx.src.clone(), p.ctx.tgt.clone())).or_insert_with(Vec::new).push((p.src.clone(), p.tgt.clone()));
    }
    let mut tr = NoisyOracle { refs, alphabet: spec.alphabet_size };
    let dirs: Vec<_> = all.iter().cloned().collect();
    let report = evaluate_matrix(&mut tr, &corpus.test, spec.alphabet_size, &dirs, &spec.families(), Some(&split), &ChrfConfig::default())
        .map_err(err)?;
    let zero: Vec<f64> = report.scores.iter().filter(|s| zs.contains(&(s.src.clone(), s.tgt.clone()))).map(|s| s.chrf).collect();
    ensure(zero.len() == zs.len(), || format!("{} zero-shot scores for {} directions", zero.len(), zs.len()))?;
    let expected = zero.iter().sum::<f64>() / zero.len() as f64;
    let got = report.summary.zero_shot.ok_or("no zero-shot average")?;
    ensure((got - expected).abs() < 1e-12, || format!("zero-shot average {got} vs {expected}"))?;
    let sup: Vec<f64> = report.scores.iter().filter(|s| train.contains(&(s.src.clone(), s.tgt.clone()))).map(|s| s.chrf).collect();
    let sup_avg = sup.iter().sum::<f64>() / sup.len() as f64;
    ensure((report.summary.supervised.unwrap_or(f64::NAN) - sup_avg).abs() < 1e-12, || "supervised average mismatch".into())?;
    ensure((expected - sup_avg).abs() > 1e-6, || "test scores do not separate the two sets".into())?;
    Ok(format!("{} train / {} zero-shot directions, zero-shot avg {got:.3} over exactly the complement", train.len(), zs.len()))
}

// ---------------------------------------------------------------- 10

fn criterion_10() -> Check {
    let mut r = rng(100);
    let text = |r: &mut ChaCha8Rng| -> String { (0..r.gen_range(5..25)).map(|_| ['a', 'b', 'c', 'd', 'e', ' '][r.gen_range(0..6)]).collect() };
    let refs: Vec<String> = (0..40).map(|_| text(&mut r)).collect();
    let noisy: Vec<String> = (0..40).map(|_| text(&mut r)).collect();
    let cfg = ChrfConfig::default();
    let mut ps = Vec::new();
    for seed in 0..10 {
        let p = paired_bootstrap(&noisy, &noisy, &refs, 1000, seed, &cfg).map_err(err)?;
        ensure((0.3..=0.7).contains(&p), || format!("self-comparison p = {p} for seed {seed}"))?;
        ps.push(p);
    }
    let p = paired_bootstrap(&refs, &noisy, &refs, 1000, 0, &cfg).map_err(err)?;
    ensure(p == 0.0, || format!("dominance p = {p}"))?;
    Ok(format!("self p in {:?}, dominance p = 0", (ps.iter().cloned().fold(1.0, f64::min), ps.iter().cloned().fold(0.0, f64::max))))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("parameter accounting", criterion_1),
        ("gradient suite", criterion_2),
        ("mixing vertices and convexity", criterion_3),
        ("routing and effective parameters", criterion_4),
        ("dense pre-training identity", criterion_5),
        ("selection pipeline", criterion_6),
        ("chrF oracle agreement", criterion_7),
        ("desk end-to-end experiment", criterion_8),
        ("zero-shot harness", criterion_9),
        ("bootstrap null behaviour", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match outcome {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {name}: {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
    println!("all {} criteria passed", criteria.len());
}
