mod common;

use common::*;
use lsl_core::arch::{ArchitectureSpec, Model, ModelConfig};
use lsl_core::data::{all_directions, symbol_ids, Corpus, ExamplePair, Vocab};
use lsl_core::eval::{evaluate_matrix, greedy_decode, ChrfConfig, ModelTranslator};
use lsl_core::layers::ModelDims;
use lsl_core::lsl::RoutingContext;
use lsl_core::tensors::{ParamStore, Tape, Tensor};
use lsl_core::train::{
    adam_step, corpus_loss, decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, train_loop,
    OptimizerState, TrainConfig, TrainData, TrainMode,
};
use lsl_core::{Error, Model32};

const ALPHABET: usize = 8;

fn vocab() -> Vocab {
    Vocab::new(&langs(2), ALPHABET).unwrap()
}

fn config(arch: &str) -> ModelConfig {
    let dims = ModelDims { d_model: 16, d_ffn: 32, n_heads: 2, n_enc_layers: 2, n_dec_layers: 1, vocab_size: vocab().len() };
    ModelConfig::new(ArchitectureSpec::parse(arch).unwrap(), dims, langs(2)).unwrap()
}

fn one_pair() -> Corpus {
    let l = langs(2);
    Corpus { pairs: vec![ExamplePair { src: vec![1, 5, 2, 7], tgt: vec![3, 3, 6], ctx: RoutingContext::new(l[0].clone(), l[1].clone()) }] }
}

fn two_directions() -> Corpus {
    let l = langs(2);
    let mut c = one_pair();
    c.pairs.push(ExamplePair { src: vec![4, 4, 0], tgt: vec![2, 6, 1, 1], ctx: RoutingContext::new(l[1].clone(), l[0].clone()) });
    c
}

fn train_cfg(steps: u64) -> TrainConfig {
    TrainConfig { base_lr: 3e-3, warmup_steps: 20, max_steps: steps, batch_size: 4, log_every: 1, ..TrainConfig::default() }
}

#[test]
fn memorizes_a_single_pair_and_decodes_it() {
    let data = TrainData::new(&one_pair(), &vocab()).unwrap();
    let mut model = Model::<f64>::build(&config("enc=2 dec=separate src=[1] tgt=[2]"), 1).unwrap();
    let out = train_loop(&mut model, &data, &train_cfg(300), TrainMode::Standard, |_| {}).unwrap();
    assert!(out.final_loss < 0.01, "final loss {}", out.final_loss);
    assert!(corpus_loss(&model, &data, 8).unwrap() < 0.01);
    let pair = &one_pair().pairs[0];
    let v = vocab();
    assert_eq!(greedy_decode(&model, &v, &pair.src, &pair.ctx, 20).unwrap(), symbol_ids(&v, &pair.tgt));
    let one = greedy_decode(&model, &v, &pair.src, &pair.ctx, 1).unwrap();
    assert_eq!(one, symbol_ids(&v, &pair.tgt[..1]));
    assert!(matches!(greedy_decode(&model, &v, &pair.src, &pair.ctx, 0), Err(Error::Contract(_))));

    let mut tr = ModelTranslator { model: &model, vocab: &v, max_len: 20 };
    let dirs = all_directions(&langs(2));
    let fams: Vec<_> = langs(2).into_iter().map(|l| (l, 0)).collect();
    let report = evaluate_matrix(&mut tr, &one_pair(), ALPHABET, &dirs, &fams, None, &ChrfConfig::default()).unwrap();
    assert_eq!(report.scores.len(), 1);
    assert_eq!(report.scores[0].chrf, 100.0);
    assert_eq!(report.absent, vec![dirs[1].clone()]);
}

#[test]
fn early_losses_do_not_increase() {
    let data = TrainData::new(&one_pair(), &vocab()).unwrap();
    let mut model = Model::<f64>::build(&config("enc=2 dec=shared src=[] tgt=[]"), 2).unwrap();
    let cfg = TrainConfig { base_lr: 1e-3, warmup_steps: 50, ..train_cfg(50) };
    let out = train_loop(&mut model, &data, &cfg, TrainMode::Standard, |_| {}).unwrap();
    for w in out.log.windows(2) {
        assert!(w[1].loss <= w[0].loss, "step {}: {} > {}", w[1].step, w[1].loss, w[0].loss);
    }
}

#[test]
fn training_is_deterministic() {
    let data = TrainData::new(&two_directions(), &vocab()).unwrap();
    let run = || {
        let mut model = Model::<f64>::build(&config("enc=2 dec=separate src=[2] tgt=[]"), 3).unwrap();
        let mut seen = Vec::new();
        let out = train_loop(&mut model, &data, &train_cfg(15), TrainMode::Standard, |r| seen.push(r.to_string())).unwrap();
        (out, seen, encode_checkpoint(&model))
    };
    let (a, b) = (run(), run());
    assert_eq!(a, b);
    assert_eq!(a.1.len(), 15);
    assert!(a.0.mixing.is_none());
}

#[test]
fn search_weights_stay_on_the_simplex_and_gates_learn() {
    let data = TrainData::new(&two_directions(), &vocab()).unwrap();
    let mut model = Model::<f64>::build(&config("enc=2 dec=separate src=[] tgt=[] mixed=[1,2]"), 4).unwrap();
    let before = model.mixing_weights();
    let mut records = 0;
    let out = train_loop(&mut model, &data, &train_cfg(20), TrainMode::Search, |r| {
        records += 1;
        assert_eq!(r.weights.len(), 2);
        for w in &r.weights {
            assert!(w.iter().all(|&v| (0.0..=1.0).contains(&v)));
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    })
    .unwrap();
    assert_eq!(records, 20);
    let mixing = out.mixing.unwrap();
    mixing.validate().unwrap();
    assert_ne!(mixing.weights, before);

    let mut store = model.store().clone();
    store.zero_grad();
    let batch = data.batch_at(1, 1, 2);
    let mut tape = Tape::new(model.store());
    let loss = model.loss(&mut tape, &batch.ctx, &batch.src, &batch.tgt).unwrap();
    tape.backward(loss).unwrap().accumulate_into(&mut store);
    for g in model.gates() {
        assert!(store.grad_norm_sq(g) > 0.0);
    }
}

#[test]
fn search_mode_needs_a_search_encoder() {
    let data = TrainData::new(&one_pair(), &vocab()).unwrap();
    let mut model = Model::<f64>::build(&config("enc=2 dec=separate src=[] tgt=[]"), 0).unwrap();
    assert!(matches!(train_loop(&mut model, &data, &train_cfg(2), TrainMode::Search, |_| {}), Err(Error::Config(_))));
}

#[test]
fn non_finite_parameters_report_divergence() {
    let data = TrainData::new(&one_pair(), &vocab()).unwrap();
    let mut model = Model::<f64>::build(&config("enc=2 dec=separate src=[] tgt=[]"), 0).unwrap();
    let emb = model.embedding();
    model.store_mut().get_mut(emb).value.data_mut()[0] = f64::NAN;
    match train_loop(&mut model, &data, &train_cfg(5), TrainMode::Standard, |_| {}) {
        Err(Error::Diverged { step, .. }) => assert_eq!(step, 1),
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn checkpoints_round_trip() {
    let cfg = config("enc=2 dec=separate src=[1] tgt=[2]");
    let model = Model::<f64>::build(&cfg, 8).unwrap();
    let bytes = encode_checkpoint(&model);
    let back: Model<f64> = decode_checkpoint(&bytes).unwrap();
    assert_eq!(back.config(), model.config());
    for ((_, p), (_, q)) in model.store().iter().zip(back.store().iter()) {
        assert_eq!((&p.name, p.value.data()), (&q.name, q.value.data()));
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    save_checkpoint(&model, &path).unwrap();
    assert_eq!(encode_checkpoint(&load_checkpoint::<f64>(&path).unwrap()), bytes);

    assert!(decode_checkpoint::<f64>(&bytes[..bytes.len() - 3]).is_err());
    assert!(decode_checkpoint::<f64>(b"not a checkpoint").is_err());
    let mut bad = bytes.clone();
    let n = bad.len();
    bad[n - 8..].copy_from_slice(&f64::INFINITY.to_le_bytes());
    assert!(decode_checkpoint::<f64>(&bad).is_err());
}

#[test]
fn single_precision_models_train_and_round_trip() {
    let data = TrainData::new(&one_pair(), &vocab()).unwrap();
    let mut model = Model32::build(&config("enc=2 dec=separate src=[1] tgt=[]"), 5).unwrap();
    let out = train_loop(&mut model, &data, &train_cfg(10), TrainMode::Standard, |_| {}).unwrap();
    assert!(out.final_loss.is_finite());
    let back: Model32 = decode_checkpoint(&encode_checkpoint(&model)).unwrap();
    assert_eq!(back.store().value(back.embedding()).data(), model.store().value(model.embedding()).data());
}

#[test]
fn adam_moves_by_lr_under_a_constant_gradient() {
    let cfg = TrainConfig::default();
    let mut store = ParamStore::<f64>::new();
    let id = store.add("w", Tensor::vector(&[0.5, -1.0, 2.0]));
    let grad = [0.3, -4.0, 0.0];
    let mut state = OptimizerState::new(&store);
    let lr = 0.01;
    for _ in 0..7 {
        store.get_mut(id).grad.copy_from_slice(&grad);
        adam_step(&mut store, &mut state, lr, &cfg).unwrap();
    }
    // with a constant gradient the bias-corrected moments are g and g^2 exactly
    let expected: Vec<f64> = [0.5, -1.0, 2.0]
        .iter()
        .zip(grad)
        .map(|(w, g): (&f64, f64)| w - 7.0 * lr * g / (g.abs() + cfg.eps))
        .collect();
    for (a, e) in store.value(id).data().iter().zip(&expected) {
        assert!((a - e).abs() < 1e-12, "{a} vs {e}");
    }
}

#[test]
fn batches_are_single_direction_and_reproducible() {
    let v = vocab();
    let data = TrainData::new(&two_directions(), &v).unwrap();
    let mut seen = std::collections::BTreeSet::new();
    for step in 1..40 {
        let b = data.batch_at(7, step, 5);
        assert_eq!(b, data.batch_at(7, step, 5));
        assert_eq!(b.src.len(), 5);
        let tag = v.lang_tag(&b.ctx.tgt).unwrap();
        assert!(b.src.iter().all(|s| *s.last().unwrap() == tag));
        seen.insert(b.ctx.src.clone());
    }
    assert_eq!(seen.len(), 2);
}
