#![allow(dead_code)]

use lsl_core::arch::{ArchitectureSpec, DecoderMode, ModelConfig};
use lsl_core::layers::ModelDims;
use lsl_core::lsl::LanguageId;
use lsl_core::tensors::{ParamId, ParamStore, Tape, Tensor, Var};
use lsl_core::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(shape: Vec<usize>, seed: u64) -> Tensor<f64> {
    let n = shape.iter().product();
    let mut r = rng(seed);
    Tensor::new(shape, (0..n).map(|_| r.gen_range(-1.0..1.0)).collect()).unwrap()
}

pub fn langs(n: usize) -> Vec<LanguageId> {
    (0..n).map(|i| LanguageId::new(format!("syn{i}")).unwrap()).collect()
}

pub fn desk_dims(d: usize, vocab: usize) -> ModelDims {
    ModelDims { d_model: d, d_ffn: 2 * d, n_heads: 2, n_enc_layers: 4, n_dec_layers: 2, vocab_size: vocab }
}

pub fn desk_config(arch: &str, d: usize, n_langs: usize) -> ModelConfig {
    let arch = ArchitectureSpec::parse(arch).unwrap();
    let vocab = 5 + n_langs + 16;
    ModelConfig::new(arch, desk_dims(d, vocab), langs(n_langs)).unwrap()
}

pub fn baseline_config(n_enc: usize, mode: DecoderMode, d: usize, n_langs: usize) -> ModelConfig {
    let vocab = 5 + n_langs + 16;
    ModelConfig::new(ArchitectureSpec::baseline(n_enc, mode), desk_dims(d, vocab), langs(n_langs)).unwrap()
}

/// Symmetric relative error used by every gradient check.
pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / (a.abs() + n.abs() + 1e-8)
}

const EPS: f64 = 1e-5;

/// Compares analytic input gradients of `build` against central differences.
/// Returns the worst relative error.
pub fn check_inputs<F>(inputs: &[Tensor<f64>], build: F) -> f64
where
    F: Fn(&mut Tape<'_, f64>, &[Var]) -> Result<Var>,
{
    let eval = |xs: &[Tensor<f64>]| -> f64 {
        let mut tape = Tape::detached();
        let vars: Vec<Var> = xs.iter().map(|x| tape.leaf(x, true).unwrap()).collect();
        let out = build(&mut tape, &vars).unwrap();
        tape.value(out)[0]
    };
    let mut tape = Tape::detached();
    let vars: Vec<Var> = inputs.iter().map(|x| tape.leaf(x, true).unwrap()).collect();
    let out = build(&mut tape, &vars).unwrap();
    let grads = tape.backward(out).unwrap();
    let mut worst: f64 = 0.0;
    for (k, x) in inputs.iter().enumerate() {
        let zeros = vec![0.0; x.numel()];
        let analytic = grads.wrt(vars[k]).unwrap_or(&zeros).to_vec();
        for i in 0..x.numel() {
            let mut xs = inputs.to_vec();
            xs[k].data_mut()[i] += EPS;
            let up = eval(&xs);
            xs[k].data_mut()[i] -= 2.0 * EPS;
            let down = eval(&xs);
            worst = worst.max(rel_err(analytic[i], (up - down) / (2.0 * EPS)));
        }
    }
    worst
}

/// Same check for parameters held in `store`.
pub fn check_params<F>(store: &ParamStore<f64>, ids: &[ParamId], build: F) -> f64
where
    F: Fn(&mut Tape<'_, f64>) -> Result<Var>,
{
    let eval = |s: &ParamStore<f64>| -> f64 {
        let mut tape = Tape::new(s);
        let out = build(&mut tape).unwrap();
        tape.value(out)[0]
    };
    let mut acc = store.clone();
    acc.zero_grad();
    {
        let mut tape = Tape::new(store);
        let out = build(&mut tape).unwrap();
        tape.backward(out).unwrap().accumulate_into(&mut acc);
    }
    let mut worst: f64 = 0.0;
    for &id in ids {
        for i in 0..store.value(id).numel() {
            let mut s = store.clone();
            s.get_mut(id).value.data_mut()[i] += EPS;
            let up = eval(&s);
            s.get_mut(id).value.data_mut()[i] -= 2.0 * EPS;
            let down = eval(&s);
            let (a, n) = (acc.grad(id)[i], (up - down) / (2.0 * EPS));
            worst = worst.max(rel_err(a, n));
        }
    }
    worst
}

/// `sum(x ⊙ w)` for a fixed random `w` with entries in `[-0.01, 0.01]`, so
/// every output coordinate matters. The small scale keeps the loss value, and
/// with it the rounding noise of the difference quotient, well below the
/// `1e-8` floor of [`rel_err`].
pub fn weighted_sum(tape: &mut Tape<'_, f64>, x: Var, seed: u64) -> Result<Var> {
    let mut w = random_tensor(tape.shape(x).to_vec(), seed);
    w.data_mut().iter_mut().for_each(|v| *v *= 0.01);
    let w = tape.leaf(&w, false)?;
    let p = tape.mul(x, w)?;
    tape.sum(p)
}
