use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensors::ParamStore;
use crate::train::config::TrainConfig;

/// Adam moments for every parameter of one store.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState<S> {
    pub m: Vec<Vec<S>>,
    pub v: Vec<Vec<S>>,
    pub step: u64,
}

impl<S: Scalar> OptimizerState<S> {
    pub fn new(store: &ParamStore<S>) -> Self {
        let zeros: Vec<Vec<S>> = store.iter().map(|(_, p)| vec![S::zero(); p.value.numel()]).collect();
        Self { m: zeros.clone(), v: zeros, step: 0 }
    }
}

/// One bias-corrected Adam update from the gradients held in `store`.
/// Non-finite gradients abort before anything is modified.
pub fn adam_step<S: Scalar>(store: &mut ParamStore<S>, state: &mut OptimizerState<S>, lr: f64, cfg: &TrainConfig) -> Result<()> {
    if state.m.len() != store.len() {
        return Err(Error::Contract("optimizer state belongs to a different store".into()));
    }
    if let Some((_, p)) = store.iter().find(|(_, p)| p.grad.iter().any(|g| !g.is_finite())) {
        return Err(Error::Diverged { step: state.step + 1, detail: format!("non-finite gradient in `{}`", p.name) });
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (S::of(cfg.beta1), S::of(cfg.beta2));
    let c1 = S::one() - b1.powi(t);
    let c2 = S::one() - b2.powi(t);
    let (lr, eps) = (S::of(lr), S::of(cfg.eps));
    for (i, p) in store.params_mut().iter_mut().enumerate() {
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        for (((w, &g), mi), vi) in p.value.data_mut().iter_mut().zip(&p.grad).zip(m.iter_mut()).zip(v.iter_mut()) {
            *mi = b1 * *mi + (S::one() - b1) * g;
            *vi = b2 * *vi + (S::one() - b2) * g * g;
            *w -= lr * (*mi / c1) / ((*vi / c2).sqrt() + eps);
        }
    }
    Ok(())
}
