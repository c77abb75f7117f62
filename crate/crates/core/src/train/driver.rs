use std::fmt;

use crate::arch::{MixingRunResult, Model};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensors::Tape;
use crate::train::batch::{Batch, TrainData};
use crate::train::config::{lr_at, TrainConfig};
use crate::train::optim::{adam_step, OptimizerState};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrainMode {
    Standard,
    /// Gate logits train jointly with every branch; needs an all-mixed encoder.
    Search,
}

/// One line of the training log: `step loss lr [w_shared w_src w_tgt]...`.
#[derive(Clone, Debug, PartialEq)]
pub struct LogRecord {
    pub step: u64,
    pub loss: f64,
    pub lr: f64,
    pub weights: Vec<[f64; 3]>,
}

impl fmt::Display for LogRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\t{:.6}\t{:.6e}", self.step, self.loss, self.lr)?;
        for w in &self.weights {
            write!(f, "\t{:.6}\t{:.6}\t{:.6}", w[0], w[1], w[2])?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub log: Vec<LogRecord>,
    pub final_loss: f64,
    /// Converged weights, present in search mode.
    pub mixing: Option<MixingRunResult>,
}

/// Mean target-token cross-entropy of one batch; no gradients.
pub fn batch_loss<S: Scalar>(model: &Model<S>, batch: &Batch) -> Result<f64> {
    let mut tape = Tape::new(model.store());
    let loss = model.loss(&mut tape, &batch.ctx, &batch.src, &batch.tgt)?;
    Ok(tape.value(loss)[0].to_f64_lossy())
}

/// Token-weighted mean cross-entropy over every example of `data`.
pub fn corpus_loss<S: Scalar>(model: &Model<S>, data: &TrainData, batch_size: usize) -> Result<f64> {
    let (mut sum, mut tokens) = (0.0, 0usize);
    for batch in data.sequential_batches(batch_size) {
        let n = batch.n_target_tokens();
        sum += batch_loss(model, &batch)? * n as f64;
        tokens += n;
    }
    Ok(sum / tokens as f64)
}

fn diverged(step: u64, e: Error) -> Error {
    match e {
        Error::NonFinite { op } => Error::Diverged { step, detail: format!("non-finite value in {op}") },
        Error::Diverged { detail, .. } => Error::Diverged { step, detail },
        other => other,
    }
}

/// Runs `cfg.max_steps` Adam steps. `on_log` sees every logged record as it
/// is produced. Deterministic given the model, data and config.
pub fn train_loop<S: Scalar>(
    model: &mut Model<S>,
    data: &TrainData,
    cfg: &TrainConfig,
    mode: TrainMode,
    mut on_log: impl FnMut(&LogRecord),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Data("training corpus is empty".into()));
    }
    if mode == TrainMode::Search && !model.config().arch.is_search() {
        return Err(Error::Config("search training needs every encoder layer mixed".into()));
    }
    let mut opt = OptimizerState::new(model.store());
    let mut log = Vec::new();
    let mut final_loss = f64::NAN;
    for step in 1..=cfg.max_steps {
        let batch = data.batch_at(cfg.seed, step, cfg.batch_size);
        let (loss, grads) = {
            let mut tape = Tape::new(model.store());
            let loss = model.loss(&mut tape, &batch.ctx, &batch.src, &batch.tgt).map_err(|e| diverged(step, e))?;
            let value = tape.value(loss)[0].to_f64_lossy();
            (value, tape.backward(loss).map_err(|e| diverged(step, e))?)
        };
        if !loss.is_finite() {
            return Err(Error::Diverged { step, detail: format!("loss {loss}") });
        }
        let store = model.store_mut();
        store.zero_grad();
        grads.accumulate_into(store);
        let lr = lr_at(step, cfg)?;
        adam_step(store, &mut opt, lr, cfg).map_err(|e| diverged(step, e))?;
        final_loss = loss;
        if step % cfg.log_every == 0 || step == cfg.max_steps {
            let rec = LogRecord { step, loss, lr, weights: model.mixing_weights() };
            on_log(&rec);
            log.push(rec);
        }
    }
    let mixing = (mode == TrainMode::Search).then(|| MixingRunResult { seed: cfg.seed, weights: model.mixing_weights() });
    Ok(TrainOutcome { log, final_loss, mixing })
}
