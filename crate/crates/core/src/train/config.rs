use crate::error::{Error, Result};
use crate::kv::KvMap;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub base_lr: f64,
    pub warmup_steps: u64,
    pub max_steps: u64,
    /// Sentences per batch; every batch holds a single direction.
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
    pub log_every: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            base_lr: 4e-4,
            warmup_steps: 200,
            max_steps: 2000,
            batch_size: 32,
            beta1: 0.9,
            beta2: 0.98,
            eps: 1e-9,
            seed: 1,
            log_every: 50,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.base_lr > 0.0) || !self.base_lr.is_finite() {
            return Err(Error::Config(format!("base_lr must be positive, got {}", self.base_lr)));
        }
        if self.warmup_steps == 0 || self.batch_size == 0 || self.log_every == 0 {
            return Err(Error::Config("warmup_steps, batch_size and log_every must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.eps > 0.0) {
            return Err(Error::Config("adam needs betas in [0, 1) and eps > 0".into()));
        }
        Ok(())
    }

    pub fn to_kv(&self) -> KvMap {
        let mut kv = KvMap::new();
        kv.set("base_lr", self.base_lr);
        kv.set("warmup_steps", self.warmup_steps);
        kv.set("max_steps", self.max_steps);
        kv.set("batch_size", self.batch_size);
        kv.set("beta1", self.beta1);
        kv.set("beta2", self.beta2);
        kv.set("eps", self.eps);
        kv.set("seed", self.seed);
        kv.set("log_every", self.log_every);
        kv.set("schedule", "inverse_sqrt");
        kv
    }

    pub fn from_kv(kv: &KvMap) -> Result<Self> {
        let d = Self::default();
        if let Some(s) = kv.get_str("schedule") {
            if s != "inverse_sqrt" {
                return Err(Error::Config(format!("unsupported schedule `{s}`")));
            }
        }
        let cfg = Self {
            base_lr: kv.get_or("base_lr", d.base_lr)?,
            warmup_steps: kv.get_or("warmup_steps", d.warmup_steps)?,
            max_steps: kv.get_or("max_steps", d.max_steps)?,
            batch_size: kv.get_or("batch_size", d.batch_size)?,
            beta1: kv.get_or("beta1", d.beta1)?,
            beta2: kv.get_or("beta2", d.beta2)?,
            eps: kv.get_or("eps", d.eps)?,
            seed: kv.get_or("seed", d.seed)?,
            log_every: kv.get_or("log_every", d.log_every)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Linear warmup to `base_lr`, then inverse square-root decay.
pub fn lr_at(step: u64, cfg: &TrainConfig) -> Result<f64> {
    if step == 0 {
        return Err(Error::Contract("learning-rate steps start at 1".into()));
    }
    let (s, w) = (step as f64, cfg.warmup_steps as f64);
    Ok(if step <= cfg.warmup_steps { cfg.base_lr * s / w } else { cfg.base_lr * (w / s).sqrt() })
}
