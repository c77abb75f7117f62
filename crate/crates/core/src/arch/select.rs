//! Discretising converged mixing weights into a fixed architecture.

use std::fmt::Write as _;

use crate::arch::spec::{ArchitectureSpec, DecoderMode, LayerKind};
use crate::error::{Error, Result};

/// Converged per-layer weights (shared, src, tgt) of one search run.
#[derive(Clone, Debug, PartialEq)]
pub struct MixingRunResult {
    pub seed: u64,
    pub weights: Vec<[f64; 3]>,
}

impl MixingRunResult {
    pub fn validate(&self) -> Result<()> {
        for (i, w) in self.weights.iter().enumerate() {
            let sum: f64 = w.iter().sum();
            if w.iter().any(|&v| !(0.0..=1.0).contains(&v)) || (sum - 1.0).abs() > 1e-9 {
                return Err(Error::Data(format!("layer {} weights {w:?} are not a simplex", i + 1)));
            }
        }
        Ok(())
    }

    /// `seed=<n>` followed by one `layer w_shared w_src w_tgt` line per layer.
    pub fn render(&self) -> String {
        let mut out = format!("seed={}\n", self.seed);
        for (i, w) in self.weights.iter().enumerate() {
            let _ = writeln!(out, "{}\t{:e}\t{:e}\t{:e}", i + 1, w[0], w[1], w[2]);
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let seed = lines
            .next()
            .and_then(|l| l.strip_prefix("seed="))
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::Parse("mixing file must start with seed=<n>".into()))?;
        let mut weights = Vec::new();
        for (i, line) in lines.enumerate() {
            let cols: Vec<&str> = line.split_whitespace().collect();
            let bad = || Error::Parse(format!("bad mixing line `{line}`"));
            if cols.len() != 4 || cols[0].parse::<usize>().map_err(|_| bad())? != i + 1 {
                return Err(bad());
            }
            let mut w = [0.0; 3];
            for (slot, c) in w.iter_mut().zip(&cols[1..]) {
                *slot = c.parse().map_err(|_| bad())?;
            }
            weights.push(w);
        }
        let run = Self { seed, weights };
        run.validate()?;
        Ok(run)
    }
}

/// Arithmetic mean of post-softmax weights across runs, renormalised per
/// layer. Each component is summed in sorted order so the result does not
/// depend on run order.
pub fn average_weights(runs: &[MixingRunResult]) -> Result<Vec<[f64; 3]>> {
    let first = runs.first().ok_or_else(|| Error::Config("no search runs to select from".into()))?;
    let n_layers = first.weights.len();
    if runs.iter().any(|r| r.weights.len() != n_layers) {
        return Err(Error::Config("search runs disagree on layer count".into()));
    }
    let mut out = Vec::with_capacity(n_layers);
    for layer in 0..n_layers {
        let mut mean = [0.0; 3];
        for (c, m) in mean.iter_mut().enumerate() {
            let mut vals: Vec<f64> = runs.iter().map(|r| r.weights[layer][c]).collect();
            vals.sort_by(f64::total_cmp);
            *m = vals.iter().sum::<f64>() / runs.len() as f64;
        }
        let z: f64 = mean.iter().sum();
        out.push(mean.map(|v| v / z));
    }
    Ok(out)
}

/// Largest weight wins; ties go to the shared layer, then to source.
pub fn argmax_kind(w: &[f64; 3]) -> LayerKind {
    let mut best = (LayerKind::Shared, w[0]);
    for (kind, v) in [(LayerKind::LslSrc, w[1]), (LayerKind::LslTgt, w[2])] {
        if v > best.1 {
            best = (kind, v);
        }
    }
    best.0
}

pub fn select_architecture(runs: &[MixingRunResult], decoder_mode: DecoderMode) -> Result<ArchitectureSpec> {
    let avg = average_weights(runs)?;
    let spec = ArchitectureSpec { encoder_kinds: avg.iter().map(argmax_kind).collect(), decoder_mode };
    spec.validate()?;
    Ok(spec)
}
