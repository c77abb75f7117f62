//! Total versus effective (per-direction) parameter accounting.

use std::fmt;

use crate::arch::model::{DecoderStack, EncoderBlock, Model};
use crate::arch::spec::{ArchitectureSpec, DecoderMode, LayerKind};
use crate::error::{Error, Result};
use crate::layers::ModelDims;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ParamBreakdown {
    pub embeddings: usize,
    pub encoder_shared: usize,
    pub encoder_language_specific: usize,
    pub mixing_gates: usize,
    pub decoders: usize,
}

impl ParamBreakdown {
    pub fn total(&self) -> usize {
        self.embeddings + self.encoder_shared + self.encoder_language_specific + self.mixing_gates + self.decoders
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParamReport {
    /// Every stored parameter.
    pub total: usize,
    /// Parameters read by one forward pass of a single direction.
    pub effective: usize,
    pub breakdown: ParamBreakdown,
}

impl fmt::Display for ParamReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = &self.breakdown;
        writeln!(f, "total\t{}\t{:.1}M", self.total, self.total as f64 / 1e6)?;
        writeln!(f, "effective\t{}\t{:.1}M", self.effective, self.effective as f64 / 1e6)?;
        writeln!(f, "embeddings\t{}", b.embeddings)?;
        writeln!(f, "encoder_shared\t{}", b.encoder_shared)?;
        writeln!(f, "encoder_language_specific\t{}", b.encoder_language_specific)?;
        writeln!(f, "mixing_gates\t{}", b.mixing_gates)?;
        write!(f, "decoders\t{}", b.decoders)
    }
}

/// Counts a built model. The effective count is taken over every direction
/// and must be identical for all of them.
pub fn count_params<S: Scalar>(model: &Model<S>) -> Result<ParamReport> {
    let store = model.store();
    let size = |ids: Vec<crate::tensors::ParamId>| -> usize { ids.iter().map(|&id| store.value(id).numel()).sum() };
    let mut b = ParamBreakdown { embeddings: store.value(model.embedding()).numel(), ..Default::default() };
    for block in model.encoder() {
        match block {
            EncoderBlock::Shared(p) => b.encoder_shared += size(p.param_ids()),
            EncoderBlock::Lsl(bank) => b.encoder_language_specific += size(bank.param_ids()),
            EncoderBlock::Mixed(m) => {
                b.encoder_shared += size(m.shared.param_ids());
                b.encoder_language_specific += size(m.bank.param_ids());
                b.mixing_gates += store.value(m.gate).numel();
            }
        }
    }
    b.decoders = match model.decoder() {
        DecoderStack::Shared(layers) => layers.iter().map(|l| size(l.param_ids())).sum(),
        DecoderStack::PerTarget(map) => map.values().flatten().map(|l| size(l.param_ids())).sum(),
    };
    let total = store.total_numel();
    debug_assert_eq!(total, b.total());

    let mut effective = None;
    for ctx in model.directions() {
        let n = model.numel(&model.params_for_direction(&ctx)?);
        match effective {
            None => effective = Some(n),
            Some(e) if e != n => {
                return Err(Error::Contract(format!(
                    "effective parameters differ across directions ({e} vs {n} for {}->{})",
                    ctx.src, ctx.tgt
                )))
            }
            _ => {}
        }
    }
    Ok(ParamReport { total, effective: effective.unwrap_or(total), breakdown: b })
}

/// Closed-form counts; agrees exactly with [`count_params`] on any buildable
/// configuration.
pub fn count_params_symbolic(dims: &ModelDims, n_languages: usize, arch: &ArchitectureSpec) -> ParamReport {
    let enc = dims.encoder_layer_params();
    let dec = dims.decoder_layer_params();
    let mut b = ParamBreakdown { embeddings: dims.embedding_params(), ..Default::default() };
    let mut effective_encoder = 0;
    for kind in &arch.encoder_kinds {
        match kind {
            LayerKind::Shared => {
                b.encoder_shared += enc;
                effective_encoder += enc;
            }
            LayerKind::LslSrc | LayerKind::LslTgt => {
                b.encoder_language_specific += n_languages * enc;
                effective_encoder += enc;
            }
            LayerKind::MixedSearch => {
                b.encoder_shared += enc;
                b.encoder_language_specific += n_languages * enc;
                b.mixing_gates += 3;
                effective_encoder += 3 * enc + 3;
            }
        }
    }
    let stack = dims.n_dec_layers * dec;
    b.decoders = match arch.decoder_mode {
        DecoderMode::Shared => stack,
        DecoderMode::PerTarget => n_languages * stack,
    };
    ParamReport { total: b.total(), effective: b.embeddings + effective_encoder + stack, breakdown: b }
}
