//! Dense pre-training initialisation: every encoder branch of a target model
//! starts from the corresponding layer of a fully shared baseline.

use crate::arch::model::{DecoderStack, EncoderBlock, Model};
use crate::error::{Error, Result};
use crate::layers::{DecoderLayerParams, EncoderLayerParams};
use crate::scalar::Scalar;
use crate::tensors::ParamStore;

fn copy_layer<S: Scalar>(
    dst_store: &mut ParamStore<S>,
    dst: &[crate::tensors::ParamId],
    src_store: &ParamStore<S>,
    src: &[crate::tensors::ParamId],
) -> Result<()> {
    debug_assert_eq!(dst.len(), src.len());
    for (&d, &s) in dst.iter().zip(src) {
        dst_store.copy_value_from(d, src_store, s)?;
    }
    Ok(())
}

fn copy_encoder<S: Scalar>(store: &mut ParamStore<S>, dst: &EncoderLayerParams, base: &ParamStore<S>, src: &EncoderLayerParams) -> Result<()> {
    copy_layer(store, &dst.param_ids(), base, &src.param_ids())
}

fn copy_decoder<S: Scalar>(store: &mut ParamStore<S>, dst: &[DecoderLayerParams], base: &ParamStore<S>, src: &[DecoderLayerParams]) -> Result<()> {
    for (d, s) in dst.iter().zip(src) {
        copy_layer(store, &d.param_ids(), base, &s.param_ids())?;
    }
    Ok(())
}

/// Copies `baseline` weights into `target`. The baseline must have an
/// all-shared encoder with the same dims, languages and decoder mode. Mixing
/// gates of a search model keep their current values.
pub fn dense_pretrain_init<S: Scalar>(target: &mut Model<S>, baseline: &Model<S>) -> Result<()> {
    let (tc, bc) = (target.config().clone(), baseline.config());
    if tc.dims != bc.dims || tc.languages != bc.languages {
        return Err(Error::Config("dense init needs identical dims and languages".into()));
    }
    if tc.arch.decoder_mode != bc.arch.decoder_mode {
        return Err(Error::Config("dense init needs matching decoder modes".into()));
    }
    let base_layers: Vec<&EncoderLayerParams> = baseline
        .encoder()
        .iter()
        .map(|b| match b {
            EncoderBlock::Shared(p) => Ok(p),
            _ => Err(Error::Config("dense init source must have an all-shared encoder".into())),
        })
        .collect::<Result<_>>()?;
    let base = baseline.store();
    let emb = target.embedding();
    target.store_mut().copy_value_from(emb, base, baseline.embedding())?;

    let encoder = target.encoder().to_vec();
    let decoder = target.decoder().clone();
    let store = target.store_mut();
    for (block, src) in encoder.iter().zip(base_layers) {
        match block {
            EncoderBlock::Shared(p) => copy_encoder(store, p, base, src)?,
            EncoderBlock::Lsl(bank) => {
                for (_, p) in bank.sub_layers() {
                    copy_encoder(store, p, base, src)?;
                }
            }
            EncoderBlock::Mixed(m) => {
                copy_encoder(store, &m.shared, base, src)?;
                for (_, p) in m.bank.sub_layers() {
                    copy_encoder(store, p, base, src)?;
                }
            }
        }
    }
    match (&decoder, baseline.decoder()) {
        (DecoderStack::Shared(d), DecoderStack::Shared(s)) => copy_decoder(store, d, base, s)?,
        (DecoderStack::PerTarget(d), DecoderStack::PerTarget(s)) => {
            for (lang, layers) in d {
                let src = s.get(lang).ok_or_else(|| Error::Routing(lang.to_string()))?;
                copy_decoder(store, layers, base, src)?;
            }
        }
        _ => unreachable!("decoder modes were checked above"),
    }
    Ok(())
}
