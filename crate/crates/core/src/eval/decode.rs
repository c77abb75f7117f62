use crate::arch::Model;
use crate::data::{symbol_ids, tag_source, Vocab, BOS, EOS};
use crate::error::{Error, Result};
use crate::lsl::{Quality, RoutingContext};
use crate::scalar::Scalar;
use crate::tensors::Tape;

/// Greedy decoding of one untagged source (alphabet symbols). The source is
/// always tagged high quality. Returns vocabulary ids without the end token.
pub fn greedy_decode<S: Scalar>(
    model: &Model<S>,
    vocab: &Vocab,
    src: &[usize],
    ctx: &RoutingContext,
    max_len: usize,
) -> Result<Vec<usize>> {
    if max_len == 0 {
        return Err(Error::Contract("max_len must be at least 1".into()));
    }
    model.check_context(ctx)?;
    let tagged = tag_source(vocab, &symbol_ids(vocab, src), Quality::High, &ctx.src, &ctx.tgt)?;
    let store = model.store();
    let mut tape = Tape::new(store);
    let enc = model.encode(&mut tape, ctx, &[tagged])?;
    let v = model.config().dims.vocab_size;
    let mut prefix = vec![BOS];
    while prefix.len() <= max_len {
        // forward passes only; the encoder part of the tape is reused
        let mark = tape.len();
        let logits = model.decode_logits(&mut tape, ctx, &enc, &[prefix.clone()])?;
        let row = &tape.value(logits)[(prefix.len() - 1) * v..prefix.len() * v];
        let next = argmax(row);
        tape.truncate(mark);
        if next == EOS {
            break;
        }
        prefix.push(next);
    }
    prefix.remove(0);
    Ok(prefix)
}

fn argmax<S: Scalar>(row: &[S]) -> usize {
    let mut best = 0;
    for (i, &x) in row.iter().enumerate() {
        if x > row[best] {
            best = i;
        }
    }
    best
}

/// Anything that maps a source sentence in one direction to output text.
pub trait Translator {
    fn translate(&mut self, src: &[usize], ctx: &RoutingContext) -> Result<String>;
}

/// Greedy decoding rendered as space-separated tokens.
pub struct ModelTranslator<'m, S: Scalar> {
    pub model: &'m Model<S>,
    pub vocab: &'m Vocab,
    pub max_len: usize,
}

impl<S: Scalar> Translator for ModelTranslator<'_, S> {
    fn translate(&mut self, src: &[usize], ctx: &RoutingContext) -> Result<String> {
        let ids = greedy_decode(self.model, self.vocab, src, ctx, self.max_len)?;
        Ok(self.vocab.render(&ids))
    }
}
