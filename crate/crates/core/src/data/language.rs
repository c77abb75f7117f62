use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::vocab::Vocab;
use crate::error::{Error, Result};
use crate::lsl::{LanguageId, Quality, RoutingContext};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Reorder {
    Identity,
    /// Reverses every consecutive window of `k` tokens (the tail window may
    /// be shorter). Self-inverse.
    WindowReverse(usize),
}

impl Reorder {
    /// Family 0 keeps pivot order; family `f > 0` reverses windows of `f + 1`.
    pub fn for_family(family: usize) -> Self {
        if family == 0 {
            Reorder::Identity
        } else {
            Reorder::WindowReverse(family + 1)
        }
    }

    pub fn apply(self, tokens: &mut [usize]) {
        if let Reorder::WindowReverse(k) = self {
            for chunk in tokens.chunks_mut(k) {
                chunk.reverse();
            }
        }
    }
}

/// A cipher over the pivot alphabet plus a family-wide reordering rule.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SyntheticLanguage {
    pub id: LanguageId,
    pub family: usize,
    pub cipher: Vec<usize>,
    pub reorder: Reorder,
}

pub fn make_language(id: LanguageId, seed: u64, family: usize, alphabet_size: usize) -> Result<SyntheticLanguage> {
    if alphabet_size < 2 {
        return Err(Error::Config("alphabet needs at least two symbols".into()));
    }
    let mut cipher: Vec<usize> = (0..alphabet_size).collect();
    cipher.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(SyntheticLanguage { id, family, cipher, reorder: Reorder::for_family(family) })
}

impl SyntheticLanguage {
    pub fn alphabet_size(&self) -> usize {
        self.cipher.len()
    }

    pub fn inverse_cipher(&self) -> Vec<usize> {
        let mut inv = vec![0; self.cipher.len()];
        for (i, &c) in self.cipher.iter().enumerate() {
            inv[c] = i;
        }
        inv
    }

    /// Pivot symbols to this language's surface symbols.
    pub fn realize(&self, pivot: &[usize]) -> Vec<usize> {
        let mut out: Vec<usize> = pivot.iter().map(|&p| self.cipher[p]).collect();
        self.reorder.apply(&mut out);
        out
    }

    /// Inverse of [`realize`](Self::realize).
    pub fn to_pivot(&self, surface: &[usize]) -> Vec<usize> {
        let inv = self.inverse_cipher();
        let mut out = surface.to_vec();
        self.reorder.apply(&mut out);
        out.iter_mut().for_each(|s| *s = inv[*s]);
        out
    }
}

/// One sentence pair in alphabet-symbol space (not vocabulary ids).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExamplePair {
    pub src: Vec<usize>,
    pub tgt: Vec<usize>,
    pub ctx: RoutingContext,
}

/// Realizes `pivot` in both languages. Each source token is replaced by a
/// different uniformly drawn symbol with probability `noise_rate`; the target
/// stays clean.
pub fn generate_pair<R: Rng>(
    src: &SyntheticLanguage,
    tgt: &SyntheticLanguage,
    pivot: &[usize],
    noise_rate: f64,
    rng: &mut R,
) -> Result<ExamplePair> {
    let a = src.alphabet_size();
    if a != tgt.alphabet_size() {
        return Err(Error::Config("languages disagree on alphabet size".into()));
    }
    if pivot.is_empty() || pivot.iter().any(|&p| p >= a) {
        return Err(Error::Data("pivot must be non-empty and inside the alphabet".into()));
    }
    if !(0.0..1.0).contains(&noise_rate) {
        return Err(Error::Config(format!("noise rate {noise_rate} outside [0, 1)")));
    }
    let mut s = src.realize(pivot);
    if noise_rate > 0.0 {
        for tok in &mut s {
            if rng.gen_bool(noise_rate) {
                let r = rng.gen_range(0..a - 1);
                *tok = if r >= *tok { r + 1 } else { r };
            }
        }
    }
    let quality = if noise_rate > 0.0 { Quality::Low } else { Quality::High };
    Ok(ExamplePair {
        src: s,
        tgt: tgt.realize(pivot),
        ctx: RoutingContext { src: src.id.clone(), tgt: tgt.id.clone(), quality },
    })
}

/// `[quality] ++ tokens ++ [src, tgt]` over vocabulary ids.
pub fn tag_source(vocab: &Vocab, tokens: &[usize], quality: Quality, src: &LanguageId, tgt: &LanguageId) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(tokens.len() + 3);
    out.push(vocab.quality_tag(quality));
    out.extend_from_slice(tokens);
    out.push(vocab.lang_tag(src)?);
    out.push(vocab.lang_tag(tgt)?);
    Ok(out)
}

/// Alphabet symbols to vocabulary ids.
pub fn symbol_ids(vocab: &Vocab, symbols: &[usize]) -> Vec<usize> {
    symbols.iter().map(|&s| vocab.symbol(s)).collect()
}
