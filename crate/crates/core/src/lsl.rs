//! Language-specific encoder layers and the three-way mixed search layer.
//!
//! A bank holds one full encoder layer per language. The whole sentence is
//! routed to a single sub-layer chosen by either its source or its target
//! language; nothing about routing is learned.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::layers::{encoder_layer_forward, AttentionMask, EncoderLayerParams, ModelDims};
use crate::scalar::Scalar;
use crate::tensors::{ParamId, ParamStore, Tape, Tensor, Var};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LanguageId(String);

impl LanguageId {
    pub fn new(code: impl Into<String>) -> Result<Self> {
        let code = code.into();
        if code.is_empty() || code.contains(|c: char| c.is_whitespace() || c == '-' || c == ',' || c == '\t') {
            return Err(Error::Config(format!("invalid language code `{code}`")));
        }
        Ok(Self(code))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for LanguageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for LanguageId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::new(s)
    }
}

/// Sorted, duplicate-free language list.
pub fn language_set<I: IntoIterator<Item = LanguageId>>(langs: I) -> Vec<LanguageId> {
    let mut v: Vec<LanguageId> = langs.into_iter().collect();
    v.sort();
    v.dedup();
    v
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Quality {
    High,
    Low,
}

impl Quality {
    pub fn tag(self) -> &'static str {
        match self {
            Quality::High => "HQ",
            Quality::Low => "LQ",
        }
    }
}

impl FromStr for Quality {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "HQ" => Ok(Quality::High),
            "LQ" => Ok(Quality::Low),
            other => Err(Error::Parse(format!("unknown quality tag `{other}`"))),
        }
    }
}

/// Per-sentence routing information. The quality tag rides along for data
/// plumbing only and never affects routing.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RoutingContext {
    pub src: LanguageId,
    pub tgt: LanguageId,
    pub quality: Quality,
}

impl RoutingContext {
    pub fn new(src: LanguageId, tgt: LanguageId) -> Self {
        Self { src, tgt, quality: Quality::High }
    }

    pub fn key(&self, mode: IndexMode) -> &LanguageId {
        match mode {
            IndexMode::Src => &self.src,
            IndexMode::Tgt => &self.tgt,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum IndexMode {
    Src,
    Tgt,
}

/// Picks the routing language and checks it belongs to `languages`.
pub fn route<'c>(ctx: &'c RoutingContext, mode: IndexMode, languages: &[LanguageId]) -> Result<&'c LanguageId> {
    for lang in [&ctx.src, &ctx.tgt] {
        if !languages.contains(lang) {
            return Err(Error::Routing(lang.to_string()));
        }
    }
    Ok(ctx.key(mode))
}

/// One encoder layer per language, indexed by source or target language.
#[derive(Clone, Debug, PartialEq)]
pub struct LslBank {
    pub mode: IndexMode,
    sub_layers: BTreeMap<LanguageId, EncoderLayerParams>,
}

impl LslBank {
    pub fn init<S: Scalar, R: Rng>(
        store: &mut ParamStore<S>,
        name: &str,
        mode: IndexMode,
        languages: &[LanguageId],
        dims: &ModelDims,
        rng: &mut R,
    ) -> Self {
        let sub_layers = language_set(languages.iter().cloned())
            .into_iter()
            .map(|lang| {
                let p = EncoderLayerParams::init(store, &format!("{name}.{lang}"), dims, rng);
                (lang, p)
            })
            .collect();
        Self { mode, sub_layers }
    }

    pub fn languages(&self) -> impl Iterator<Item = &LanguageId> {
        self.sub_layers.keys()
    }

    pub fn sub_layers(&self) -> impl Iterator<Item = (&LanguageId, &EncoderLayerParams)> {
        self.sub_layers.iter()
    }

    pub fn sub_layer(&self, lang: &LanguageId) -> Result<&EncoderLayerParams> {
        self.sub_layers.get(lang).ok_or_else(|| Error::Routing(lang.to_string()))
    }

    /// The sub-layer a sentence with this context is routed to.
    pub fn routed(&self, ctx: &RoutingContext) -> Result<&EncoderLayerParams> {
        self.routed_by(ctx, self.mode)
    }

    /// Routing with an explicit index mode, ignoring the bank's own.
    pub fn routed_by(&self, ctx: &RoutingContext, mode: IndexMode) -> Result<&EncoderLayerParams> {
        for lang in [&ctx.src, &ctx.tgt] {
            if !self.sub_layers.contains_key(lang) {
                return Err(Error::Routing(lang.to_string()));
            }
        }
        self.sub_layer(ctx.key(mode))
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        self.sub_layers.values().flat_map(|p| p.param_ids()).collect()
    }
}

pub fn lsl_forward<S: Scalar>(
    tape: &mut Tape<'_, S>,
    x: Var,
    mask: &AttentionMask,
    ctx: &RoutingContext,
    bank: &LslBank,
    n_heads: usize,
) -> Result<Var> {
    let p = bank.routed(ctx)?;
    encoder_layer_forward(tape, p, x, mask, n_heads)
}

/// Gate logits of one searched layer, ordered (shared, src, tgt).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MixingState {
    pub logits: [f64; 3],
}

impl MixingState {
    pub fn from_store<S: Scalar>(store: &ParamStore<S>, gate: ParamId) -> Self {
        let v = store.value(gate).data();
        Self { logits: [v[0].to_f64_lossy(), v[1].to_f64_lossy(), v[2].to_f64_lossy()] }
    }

    pub fn weights(&self) -> [f64; 3] {
        mixing_weights(self.logits)
    }
}

/// Softmax of three gate logits.
pub fn mixing_weights<S: Scalar>(logits: [S; 3]) -> [S; 3] {
    let max = logits.iter().copied().fold(S::neg_infinity(), S::max);
    let e = logits.map(|l| (l - max).exp());
    let z = e[0] + e[1] + e[2];
    e.map(|v| v / z)
}

/// A searched layer: a shared branch, one language bank that is read both
/// source-indexed and target-indexed, and the gate logits. It stores as many
/// encoder layers as there are languages, plus one.
#[derive(Clone, Debug, PartialEq)]
pub struct MixedLayer {
    pub shared: EncoderLayerParams,
    pub bank: LslBank,
    pub gate: ParamId,
}

impl MixedLayer {
    pub fn init<S: Scalar, R: Rng>(
        store: &mut ParamStore<S>,
        name: &str,
        languages: &[LanguageId],
        dims: &ModelDims,
        rng: &mut R,
    ) -> Self {
        let shared = EncoderLayerParams::init(store, &format!("{name}.shared"), dims, rng);
        let bank = LslBank::init(store, &format!("{name}.lsl"), IndexMode::Src, languages, dims, rng);
        // zero logits: the search starts from uniform weights
        let gate = store.add(format!("{name}.gate"), Tensor::zeros(vec![3]));
        Self { shared, bank, gate }
    }
}

/// `w_shared·shared(x) + w_src·LSL(x, src) + w_tgt·LSL(x, tgt)` with
/// `w = softmax(gate_logits)`. All three branches are evaluated; both LSL
/// terms read `bank`, routed by source and by target language.
#[allow(clippy::too_many_arguments)]
pub fn mixed_layer_forward<S: Scalar>(
    tape: &mut Tape<'_, S>,
    x: Var,
    mask: &AttentionMask,
    ctx: &RoutingContext,
    shared: &EncoderLayerParams,
    bank: &LslBank,
    gate_logits: Var,
    n_heads: usize,
) -> Result<Var> {
    if tape.value(gate_logits).len() != 3 {
        return Err(Error::shape("mixed_layer", "gate needs exactly three logits"));
    }
    let w = tape.softmax_lastdim(gate_logits)?;
    let a = encoder_layer_forward(tape, shared, x, mask, n_heads)?;
    let b = encoder_layer_forward(tape, bank.routed_by(ctx, IndexMode::Src)?, x, mask, n_heads)?;
    let c = encoder_layer_forward(tape, bank.routed_by(ctx, IndexMode::Tgt)?, x, mask, n_heads)?;
    let a = tape.scale_by(a, w, 0)?;
    let b = tape.scale_by(b, w, 1)?;
    let c = tape.scale_by(c, w, 2)?;
    let ab = tape.add(a, b)?;
    tape.add(ab, c)
}
