use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::arch::spec::{DecoderMode, LayerKind, ModelConfig};
use crate::data::vocab::{BOS, EOS, PAD};
use crate::error::{Error, Result};
use crate::layers::{
    decoder_layer_forward, encoder_layer_forward, sinusoidal_positions, AttentionMask, DecoderLayerParams,
    EncoderLayerParams,
};
use crate::lsl::{lsl_forward, mixed_layer_forward, IndexMode, LanguageId, LslBank, MixedLayer, MixingState, RoutingContext};
use crate::scalar::Scalar;
use crate::tensors::{ParamId, ParamStore, Tape, Tensor, Var};

#[derive(Clone, Debug, PartialEq)]
pub enum EncoderBlock {
    Shared(EncoderLayerParams),
    Lsl(LslBank),
    Mixed(MixedLayer),
}

#[derive(Clone, Debug, PartialEq)]
pub enum DecoderStack {
    Shared(Vec<DecoderLayerParams>),
    PerTarget(BTreeMap<LanguageId, Vec<DecoderLayerParams>>),
}

impl DecoderStack {
    pub fn for_target(&self, tgt: &LanguageId) -> Result<&[DecoderLayerParams]> {
        match self {
            DecoderStack::Shared(layers) => Ok(layers),
            DecoderStack::PerTarget(map) => {
                map.get(tgt).map(Vec::as_slice).ok_or_else(|| Error::Routing(tgt.to_string()))
            }
        }
    }

    pub fn n_stacks(&self) -> usize {
        match self {
            DecoderStack::Shared(_) => 1,
            DecoderStack::PerTarget(m) => m.len(),
        }
    }
}

/// Encoder output plus the geometry the decoder needs.
#[derive(Clone, Debug)]
pub struct Encoded {
    pub out: Var,
    pub batch: usize,
    pub len: usize,
    pub padding: Vec<bool>,
}

/// Encoder–decoder with tied embeddings (encoder input, decoder input and
/// output projection share one table).
#[derive(Clone, Debug)]
pub struct Model<S: Scalar> {
    config: ModelConfig,
    store: ParamStore<S>,
    embedding: ParamId,
    encoder: Vec<EncoderBlock>,
    decoder: DecoderStack,
}

impl<S: Scalar> Model<S> {
    /// Deterministic construction: the same config and seed give bit-identical
    /// parameters.
    pub fn build(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let dims = config.dims;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let emb_bound = (3.0 / dims.d_model as f64).sqrt();
        let embedding = store.add("embedding", Tensor::uniform(vec![dims.vocab_size, dims.d_model], emb_bound, &mut rng));
        let langs = &config.languages;
        let encoder = config
            .arch
            .encoder_kinds
            .iter()
            .enumerate()
            .map(|(i, kind)| {
                let name = format!("encoder.{}", i + 1);
                match kind {
                    LayerKind::Shared => EncoderBlock::Shared(EncoderLayerParams::init(&mut store, &name, &dims, &mut rng)),
                    LayerKind::LslSrc => {
                        EncoderBlock::Lsl(LslBank::init(&mut store, &name, IndexMode::Src, langs, &dims, &mut rng))
                    }
                    LayerKind::LslTgt => {
                        EncoderBlock::Lsl(LslBank::init(&mut store, &name, IndexMode::Tgt, langs, &dims, &mut rng))
                    }
                    LayerKind::MixedSearch => EncoderBlock::Mixed(MixedLayer::init(&mut store, &name, langs, &dims, &mut rng)),
                }
            })
            .collect();
        let mut stack = |prefix: &str, store: &mut ParamStore<S>| -> Vec<DecoderLayerParams> {
            (1..=dims.n_dec_layers)
                .map(|j| DecoderLayerParams::init(store, &format!("{prefix}.{j}"), &dims, &mut rng))
                .collect()
        };
        let decoder = match config.arch.decoder_mode {
            DecoderMode::Shared => DecoderStack::Shared(stack("decoder", &mut store)),
            DecoderMode::PerTarget => DecoderStack::PerTarget(
                langs.iter().map(|l| (l.clone(), stack(&format!("decoder.{l}"), &mut store))).collect(),
            ),
        };
        Ok(Self { config: config.clone(), store, embedding, encoder, decoder })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn store(&self) -> &ParamStore<S> {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore<S> {
        &mut self.store
    }

    pub fn embedding(&self) -> ParamId {
        self.embedding
    }

    pub fn encoder(&self) -> &[EncoderBlock] {
        &self.encoder
    }

    pub fn decoder(&self) -> &DecoderStack {
        &self.decoder
    }

    pub fn lsl_banks(&self) -> impl Iterator<Item = &LslBank> {
        self.encoder.iter().filter_map(|b| match b {
            EncoderBlock::Lsl(bank) => Some(bank),
            _ => None,
        })
    }

    /// Gate parameters of searched layers, in layer order.
    pub fn gates(&self) -> Vec<ParamId> {
        self.encoder
            .iter()
            .filter_map(|b| match b {
                EncoderBlock::Mixed(m) => Some(m.gate),
                _ => None,
            })
            .collect()
    }

    /// Current simplex weights (shared, src, tgt) of every searched layer.
    pub fn mixing_weights(&self) -> Vec<[f64; 3]> {
        self.gates().into_iter().map(|g| MixingState::from_store(&self.store, g).weights()).collect()
    }

    pub fn check_context(&self, ctx: &RoutingContext) -> Result<()> {
        for lang in [&ctx.src, &ctx.tgt] {
            if self.config.languages.binary_search(lang).is_err() {
                return Err(Error::Routing(lang.to_string()));
            }
        }
        Ok(())
    }

    fn embed(&self, tape: &mut Tape<'_, S>, ids: &[usize], batch: usize, len: usize) -> Result<Var> {
        let d = self.config.dims.d_model;
        let table = tape.param(self.embedding);
        let x = tape.gather_rows(table, ids)?;
        let x = tape.scale(x, S::of_usize(d).sqrt())?;
        let pos = sinusoidal_positions::<S>(len, d);
        let mut tiled = Vec::with_capacity(batch * len * d);
        for _ in 0..batch {
            tiled.extend_from_slice(pos.data());
        }
        let pos = tape.leaf(&Tensor::new(vec![batch * len, d], tiled)?, false)?;
        tape.add(x, pos)
    }

    /// Runs the encoder over already tagged source sentences sharing one
    /// routing context.
    pub fn encode(&self, tape: &mut Tape<'_, S>, ctx: &RoutingContext, src: &[Vec<usize>]) -> Result<Encoded> {
        self.check_context(ctx)?;
        let (ids, padding, batch, len) = pack(src)?;
        let mut x = self.embed(tape, &ids, batch, len)?;
        let mask = AttentionMask::padding(batch, len, len, &padding)?;
        let heads = self.config.dims.n_heads;
        for block in &self.encoder {
            x = match block {
                EncoderBlock::Shared(p) => encoder_layer_forward(tape, p, x, &mask, heads)?,
                EncoderBlock::Lsl(bank) => lsl_forward(tape, x, &mask, ctx, bank, heads)?,
                EncoderBlock::Mixed(m) => {
                    let gate = tape.param(m.gate);
                    mixed_layer_forward(tape, x, &mask, ctx, &m.shared, &m.bank, gate, heads)?
                }
            };
        }
        Ok(Encoded { out: x, batch, len, padding })
    }

    /// Output-vocabulary logits `[batch * len_t, V]` for decoder inputs
    /// (each starting with the begin token).
    pub fn decode_logits(
        &self,
        tape: &mut Tape<'_, S>,
        ctx: &RoutingContext,
        enc: &Encoded,
        dec_in: &[Vec<usize>],
    ) -> Result<Var> {
        let (ids, padding, batch, len) = pack(dec_in)?;
        if batch != enc.batch {
            return Err(Error::shape("decode", format!("{batch} decoder rows for {} encoded", enc.batch)));
        }
        let mut y = self.embed(tape, &ids, batch, len)?;
        let self_mask = AttentionMask::causal(batch, len, &padding)?;
        let cross_mask = AttentionMask::padding(batch, len, enc.len, &enc.padding)?;
        let heads = self.config.dims.n_heads;
        for layer in self.decoder.for_target(&ctx.tgt)? {
            y = decoder_layer_forward(tape, layer, y, enc.out, &self_mask, &cross_mask, heads)?;
        }
        let table = tape.param(self.embedding);
        tape.matmul_nt(y, table)
    }

    /// Mean token cross-entropy of `tgt` given tagged `src`.
    pub fn loss(&self, tape: &mut Tape<'_, S>, ctx: &RoutingContext, src: &[Vec<usize>], tgt: &[Vec<usize>]) -> Result<Var> {
        if src.len() != tgt.len() {
            return Err(Error::shape("loss", "source and target batch sizes differ"));
        }
        let enc = self.encode(tape, ctx, src)?;
        let dec_in: Vec<Vec<usize>> = tgt.iter().map(|t| std::iter::once(BOS).chain(t.iter().copied()).collect()).collect();
        let logits = self.decode_logits(tape, ctx, &enc, &dec_in)?;
        let len = dec_in.iter().map(Vec::len).max().unwrap_or(0);
        let mut labels = Vec::with_capacity(tgt.len() * len);
        for t in tgt {
            labels.extend(t.iter().copied());
            labels.push(EOS);
            labels.extend(std::iter::repeat(PAD).take(len - t.len() - 1));
        }
        tape.cross_entropy(logits, &labels, PAD)
    }

    /// Parameters a forward pass for this direction reads, derived from the
    /// model structure.
    pub fn params_for_direction(&self, ctx: &RoutingContext) -> Result<BTreeSet<ParamId>> {
        self.check_context(ctx)?;
        let mut set = BTreeSet::from([self.embedding]);
        for block in &self.encoder {
            match block {
                EncoderBlock::Shared(p) => set.extend(p.param_ids()),
                EncoderBlock::Lsl(bank) => set.extend(bank.routed(ctx)?.param_ids()),
                EncoderBlock::Mixed(m) => {
                    set.extend(m.shared.param_ids());
                    set.extend(m.bank.routed_by(ctx, IndexMode::Src)?.param_ids());
                    set.extend(m.bank.routed_by(ctx, IndexMode::Tgt)?.param_ids());
                    set.insert(m.gate);
                }
            }
        }
        for layer in self.decoder.for_target(&ctx.tgt)? {
            set.extend(layer.param_ids());
        }
        Ok(set)
    }

    /// Parameters actually read by a recorded forward pass of a one-token
    /// sentence in this direction.
    pub fn touched_by_forward(&self, ctx: &RoutingContext) -> Result<BTreeSet<ParamId>> {
        let mut tape = Tape::new(&self.store);
        let any = self.config.dims.vocab_size - 1;
        let _ = self.loss(&mut tape, ctx, &[vec![any]], &[vec![any]])?;
        Ok(tape.touched_params().collect())
    }

    pub fn numel(&self, ids: &BTreeSet<ParamId>) -> usize {
        ids.iter().map(|&id| self.store.value(id).numel()).sum()
    }

    /// Every ordered (src, tgt) pair with src ≠ tgt.
    pub fn directions(&self) -> Vec<RoutingContext> {
        let langs = &self.config.languages;
        let mut out = Vec::new();
        for s in langs {
            for t in langs {
                if s != t {
                    out.push(RoutingContext::new(s.clone(), t.clone()));
                }
            }
        }
        out
    }
}

/// Right-pads sentences to a common length. Returns flat ids, padding flags,
/// batch size and padded length.
fn pack(seqs: &[Vec<usize>]) -> Result<(Vec<usize>, Vec<bool>, usize, usize)> {
    if seqs.is_empty() || seqs.iter().any(Vec::is_empty) {
        return Err(Error::Data("empty batch or empty sequence".into()));
    }
    let len = seqs.iter().map(Vec::len).max().unwrap_or(0);
    let mut ids = Vec::with_capacity(seqs.len() * len);
    let mut padding = Vec::with_capacity(seqs.len() * len);
    for s in seqs {
        ids.extend(s.iter().copied());
        padding.extend(std::iter::repeat(false).take(s.len()));
        ids.extend(std::iter::repeat(PAD).take(len - s.len()));
        padding.extend(std::iter::repeat(true).take(len - s.len()));
    }
    Ok((ids, padding, seqs.len(), len))
}
