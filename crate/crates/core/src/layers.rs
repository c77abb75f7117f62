//! Regular transformer building blocks: multi-head attention, feed-forward,
//! encoder layer and decoder layer, all post-norm (`LN(x + block(x))`).
//!
//! Activations are packed as `[batch * len, d_model]`; attention works
//! block-wise so sentences in a batch never attend to each other.

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensors::{ParamId, ParamStore, Tape, Tensor, Var};

pub const LAYER_NORM_EPS: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelDims {
    pub d_model: usize,
    pub d_ffn: usize,
    pub n_heads: usize,
    pub n_enc_layers: usize,
    pub n_dec_layers: usize,
    pub vocab_size: usize,
}

impl ModelDims {
    pub fn validate(&self) -> Result<()> {
        let all = [self.d_model, self.d_ffn, self.n_heads, self.n_enc_layers, self.n_dec_layers, self.vocab_size];
        if all.contains(&0) {
            return Err(Error::Config(format!("all model dimensions must be positive: {self:?}")));
        }
        if self.d_model % self.n_heads != 0 {
            return Err(Error::Config(format!(
                "d_model {} is not divisible by {} heads",
                self.d_model, self.n_heads
            )));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    /// Parameters of one encoder layer: four projections, the two FFN
    /// matrices, and two layer norms.
    pub fn encoder_layer_params(&self) -> usize {
        let (d, f) = (self.d_model, self.d_ffn);
        4 * (d * d + d) + (d * f + f) + (f * d + d) + 2 * 2 * d
    }

    /// Self- and cross-attention, FFN, three layer norms.
    pub fn decoder_layer_params(&self) -> usize {
        let (d, f) = (self.d_model, self.d_ffn);
        8 * (d * d + d) + (d * f + f) + (f * d + d) + 3 * 2 * d
    }

    pub fn embedding_params(&self) -> usize {
        self.vocab_size * self.d_model
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Linear {
    fn init<S: Scalar, R: Rng>(store: &mut ParamStore<S>, name: &str, fan_in: usize, fan_out: usize, rng: &mut R) -> Self {
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let weight = store.add(format!("{name}.weight"), Tensor::uniform(vec![fan_in, fan_out], bound, rng));
        let bias = store.add(format!("{name}.bias"), Tensor::zeros(vec![fan_out]));
        Self { weight, bias }
    }

    pub fn forward<S: Scalar>(&self, tape: &mut Tape<'_, S>, x: Var) -> Result<Var> {
        let w = tape.param(self.weight);
        let b = tape.param(self.bias);
        let y = tape.matmul(x, w)?;
        tape.add_bias(y, b)
    }

    fn ids(&self) -> [ParamId; 2] {
        [self.weight, self.bias]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NormParams {
    pub gain: ParamId,
    pub bias: ParamId,
}

impl NormParams {
    fn init<S: Scalar>(store: &mut ParamStore<S>, name: &str, d: usize) -> Self {
        let gain = store.add(format!("{name}.gain"), Tensor::filled(vec![d], S::one()));
        let bias = store.add(format!("{name}.bias"), Tensor::zeros(vec![d]));
        Self { gain, bias }
    }

    pub fn forward<S: Scalar>(&self, tape: &mut Tape<'_, S>, x: Var) -> Result<Var> {
        let g = tape.param(self.gain);
        let b = tape.param(self.bias);
        tape.layer_norm(x, g, b, S::of(LAYER_NORM_EPS))
    }

    fn ids(&self) -> [ParamId; 2] {
        [self.gain, self.bias]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AttentionParams {
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub output: Linear,
}

impl AttentionParams {
    fn init<S: Scalar, R: Rng>(store: &mut ParamStore<S>, name: &str, d: usize, rng: &mut R) -> Self {
        Self {
            query: Linear::init(store, &format!("{name}.q"), d, d, rng),
            key: Linear::init(store, &format!("{name}.k"), d, d, rng),
            value: Linear::init(store, &format!("{name}.v"), d, d, rng),
            output: Linear::init(store, &format!("{name}.o"), d, d, rng),
        }
    }

    fn ids(&self) -> impl Iterator<Item = ParamId> {
        [self.query, self.key, self.value, self.output].into_iter().flat_map(|l| l.ids())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FeedForwardParams {
    pub up: Linear,
    pub down: Linear,
}

impl FeedForwardParams {
    pub fn forward<S: Scalar>(&self, tape: &mut Tape<'_, S>, x: Var) -> Result<Var> {
        let h = self.up.forward(tape, x)?;
        let h = tape.relu(h)?;
        self.down.forward(tape, h)
    }
}

/// One regular encoder layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EncoderLayerParams {
    pub attn: AttentionParams,
    pub ffn: FeedForwardParams,
    pub norm_attn: NormParams,
    pub norm_ffn: NormParams,
}

impl EncoderLayerParams {
    pub fn init<S: Scalar, R: Rng>(store: &mut ParamStore<S>, name: &str, dims: &ModelDims, rng: &mut R) -> Self {
        let (d, f) = (dims.d_model, dims.d_ffn);
        Self {
            attn: AttentionParams::init(store, &format!("{name}.self_attn"), d, rng),
            ffn: FeedForwardParams {
                up: Linear::init(store, &format!("{name}.ffn.up"), d, f, rng),
                down: Linear::init(store, &format!("{name}.ffn.down"), f, d, rng),
            },
            norm_attn: NormParams::init(store, &format!("{name}.norm_attn"), d),
            norm_ffn: NormParams::init(store, &format!("{name}.norm_ffn"), d),
        }
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        let mut ids: Vec<ParamId> = self.attn.ids().collect();
        ids.extend(self.ffn.up.ids());
        ids.extend(self.ffn.down.ids());
        ids.extend(self.norm_attn.ids());
        ids.extend(self.norm_ffn.ids());
        ids
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DecoderLayerParams {
    pub self_attn: AttentionParams,
    pub cross_attn: AttentionParams,
    pub ffn: FeedForwardParams,
    pub norm_self: NormParams,
    pub norm_cross: NormParams,
    pub norm_ffn: NormParams,
}

impl DecoderLayerParams {
    pub fn init<S: Scalar, R: Rng>(store: &mut ParamStore<S>, name: &str, dims: &ModelDims, rng: &mut R) -> Self {
        let (d, f) = (dims.d_model, dims.d_ffn);
        Self {
            self_attn: AttentionParams::init(store, &format!("{name}.self_attn"), d, rng),
            cross_attn: AttentionParams::init(store, &format!("{name}.cross_attn"), d, rng),
            ffn: FeedForwardParams {
                up: Linear::init(store, &format!("{name}.ffn.up"), d, f, rng),
                down: Linear::init(store, &format!("{name}.ffn.down"), f, d, rng),
            },
            norm_self: NormParams::init(store, &format!("{name}.norm_self"), d),
            norm_cross: NormParams::init(store, &format!("{name}.norm_cross"), d),
            norm_ffn: NormParams::init(store, &format!("{name}.norm_ffn"), d),
        }
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        let mut ids: Vec<ParamId> = self.self_attn.ids().chain(self.cross_attn.ids()).collect();
        ids.extend(self.ffn.up.ids());
        ids.extend(self.ffn.down.ids());
        for n in [self.norm_self, self.norm_cross, self.norm_ffn] {
            ids.extend(n.ids());
        }
        ids
    }
}

/// Which keys each query row may attend to, laid out `[batch * len_q, len_k]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttentionMask {
    pub batch: usize,
    pub len_q: usize,
    pub len_k: usize,
    allowed: Vec<bool>,
}

impl AttentionMask {
    /// Every query may see every non-padding key of its own sentence.
    /// `key_padding[b * len_k + j]` is true for padding.
    pub fn padding(batch: usize, len_q: usize, len_k: usize, key_padding: &[bool]) -> Result<Self> {
        if key_padding.len() != batch * len_k {
            return Err(Error::shape("attention_mask", "padding flags do not cover the keys"));
        }
        let mut allowed = Vec::with_capacity(batch * len_q * len_k);
        for b in 0..batch {
            for _ in 0..len_q {
                allowed.extend(key_padding[b * len_k..(b + 1) * len_k].iter().map(|p| !p));
            }
        }
        Ok(Self { batch, len_q, len_k, allowed })
    }

    /// Padding mask combined with "key position ≤ query position".
    pub fn causal(batch: usize, len: usize, key_padding: &[bool]) -> Result<Self> {
        let mut m = Self::padding(batch, len, len, key_padding)?;
        for b in 0..batch {
            for i in 0..len {
                for j in i + 1..len {
                    m.allowed[(b * len + i) * len + j] = false;
                }
            }
        }
        Ok(m)
    }

    pub fn allowed(&self) -> &[bool] {
        &self.allowed
    }
}

/// Scaled dot-product attention over `n_heads` heads followed by the output
/// projection. `queries` is `[batch*len_q, d]`, `keys_values` is `[batch*len_k, d]`.
pub fn multi_head_attention<S: Scalar>(
    tape: &mut Tape<'_, S>,
    p: &AttentionParams,
    queries: Var,
    keys_values: Var,
    mask: &AttentionMask,
    n_heads: usize,
) -> Result<Var> {
    let d = *tape.shape(queries).last().unwrap_or(&0);
    if n_heads == 0 || d % n_heads != 0 {
        return Err(Error::Config(format!("width {d} is not divisible by {n_heads} heads")));
    }
    if tape.shape(queries)[0] != mask.batch * mask.len_q || tape.shape(keys_values)[0] != mask.batch * mask.len_k {
        return Err(Error::shape("attention", "mask geometry does not match inputs"));
    }
    let dh = d / n_heads;
    let scale = S::one() / S::of_usize(dh).sqrt();
    let q = p.query.forward(tape, queries)?;
    let k = p.key.forward(tape, keys_values)?;
    let v = p.value.forward(tape, keys_values)?;
    let mut heads = Vec::with_capacity(n_heads);
    for h in 0..n_heads {
        let qh = tape.slice_cols(q, h * dh, dh)?;
        let kh = tape.slice_cols(k, h * dh, dh)?;
        let vh = tape.slice_cols(v, h * dh, dh)?;
        let scores = tape.batched_matmul_nt(qh, kh, mask.batch)?;
        let scores = tape.scale(scores, scale)?;
        let probs = tape.masked_softmax(scores, mask.allowed())?;
        heads.push(tape.batched_matmul(probs, vh, mask.batch)?);
    }
    let ctx = if heads.len() == 1 { heads[0] } else { tape.concat_cols(&heads)? };
    p.output.forward(tape, ctx)
}

pub fn encoder_layer_forward<S: Scalar>(
    tape: &mut Tape<'_, S>,
    p: &EncoderLayerParams,
    x: Var,
    mask: &AttentionMask,
    n_heads: usize,
) -> Result<Var> {
    let a = multi_head_attention(tape, &p.attn, x, x, mask, n_heads)?;
    let h = tape.add(x, a)?;
    let h = p.norm_attn.forward(tape, h)?;
    let f = p.ffn.forward(tape, h)?;
    let out = tape.add(h, f)?;
    p.norm_ffn.forward(tape, out)
}

pub fn decoder_layer_forward<S: Scalar>(
    tape: &mut Tape<'_, S>,
    p: &DecoderLayerParams,
    x: Var,
    enc_out: Var,
    self_mask: &AttentionMask,
    cross_mask: &AttentionMask,
    n_heads: usize,
) -> Result<Var> {
    let a = multi_head_attention(tape, &p.self_attn, x, x, self_mask, n_heads)?;
    let h = tape.add(x, a)?;
    let h = p.norm_self.forward(tape, h)?;
    let c = multi_head_attention(tape, &p.cross_attn, h, enc_out, cross_mask, n_heads)?;
    let h2 = tape.add(h, c)?;
    let h2 = p.norm_cross.forward(tape, h2)?;
    let f = p.ffn.forward(tape, h2)?;
    let out = tape.add(h2, f)?;
    p.norm_ffn.forward(tape, out)
}

/// Sinusoidal position table `[len, d]`.
pub fn sinusoidal_positions<S: Scalar>(len: usize, d: usize) -> Tensor<S> {
    let mut data = Vec::with_capacity(len * d);
    for pos in 0..len {
        for i in 0..d {
            let rate = 1.0 / 10000f64.powf((2 * (i / 2)) as f64 / d as f64);
            let angle = pos as f64 * rate;
            data.push(S::of(if i % 2 == 0 { angle.sin() } else { angle.cos() }));
        }
    }
    Tensor::new(vec![len, d], data).expect("position table shape")
}
