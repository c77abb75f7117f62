use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::kv::{parse_index_list, render_index_list, KvMap};
use crate::layers::ModelDims;
use crate::lsl::{language_set, LanguageId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LayerKind {
    Shared,
    LslSrc,
    LslTgt,
    MixedSearch,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DecoderMode {
    /// One decoder for every target language.
    Shared,
    /// One decoder stack per target language.
    PerTarget,
}

impl DecoderMode {
    fn keyword(self) -> &'static str {
        match self {
            DecoderMode::Shared => "shared",
            DecoderMode::PerTarget => "separate",
        }
    }
}

impl fmt::Display for DecoderMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

impl FromStr for DecoderMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shared" => Ok(DecoderMode::Shared),
            "separate" => Ok(DecoderMode::PerTarget),
            other => Err(Error::Parse(format!("decoder mode must be shared|separate, got `{other}`"))),
        }
    }
}

/// Per-layer encoder kinds plus decoder mode.
///
/// Text form: `enc=16 dec=separate src=[3,4] tgt=[13,14,15]`, with 1-based
/// layer indices. Search layouts use `mixed=[..]` instead of `src`/`tgt`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ArchitectureSpec {
    pub encoder_kinds: Vec<LayerKind>,
    pub decoder_mode: DecoderMode,
}

impl ArchitectureSpec {
    pub fn baseline(n_enc: usize, decoder_mode: DecoderMode) -> Self {
        Self { encoder_kinds: vec![LayerKind::Shared; n_enc], decoder_mode }
    }

    /// Every encoder layer mixes shared, source and target branches.
    pub fn search(n_enc: usize, decoder_mode: DecoderMode) -> Self {
        Self { encoder_kinds: vec![LayerKind::MixedSearch; n_enc], decoder_mode }
    }

    /// Source LSLs at `src`, target LSLs at `tgt` (1-based), shared elsewhere.
    pub fn with_placement(n_enc: usize, decoder_mode: DecoderMode, src: &[usize], tgt: &[usize]) -> Result<Self> {
        let mut kinds = vec![LayerKind::Shared; n_enc];
        for (list, kind) in [(src, LayerKind::LslSrc), (tgt, LayerKind::LslTgt)] {
            for &i in list {
                if i == 0 || i > n_enc {
                    return Err(Error::Parse(format!("layer index {i} outside [1,{n_enc}]")));
                }
                if kinds[i - 1] != LayerKind::Shared {
                    return Err(Error::Parse(format!("layer {i} is listed twice")));
                }
                kinds[i - 1] = kind;
            }
        }
        Ok(Self { encoder_kinds: kinds, decoder_mode })
    }

    /// `k/2` source LSLs at the bottom and `k/2` target LSLs at the top.
    pub fn symmetric(n_enc: usize, decoder_mode: DecoderMode, k: usize) -> Result<Self> {
        if k % 2 != 0 || k > n_enc {
            return Err(Error::Config(format!("LSL count {k} must be even and at most {n_enc}")));
        }
        let half = k / 2;
        let src: Vec<usize> = (1..=half).collect();
        let tgt: Vec<usize> = (n_enc - half + 1..=n_enc).collect();
        Self::with_placement(n_enc, decoder_mode, &src, &tgt)
    }

    pub fn n_enc(&self) -> usize {
        self.encoder_kinds.len()
    }

    fn positions(&self, kind: LayerKind) -> Vec<usize> {
        self.encoder_kinds
            .iter()
            .enumerate()
            .filter(|(_, k)| **k == kind)
            .map(|(i, _)| i + 1)
            .collect()
    }

    pub fn src_layers(&self) -> Vec<usize> {
        self.positions(LayerKind::LslSrc)
    }

    pub fn tgt_layers(&self) -> Vec<usize> {
        self.positions(LayerKind::LslTgt)
    }

    pub fn mixed_layers(&self) -> Vec<usize> {
        self.positions(LayerKind::MixedSearch)
    }

    pub fn is_search(&self) -> bool {
        !self.encoder_kinds.is_empty() && self.encoder_kinds.iter().all(|k| *k == LayerKind::MixedSearch)
    }

    pub fn n_banks(&self) -> usize {
        self.encoder_kinds.iter().filter(|k| matches!(k, LayerKind::LslSrc | LayerKind::LslTgt)).count()
    }

    pub fn validate(&self) -> Result<()> {
        if self.encoder_kinds.is_empty() {
            return Err(Error::Config("encoder needs at least one layer".into()));
        }
        let mixed = self.encoder_kinds.contains(&LayerKind::MixedSearch);
        if mixed && self.n_banks() > 0 {
            return Err(Error::Config("search layers cannot be combined with fixed LSLs".into()));
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut enc = None;
        let mut dec = None;
        let mut src = Vec::new();
        let mut tgt = Vec::new();
        let mut mixed = Vec::new();
        for tok in text.split_whitespace() {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value in architecture, got `{tok}`")))?;
            match k {
                "enc" => enc = Some(v.parse::<usize>().map_err(|_| Error::Parse(format!("bad enc `{v}`")))?),
                "dec" => dec = Some(v.parse::<DecoderMode>()?),
                "src" => src = parse_index_list(v)?,
                "tgt" => tgt = parse_index_list(v)?,
                "mixed" => mixed = parse_index_list(v)?,
                other => return Err(Error::Parse(format!("unknown architecture key `{other}`"))),
            }
        }
        let n = enc.ok_or_else(|| Error::Parse("architecture needs enc=<N>".into()))?;
        let dec = dec.ok_or_else(|| Error::Parse("architecture needs dec=<shared|separate>".into()))?;
        if n == 0 {
            return Err(Error::Parse("enc must be positive".into()));
        }
        let mut spec = Self::with_placement(n, dec, &src, &tgt)?;
        for i in mixed {
            if i == 0 || i > n {
                return Err(Error::Parse(format!("layer index {i} outside [1,{n}]")));
            }
            if spec.encoder_kinds[i - 1] != LayerKind::Shared {
                return Err(Error::Parse(format!("layer {i} is listed twice")));
            }
            spec.encoder_kinds[i - 1] = LayerKind::MixedSearch;
        }
        spec.validate().map_err(|e| Error::Parse(e.to_string()))?;
        Ok(spec)
    }
}

impl fmt::Display for ArchitectureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "enc={} dec={} src={} tgt={}",
            self.n_enc(),
            self.decoder_mode.keyword(),
            render_index_list(&self.src_layers()),
            render_index_list(&self.tgt_layers())
        )?;
        let mixed = self.mixed_layers();
        if !mixed.is_empty() {
            write!(f, " mixed={}", render_index_list(&mixed))?;
        }
        Ok(())
    }
}

impl FromStr for ArchitectureSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

/// Everything needed to build a model.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelConfig {
    pub arch: ArchitectureSpec,
    pub dims: ModelDims,
    pub languages: Vec<LanguageId>,
}

impl ModelConfig {
    pub fn new(arch: ArchitectureSpec, mut dims: ModelDims, languages: Vec<LanguageId>) -> Result<Self> {
        dims.n_enc_layers = arch.n_enc();
        let cfg = Self { arch, dims, languages: language_set(languages) };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.dims.validate()?;
        self.arch.validate()?;
        if self.dims.n_enc_layers != self.arch.n_enc() {
            return Err(Error::Config(format!(
                "n_enc_layers {} disagrees with architecture depth {}",
                self.dims.n_enc_layers,
                self.arch.n_enc()
            )));
        }
        if self.languages.len() < 2 {
            return Err(Error::Config("at least two languages are required".into()));
        }
        Ok(())
    }

    pub fn with_arch(&self, arch: ArchitectureSpec) -> Result<Self> {
        Self::new(arch, self.dims, self.languages.clone())
    }

    pub fn to_kv(&self) -> KvMap {
        let mut kv = KvMap::new();
        kv.set("arch", &self.arch);
        kv.set("d_model", self.dims.d_model);
        kv.set("d_ffn", self.dims.d_ffn);
        kv.set("n_heads", self.dims.n_heads);
        kv.set("n_dec_layers", self.dims.n_dec_layers);
        kv.set("vocab_size", self.dims.vocab_size);
        let langs: Vec<&str> = self.languages.iter().map(|l| l.as_str()).collect();
        kv.set("languages", langs.join(","));
        kv
    }

    pub fn from_kv(kv: &KvMap) -> Result<Self> {
        let arch = ArchitectureSpec::parse(kv.require_str("arch")?)?;
        let dims = ModelDims {
            d_model: kv.require("d_model")?,
            d_ffn: kv.require("d_ffn")?,
            n_heads: kv.require("n_heads")?,
            n_enc_layers: arch.n_enc(),
            n_dec_layers: kv.require("n_dec_layers")?,
            vocab_size: kv.require("vocab_size")?,
        };
        let languages = kv
            .require_str("languages")?
            .split(',')
            .map(LanguageId::new)
            .collect::<Result<Vec<_>>>()?;
        Self::new(arch, dims, languages)
    }

    pub fn render(&self) -> String {
        self.to_kv().render()
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_kv(&KvMap::parse(text)?)
    }
}
