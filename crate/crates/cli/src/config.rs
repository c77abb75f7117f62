//! One line-oriented experiment file with `section.key=value` entries.
//!
//! Sections are `corpus`, `model`, `train`, `search` and `eval`. Missing keys
//! take their defaults; unknown keys are rejected.

use std::fs;
use std::path::Path;

use lsl_core::arch::{ArchitectureSpec, DecoderMode, ModelConfig};
use lsl_core::data::CorpusSpec;
use lsl_core::kv::KvMap;
use lsl_core::layers::ModelDims;
use lsl_core::train::TrainConfig;
use lsl_core::{Error, Result};

/// Model dimensions without the vocabulary and language list, which come
/// from the corpus.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelShape {
    pub d_model: usize,
    pub d_ffn: usize,
    pub n_heads: usize,
    pub n_enc_layers: usize,
    pub n_dec_layers: usize,
    pub decoder_mode: DecoderMode,
}

impl Default for ModelShape {
    fn default() -> Self {
        Self { d_model: 16, d_ffn: 32, n_heads: 2, n_enc_layers: 4, n_dec_layers: 2, decoder_mode: DecoderMode::PerTarget }
    }
}

impl ModelShape {
    fn to_kv(&self) -> KvMap {
        let mut kv = KvMap::new();
        kv.set("d_model", self.d_model);
        kv.set("d_ffn", self.d_ffn);
        kv.set("n_heads", self.n_heads);
        kv.set("n_enc_layers", self.n_enc_layers);
        kv.set("n_dec_layers", self.n_dec_layers);
        kv.set("decoder", self.decoder_mode);
        kv
    }

    fn from_kv(kv: &KvMap) -> Result<Self> {
        let d = Self::default();
        Ok(Self {
            d_model: kv.get_or("d_model", d.d_model)?,
            d_ffn: kv.get_or("d_ffn", d.d_ffn)?,
            n_heads: kv.get_or("n_heads", d.n_heads)?,
            n_enc_layers: kv.get_or("n_enc_layers", d.n_enc_layers)?,
            n_dec_layers: kv.get_or("n_dec_layers", d.n_dec_layers)?,
            decoder_mode: kv.get_or("decoder", d.decoder_mode)?,
        })
    }

    /// Full model config for `arch` over the corpus' languages and vocabulary.
    pub fn model_config(&self, arch: ArchitectureSpec, corpus: &CorpusSpec) -> Result<ModelConfig> {
        if arch.n_enc() != self.n_enc_layers {
            return Err(Error::Config(format!(
                "architecture has {} encoder layers, config says {}",
                arch.n_enc(),
                self.n_enc_layers
            )));
        }
        let dims = ModelDims {
            d_model: self.d_model,
            d_ffn: self.d_ffn,
            n_heads: self.n_heads,
            n_enc_layers: self.n_enc_layers,
            n_dec_layers: self.n_dec_layers,
            vocab_size: corpus.vocab()?.len(),
        };
        ModelConfig::new(arch, dims, corpus.language_ids())
    }

    pub fn baseline(&self) -> ArchitectureSpec {
        ArchitectureSpec::baseline(self.n_enc_layers, self.decoder_mode)
    }

    pub fn search(&self) -> ArchitectureSpec {
        ArchitectureSpec::search(self.n_enc_layers, self.decoder_mode)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchSettings {
    pub n_runs: usize,
    /// Steps per search run; the other optimizer settings come from `train`.
    pub max_steps: u64,
}

impl Default for SearchSettings {
    fn default() -> Self {
        Self { n_runs: 3, max_steps: 1500 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalSettings {
    pub max_len: usize,
    pub bootstrap_resamples: usize,
    pub bootstrap_seed: u64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self { max_len: 32, bootstrap_resamples: 1000, bootstrap_seed: 1 }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExperimentConfig {
    pub corpus: CorpusSpec,
    pub model: ModelShape,
    pub train: TrainConfig,
    pub search: SearchSettings,
    pub eval: EvalSettings,
}

const SECTIONS: [&str; 5] = ["corpus", "model", "train", "search", "eval"];

fn section(kv: &KvMap, name: &str) -> KvMap {
    let mut out = KvMap::new();
    let prefix = format!("{name}.");
    for k in kv.keys() {
        if let Some(rest) = k.strip_prefix(&prefix) {
            out.set(rest, kv.get_str(k).unwrap_or_default());
        }
    }
    out
}

impl ExperimentConfig {
    pub fn to_kv(&self) -> KvMap {
        let mut search = KvMap::new();
        search.set("n_runs", self.search.n_runs);
        search.set("max_steps", self.search.max_steps);
        let mut eval = KvMap::new();
        eval.set("max_len", self.eval.max_len);
        eval.set("bootstrap_resamples", self.eval.bootstrap_resamples);
        eval.set("bootstrap_seed", self.eval.bootstrap_seed);
        let mut kv = KvMap::new();
        for (name, part) in SECTIONS.iter().zip([self.corpus.to_kv(), self.model.to_kv(), self.train.to_kv(), search, eval]) {
            for k in part.keys() {
                kv.set(&format!("{name}.{k}"), part.get_str(k).unwrap_or_default());
            }
        }
        kv
    }

    pub fn from_kv(kv: &KvMap) -> Result<Self> {
        let known = Self::default().to_kv();
        if let Some(k) = kv.keys().find(|k| known.get_str(k).is_none()) {
            return Err(Error::Config(format!("unknown config key `{k}`")));
        }
        let (s, e) = (section(kv, "search"), section(kv, "eval"));
        let (ds, de) = (SearchSettings::default(), EvalSettings::default());
        let cfg = Self {
            corpus: CorpusSpec::from_kv(&section(kv, "corpus"))?,
            model: ModelShape::from_kv(&section(kv, "model"))?,
            train: TrainConfig::from_kv(&section(kv, "train"))?,
            search: SearchSettings { n_runs: s.get_or("n_runs", ds.n_runs)?, max_steps: s.get_or("max_steps", ds.max_steps)? },
            eval: EvalSettings {
                max_len: e.get_or("max_len", de.max_len)?,
                bootstrap_resamples: e.get_or("bootstrap_resamples", de.bootstrap_resamples)?,
                bootstrap_seed: e.get_or("bootstrap_seed", de.bootstrap_seed)?,
            },
        };
        if cfg.search.n_runs == 0 || cfg.eval.max_len == 0 || cfg.eval.bootstrap_resamples == 0 {
            return Err(Error::Config("search.n_runs, eval.max_len and eval.bootstrap_resamples must be positive".into()));
        }
        Ok(cfg)
    }

    pub fn render(&self) -> String {
        self.to_kv().render()
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_kv(&KvMap::parse(text)?)
    }

    /// Reads `path` (or starts from defaults) and applies `key=value`
    /// overrides in order.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut kv = match path {
            Some(p) => KvMap::parse(
                &fs::read_to_string(p).map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?,
            )?,
            None => KvMap::new(),
        };
        kv.merge(&parse_overrides(overrides)?);
        Self::from_kv(&kv)
    }
}

pub fn parse_overrides(overrides: &[String]) -> Result<KvMap> {
    let mut kv = KvMap::new();
    for o in overrides {
        let (k, v) = o.split_once('=').ok_or_else(|| Error::Config(format!("override `{o}` is not key=value")))?;
        kv.set(k.trim(), v.trim());
    }
    Ok(kv)
}

/// An architecture spec as one `key=value` per line.
pub fn render_arch_file(spec: &ArchitectureSpec) -> String {
    spec.to_string().split(' ').map(|p| format!("{p}\n")).collect()
}

pub fn parse_arch_file(text: &str) -> Result<ArchitectureSpec> {
    let parts: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).collect();
    ArchitectureSpec::parse(&parts.join(" "))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::parse(&cfg.render()).unwrap(), cfg);
        assert_eq!(ExperimentConfig::parse("").unwrap(), cfg);
    }

    #[test]
    fn overrides_and_unknown_keys() {
        let cfg = ExperimentConfig::load(None, &["train.max_steps=7".into(), "model.decoder=shared".into()]).unwrap();
        assert_eq!((cfg.train.max_steps, cfg.model.decoder_mode), (7, DecoderMode::Shared));
        assert!(ExperimentConfig::parse("train.max_step=7").is_err());
        assert!(ExperimentConfig::parse("search.n_runs=0").is_err());
        assert!(parse_overrides(&["nokey".into()]).is_err());
    }

    #[test]
    fn arch_file_round_trip() {
        let spec = ArchitectureSpec::parse("enc=16 dec=separate src=[3,4] tgt=[13,14,15]").unwrap();
        let text = render_arch_file(&spec);
        assert_eq!(text.lines().count(), 4);
        assert_eq!(parse_arch_file(&text).unwrap(), spec);
    }
}
