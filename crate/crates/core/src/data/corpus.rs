use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::directions::{all_directions, direction_filter, Direction, DirectionMode, DirectionSplit};
use crate::data::language::{generate_pair, make_language, ExamplePair, SyntheticLanguage};
use crate::data::sampling::temperature_sample;
use crate::data::vocab::{parse_symbol, symbol_text, Vocab};
use crate::error::{Error, Result};
use crate::kv::KvMap;
use crate::lsl::{LanguageId, Quality};

/// Everything that determines a generated corpus.
#[derive(Clone, Debug, PartialEq)]
pub struct CorpusSpec {
    pub seed: u64,
    pub n_languages: usize,
    pub n_families: usize,
    pub alphabet_size: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Clean training pairs per direction before rebalancing.
    pub hq_pairs: usize,
    /// Noisy training pairs per direction before rebalancing.
    pub lq_pairs: usize,
    pub lq_noise: f64,
    pub temperature: f64,
    pub cap: f64,
    pub valid_pairs: usize,
    pub test_pairs: usize,
    pub direction_mode: DirectionMode,
    pub center: usize,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            seed: 1,
            n_languages: 4,
            n_families: 2,
            alphabet_size: 64,
            min_len: 4,
            max_len: 12,
            hq_pairs: 2000,
            lq_pairs: 20000,
            lq_noise: 0.1,
            temperature: 5.0,
            cap: 10.0,
            valid_pairs: 100,
            test_pairs: 100,
            direction_mode: DirectionMode::Full,
            center: 0,
        }
    }
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.into()));
        if self.n_languages < 2 {
            return fail("need at least two languages");
        }
        if self.n_families == 0 || self.n_families > self.n_languages {
            return fail("n_families must be in 1..=n_languages");
        }
        if self.alphabet_size < 2 {
            return fail("alphabet needs at least two symbols");
        }
        if self.min_len == 0 || self.min_len > self.max_len {
            return fail("need 1 <= min_len <= max_len");
        }
        if !(0.0..1.0).contains(&self.lq_noise) {
            return fail("lq_noise must be in [0, 1)");
        }
        if self.center >= self.n_languages {
            return fail("center language index out of range");
        }
        if self.hq_pairs + self.lq_pairs == 0 {
            return fail("no training pairs requested");
        }
        if !(self.temperature >= 1.0) || !(self.cap >= 1.0) {
            return fail("need temperature >= 1 and cap >= 1");
        }
        Ok(())
    }

    pub fn language_ids(&self) -> Vec<LanguageId> {
        (0..self.n_languages).map(|i| LanguageId::new(format!("syn{i}")).expect("valid code")).collect()
    }

    /// Contiguous blocks: with 4 languages and 2 families, syn0/syn1 form
    /// family 0 and syn2/syn3 family 1.
    pub fn family_of(&self, index: usize) -> usize {
        index * self.n_families / self.n_languages
    }

    pub fn families(&self) -> Vec<(LanguageId, usize)> {
        self.language_ids().into_iter().enumerate().map(|(i, l)| (l, self.family_of(i))).collect()
    }

    pub fn languages(&self) -> Result<Vec<SyntheticLanguage>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        self.language_ids()
            .into_iter()
            .enumerate()
            .map(|(i, id)| make_language(id, rng.gen(), self.family_of(i), self.alphabet_size))
            .collect()
    }

    pub fn split(&self) -> Result<DirectionSplit> {
        let ids = self.language_ids();
        direction_filter(&self.families(), self.direction_mode, &ids[self.center])
    }

    pub fn vocab(&self) -> Result<Vocab> {
        Vocab::new(&self.language_ids(), self.alphabet_size)
    }

    pub fn to_kv(&self) -> KvMap {
        let mut kv = KvMap::new();
        kv.set("seed", self.seed);
        kv.set("n_languages", self.n_languages);
        kv.set("n_families", self.n_families);
        kv.set("alphabet_size", self.alphabet_size);
        kv.set("min_len", self.min_len);
        kv.set("max_len", self.max_len);
        kv.set("hq_pairs", self.hq_pairs);
        kv.set("lq_pairs", self.lq_pairs);
        kv.set("lq_noise", self.lq_noise);
        kv.set("temperature", self.temperature);
        kv.set("cap", self.cap);
        kv.set("valid_pairs", self.valid_pairs);
        kv.set("test_pairs", self.test_pairs);
        kv.set("direction_mode", self.direction_mode);
        kv.set("center", self.center);
        kv
    }

    /// Missing keys fall back to the defaults.
    pub fn from_kv(kv: &KvMap) -> Result<Self> {
        let d = Self::default();
        let spec = Self {
            seed: kv.get_or("seed", d.seed)?,
            n_languages: kv.get_or("n_languages", d.n_languages)?,
            n_families: kv.get_or("n_families", d.n_families)?,
            alphabet_size: kv.get_or("alphabet_size", d.alphabet_size)?,
            min_len: kv.get_or("min_len", d.min_len)?,
            max_len: kv.get_or("max_len", d.max_len)?,
            hq_pairs: kv.get_or("hq_pairs", d.hq_pairs)?,
            lq_pairs: kv.get_or("lq_pairs", d.lq_pairs)?,
            lq_noise: kv.get_or("lq_noise", d.lq_noise)?,
            temperature: kv.get_or("temperature", d.temperature)?,
            cap: kv.get_or("cap", d.cap)?,
            valid_pairs: kv.get_or("valid_pairs", d.valid_pairs)?,
            test_pairs: kv.get_or("test_pairs", d.test_pairs)?,
            direction_mode: kv.get_or("direction_mode", d.direction_mode)?,
            center: kv.get_or("center", d.center)?,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn render(&self) -> String {
        self.to_kv().render()
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_kv(&KvMap::parse(text)?)
    }
}

/// An ordered list of pairs plus its text form.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Corpus {
    pub pairs: Vec<ExamplePair>,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Pairs grouped by direction, preserving corpus order within a group.
    pub fn by_direction(&self) -> BTreeMap<Direction, Vec<&ExamplePair>> {
        let mut map: BTreeMap<Direction, Vec<&ExamplePair>> = BTreeMap::new();
        for p in &self.pairs {
            map.entry((p.ctx.src.clone(), p.ctx.tgt.clone())).or_default().push(p);
        }
        map
    }

    pub fn render_tsv(&self, alphabet_size: usize) -> String {
        let text = |s: &[usize]| s.iter().map(|&i| symbol_text(i, alphabet_size)).collect::<Vec<_>>().join(" ");
        let mut out = String::new();
        for p in &self.pairs {
            let _ = writeln!(out, "{}\t{}\t{}\t{}\t{}", text(&p.src), text(&p.tgt), p.ctx.src, p.ctx.tgt, p.ctx.quality.tag());
        }
        out
    }

    pub fn parse_tsv(text: &str, alphabet_size: usize) -> Result<Self> {
        let mut pairs = Vec::new();
        for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.is_empty()) {
            let bad = |m: &str| Error::Data(format!("line {}: {m}", n + 1));
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 5 {
                return Err(bad("expected 5 tab-separated columns"));
            }
            let symbols = |s: &str| -> Result<Vec<usize>> {
                let v = s
                    .split_whitespace()
                    .map(|t| parse_symbol(t, alphabet_size).ok_or_else(|| bad(&format!("unknown symbol `{t}`"))))
                    .collect::<Result<Vec<_>>>()?;
                if v.is_empty() {
                    return Err(bad("empty sentence"));
                }
                Ok(v)
            };
            pairs.push(ExamplePair {
                src: symbols(cols[0])?,
                tgt: symbols(cols[1])?,
                ctx: crate::lsl::RoutingContext {
                    src: LanguageId::new(cols[2])?,
                    tgt: LanguageId::new(cols[3])?,
                    quality: cols[4].parse::<Quality>()?,
                },
            });
        }
        Ok(Self { pairs })
    }
}

/// Training, validation and test splits of one generated corpus.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratedCorpus {
    pub spec: CorpusSpec,
    pub train: Corpus,
    pub valid: Corpus,
    pub test: Corpus,
}

const SPEC_FILE: &str = "corpus.cfg";
const SPLITS: [&str; 3] = ["train", "valid", "test"];

impl GeneratedCorpus {
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(SPEC_FILE), self.spec.render())?;
        for (name, c) in SPLITS.iter().zip([&self.train, &self.valid, &self.test]) {
            fs::write(dir.join(format!("{name}.tsv")), c.render_tsv(self.spec.alphabet_size))?;
        }
        Ok(())
    }

    pub fn read_dir(dir: &Path) -> Result<Self> {
        let read = |name: &str| {
            fs::read_to_string(dir.join(name))
                .map_err(|e| Error::Data(format!("cannot read {}: {e}", dir.join(name).display())))
        };
        let spec = CorpusSpec::parse(&read(SPEC_FILE)?)?;
        let mut splits = SPLITS
            .iter()
            .map(|s| Corpus::parse_tsv(&read(&format!("{s}.tsv"))?, spec.alphabet_size))
            .collect::<Result<Vec<_>>>()?;
        let test = splits.pop().expect("three splits");
        let valid = splits.pop().expect("three splits");
        let train = splits.pop().expect("three splits");
        Ok(Self { spec, train, valid, test })
    }
}

fn pivot<R: Rng>(spec: &CorpusSpec, rng: &mut R) -> Vec<usize> {
    let len = rng.gen_range(spec.min_len..=spec.max_len);
    (0..len).map(|_| rng.gen_range(0..spec.alphabet_size)).collect()
}

fn stream_rng(seed: u64, split: u64, direction: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((split << 32) | direction as u64);
    rng
}

/// A pure function of the spec. Training pairs cover the training directions
/// only; validation and test pairs are clean and cover every direction.
pub fn generate_corpus(spec: &CorpusSpec) -> Result<GeneratedCorpus> {
    spec.validate()?;
    let langs = spec.languages()?;
    let split = spec.split()?;
    let ids: Vec<LanguageId> = langs.iter().map(|l| l.id.clone()).collect();
    let by_id = |l: &LanguageId| &langs[ids.iter().position(|x| x == l).expect("known language")];
    let realized = temperature_sample(&[spec.hq_pairs, spec.lq_pairs], spec.temperature, spec.cap)?;

    let mut train = Corpus::default();
    let mut valid = Corpus::default();
    let mut test = Corpus::default();
    for (d, dir) in all_directions(&ids).iter().enumerate() {
        let (s, t) = (by_id(&dir.0), by_id(&dir.1));
        if split.train.contains(dir) {
            let mut rng = stream_rng(spec.seed, 1, d);
            for (n, keep, noise, quality) in [
                (spec.hq_pairs, realized[0], 0.0, Quality::High),
                (spec.lq_pairs, realized[1], spec.lq_noise, Quality::Low),
            ] {
                let mut pool = Vec::with_capacity(n);
                for _ in 0..n {
                    let mut p = generate_pair(s, t, &pivot(spec, &mut rng), noise, &mut rng)?;
                    p.ctx.quality = quality;
                    pool.push(p);
                }
                let mut chosen = sample(&mut rng, n, keep).into_vec();
                chosen.sort_unstable();
                train.pairs.extend(chosen.into_iter().map(|i| pool[i].clone()));
            }
        }
        for (split_id, count, out) in [(2, spec.valid_pairs, &mut valid), (3, spec.test_pairs, &mut test)] {
            let mut rng = stream_rng(spec.seed, split_id, d);
            for _ in 0..count {
                out.pairs.push(generate_pair(s, t, &pivot(spec, &mut rng), 0.0, &mut rng)?);
            }
        }
    }
    Ok(GeneratedCorpus { spec: spec.clone(), train, valid, test })
}
