use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::data::vocab::symbol_text;
use crate::data::{Corpus, Direction, DirectionSplit};
use crate::error::{Error, Result};
use crate::eval::chrf::{corpus_chrf, ChrfConfig};
use crate::eval::decode::Translator;
use crate::lsl::LanguageId;

/// Hypotheses and references of one direction.
#[derive(Clone, Debug, PartialEq)]
pub struct DirectionOutputs {
    pub direction: Direction,
    pub hyps: Vec<String>,
    pub refs: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DirectionScore {
    pub src: LanguageId,
    pub tgt: LanguageId,
    pub chrf: f64,
    pub n: usize,
}

/// Macro averages over directions.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MatrixSummary {
    pub overall: Option<f64>,
    /// Averages over directions leaving each language.
    pub from_source: BTreeMap<LanguageId, f64>,
    /// Averages over directions entering each language.
    pub into_target: BTreeMap<LanguageId, f64>,
    /// Keyed by (source family, target family).
    pub by_family: BTreeMap<(usize, usize), f64>,
    pub supervised: Option<f64>,
    pub zero_shot: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatrixReport {
    pub scores: Vec<DirectionScore>,
    pub outputs: Vec<DirectionOutputs>,
    /// Requested directions without test data.
    pub absent: Vec<Direction>,
    pub summary: MatrixSummary,
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (mut s, mut n) = (0.0, 0usize);
    for v in values {
        s += v;
        n += 1;
    }
    (n > 0).then(|| s / n as f64)
}

fn grouped<K: Ord>(items: impl IntoIterator<Item = (K, f64)>) -> BTreeMap<K, f64> {
    let mut acc: BTreeMap<K, Vec<f64>> = BTreeMap::new();
    for (k, v) in items {
        acc.entry(k).or_default().push(v);
    }
    acc.into_iter().filter_map(|(k, v)| mean(v).map(|m| (k, m))).collect()
}

pub fn summarize(scores: &[DirectionScore], families: &[(LanguageId, usize)], split: Option<&DirectionSplit>) -> MatrixSummary {
    let family = |l: &LanguageId| families.iter().find(|(id, _)| id == l).map(|&(_, f)| f);
    let is_zero_shot = |s: &DirectionScore| split.is_some_and(|sp| sp.is_zero_shot(&(s.src.clone(), s.tgt.clone())));
    MatrixSummary {
        overall: mean(scores.iter().map(|s| s.chrf)),
        from_source: grouped(scores.iter().map(|s| (s.src.clone(), s.chrf))),
        into_target: grouped(scores.iter().map(|s| (s.tgt.clone(), s.chrf))),
        by_family: grouped(scores.iter().filter_map(|s| Some(((family(&s.src)?, family(&s.tgt)?), s.chrf)))),
        supervised: split.and_then(|_| mean(scores.iter().filter(|s| !is_zero_shot(s)).map(|s| s.chrf))),
        zero_shot: split.and_then(|_| mean(scores.iter().filter(|s| is_zero_shot(s)).map(|s| s.chrf))),
    }
}

pub fn score_outputs(outputs: &[DirectionOutputs], cfg: &ChrfConfig) -> Result<Vec<DirectionScore>> {
    outputs
        .iter()
        .map(|o| {
            Ok(DirectionScore {
                src: o.direction.0.clone(),
                tgt: o.direction.1.clone(),
                chrf: corpus_chrf(&o.hyps, &o.refs, cfg)?,
                n: o.refs.len(),
            })
        })
        .collect()
}

pub fn render_symbols(symbols: &[usize], alphabet_size: usize) -> String {
    symbols.iter().map(|&s| symbol_text(s, alphabet_size)).collect::<Vec<_>>().join(" ")
}

/// Translates every test sentence of the requested directions once and
/// scores each direction with corpus-level chrF.
pub fn evaluate_matrix<T: Translator>(
    translator: &mut T,
    test: &Corpus,
    alphabet_size: usize,
    directions: &[Direction],
    families: &[(LanguageId, usize)],
    split: Option<&DirectionSplit>,
    cfg: &ChrfConfig,
) -> Result<MatrixReport> {
    let groups = test.by_direction();
    let mut outputs = Vec::new();
    let mut absent = Vec::new();
    for dir in directions {
        let Some(pairs) = groups.get(dir) else {
            absent.push(dir.clone());
            continue;
        };
        let mut out = DirectionOutputs { direction: dir.clone(), hyps: Vec::new(), refs: Vec::new() };
        for p in pairs {
            out.hyps.push(translator.translate(&p.src, &p.ctx)?);
            out.refs.push(render_symbols(&p.tgt, alphabet_size));
        }
        outputs.push(out);
    }
    let scores = score_outputs(&outputs, cfg)?;
    let summary = summarize(&scores, families, split);
    Ok(MatrixReport { scores, outputs, absent, summary })
}

impl MatrixReport {
    /// `src \t tgt \t chrf \t n`, one row per evaluated direction.
    pub fn scores_tsv(&self) -> String {
        let mut out = String::new();
        for s in &self.scores {
            let _ = writeln!(out, "{}\t{}\t{:.4}\t{}", s.src, s.tgt, s.chrf, s.n);
        }
        out
    }

    /// Source-by-target grid followed by machine-readable aggregate lines.
    pub fn summary_text(&self) -> String {
        let mut langs: Vec<&LanguageId> = self.scores.iter().flat_map(|s| [&s.src, &s.tgt]).collect();
        langs.sort();
        langs.dedup();
        let cell = |s: &LanguageId, t: &LanguageId| {
            self.scores.iter().find(|x| &x.src == s && &x.tgt == t).map(|x| format!("{:.1}", x.chrf))
        };
        let s = &self.summary;
        let mut out = String::from("src\\tgt");
        for t in &langs {
            let _ = write!(out, "\t{t}");
        }
        out.push_str("\tfrom\n");
        for src in &langs {
            let _ = write!(out, "{src}");
            for t in &langs {
                let _ = write!(out, "\t{}", cell(src, t).unwrap_or_else(|| "-".into()));
            }
            let _ = writeln!(out, "\t{}", s.from_source.get(*src).map_or("-".into(), |v| format!("{v:.1}")));
        }
        out.push_str("into");
        for t in &langs {
            let _ = write!(out, "\t{}", s.into_target.get(*t).map_or("-".into(), |v| format!("{v:.1}")));
        }
        out.push_str("\n\n");
        let opt = |v: Option<f64>| v.map_or("-".into(), |v| format!("{v:.4}"));
        let _ = writeln!(out, "overall\t{}", opt(s.overall));
        let _ = writeln!(out, "supervised\t{}", opt(s.supervised));
        let _ = writeln!(out, "zero_shot\t{}", opt(s.zero_shot));
        for (l, v) in &s.from_source {
            let _ = writeln!(out, "from\t{l}\t{v:.4}");
        }
        for (l, v) in &s.into_target {
            let _ = writeln!(out, "into\t{l}\t{v:.4}");
        }
        for ((a, b), v) in &s.by_family {
            let _ = writeln!(out, "family\t{a}\t{b}\t{v:.4}");
        }
        for (a, b) in &self.absent {
            let _ = writeln!(out, "absent\t{a}\t{b}");
        }
        out
    }
}

/// Parses a scores table written by [`MatrixReport::scores_tsv`].
pub fn parse_scores_tsv(text: &str) -> Result<Vec<DirectionScore>> {
    text.lines()
        .filter(|l| !l.is_empty())
        .map(|line| {
            let c: Vec<&str> = line.split('\t').collect();
            let bad = || Error::Parse(format!("bad score line `{line}`"));
            if c.len() != 4 {
                return Err(bad());
            }
            Ok(DirectionScore {
                src: LanguageId::new(c[0])?,
                tgt: LanguageId::new(c[1])?,
                chrf: c[2].parse().map_err(|_| bad())?,
                n: c[3].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}
