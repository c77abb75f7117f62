use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use lsl_core::arch::{
    average_weights, count_params, count_params_symbolic, dense_pretrain_init, select_architecture, ArchitectureSpec,
    MixingRunResult, Model, ModelConfig, ParamReport,
};
use lsl_core::data::{all_directions, generate_corpus, Corpus, Direction, DirectionSplit, GeneratedCorpus, Vocab};
use lsl_core::eval::{evaluate_matrix, paired_bootstrap, ChrfConfig, MatrixReport, ModelTranslator};
use lsl_core::layers::ModelDims;
use lsl_core::train::{
    corpus_loss, load_checkpoint, save_checkpoint, train_loop, LogRecord, TrainData, TrainMode,
};
use lsl_core::{Error, Result};

use crate::config::{render_arch_file, ExperimentConfig};
use crate::manifest::{content_hash, file_bytes, RunDir, RunManifest};

/// A run directory plus the resolved experiment config every command reads.
#[derive(Clone, Debug)]
pub struct Session {
    pub run: RunDir,
    pub config: ExperimentConfig,
    pub config_path: Option<PathBuf>,
}

impl Session {
    /// Loads `config_path` if given, otherwise the config saved in the run
    /// directory (or defaults for a fresh run), then applies `overrides`.
    pub fn open(run: RunDir, config_path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let saved = run.config();
        let source = match config_path {
            Some(p) => Some(p.to_path_buf()),
            None if saved.exists() => Some(saved),
            None => None,
        };
        let config = ExperimentConfig::load(source.as_deref(), overrides)?;
        Ok(Self { run, config, config_path: source })
    }

    fn manifest(&self, command: String, seed: u64, inputs: &[&[u8]]) -> Result<()> {
        let m = RunManifest {
            command,
            config: self.config_path.clone(),
            seed,
            input_hash: content_hash(inputs.iter().copied()),
            output_dir: self.run.root.clone(),
        };
        m.record(&self.run)
    }

    /// The corpus on disk, which must come from the current corpus config.
    pub fn corpus(&self) -> Result<GeneratedCorpus> {
        let c = GeneratedCorpus::read_dir(&self.run.corpus())?;
        if c.spec != self.config.corpus {
            return Err(Error::Config(format!(
                "corpus in {} was generated from a different corpus config",
                self.run.corpus().display()
            )));
        }
        Ok(c)
    }

    fn corpus_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        for f in ["corpus.cfg", "train.tsv", "valid.tsv", "test.tsv"] {
            out.extend(file_bytes(&self.run.corpus().join(f))?);
        }
        Ok(out)
    }

    pub fn model_config(&self, arch: ArchitectureSpec) -> Result<ModelConfig> {
        self.config.model.model_config(arch, &self.config.corpus)
    }
}

fn check_name(name: &str) -> Result<()> {
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || "_-.".contains(c)) {
        return Err(Error::Config(format!("model name `{name}` must be non-empty [A-Za-z0-9_.-]")));
    }
    Ok(())
}

fn log_text(records: &[LogRecord], n_mixed: usize) -> String {
    let mut out = String::from("# step\tloss\tlr");
    for i in 1..=n_mixed {
        let _ = write!(out, "\tw{i}_shared\tw{i}_src\tw{i}_tgt");
    }
    out.push('\n');
    for r in records {
        let _ = writeln!(out, "{r}");
    }
    out
}

fn weights_table(weights: &[[f64; 3]]) -> String {
    let mut out = String::from("# layer\tshared\tsrc\ttgt\n");
    for (i, w) in weights.iter().enumerate() {
        let _ = writeln!(out, "{}\t{:e}\t{:e}\t{:e}", i + 1, w[0], w[1], w[2]);
    }
    out
}

/// Parses a table written for averaged weights.
pub fn parse_weights_table(text: &str) -> Result<Vec<[f64; 3]>> {
    text.lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|l| {
            let c: Vec<&str> = l.split('\t').collect();
            let bad = || Error::Parse(format!("bad weights line `{l}`"));
            if c.len() != 4 {
                return Err(bad());
            }
            let mut w = [0.0; 3];
            for (slot, v) in w.iter_mut().zip(&c[1..]) {
                *slot = v.parse().map_err(|_| bad())?;
            }
            Ok(w)
        })
        .collect()
}

/// Generates the corpus and saves the resolved config next to it.
pub fn cmd_gen(s: &Session) -> Result<GeneratedCorpus> {
    s.run.create()?;
    let text = s.config.render();
    s.manifest("gen".into(), s.config.corpus.seed, &[text.as_bytes()])?;
    fs::write(s.run.config(), &text)?;
    let corpus = generate_corpus(&s.config.corpus)?;
    corpus.write_dir(&s.run.corpus())?;
    Ok(corpus)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchOutcome {
    pub runs: Vec<MixingRunResult>,
    pub averaged: Vec<[f64; 3]>,
    pub spec: ArchitectureSpec,
}

/// Seeded search trainings of the all-mixed model, then argmax selection.
/// Run `i` uses seed `train.seed + i` for both initialization and batches.
pub fn cmd_search(s: &Session) -> Result<SearchOutcome> {
    let corpus = s.corpus()?;
    let vocab = corpus.spec.vocab()?;
    let data = TrainData::new(&corpus.train, &vocab)?;
    let model_cfg = s.model_config(s.config.model.search())?;
    s.manifest("search".into(), s.config.train.seed, &[s.config.render().as_bytes(), &s.corpus_bytes()?])?;
    s.run.create()?;
    let mut runs = Vec::new();
    for i in 0..s.config.search.n_runs {
        let mut tcfg = s.config.train.clone();
        tcfg.seed += i as u64;
        tcfg.max_steps = s.config.search.max_steps;
        let mut model = Model::<f64>::build(&model_cfg, tcfg.seed)?;
        let out = train_loop(&mut model, &data, &tcfg, TrainMode::Search, |_| {})?;
        let n = s.config.model.n_enc_layers;
        fs::write(s.run.logs().join(format!("search_{}.log", i + 1)), log_text(&out.log, n))?;
        let mixing = out.mixing.ok_or_else(|| Error::Contract("search run returned no mixing weights".into()))?;
        fs::write(s.run.reports().join(format!("mixing_run{}.txt", i + 1)), mixing.render())?;
        runs.push(mixing);
    }
    let averaged = average_weights(&runs)?;
    fs::write(s.run.reports().join("mixing_avg.tsv"), weights_table(&averaged))?;
    let spec = select_architecture(&runs, s.config.model.decoder_mode)?;
    fs::write(s.run.reports().join("selected.arch"), render_arch_file(&spec))?;
    Ok(SearchOutcome { runs, averaged, spec })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub name: String,
    pub arch: ArchitectureSpec,
    pub steps: u64,
    pub final_loss: f64,
    /// Validation loss before the first update.
    pub init_valid_loss: f64,
    pub valid_loss: f64,
    pub checkpoint: PathBuf,
}

impl TrainReport {
    pub fn render(&self) -> String {
        format!(
            "name={}\narch={}\nsteps={}\nfinal_loss={}\ninit_valid_loss={}\nvalid_loss={}\ncheckpoint={}\n",
            self.name,
            self.arch,
            self.steps,
            self.final_loss,
            self.init_valid_loss,
            self.valid_loss,
            self.checkpoint.display()
        )
    }
}

/// Trains `arch` from scratch, or from a dense copy of `init_from`.
/// Search layouts train their gates jointly.
pub fn cmd_train(s: &Session, name: &str, arch: ArchitectureSpec, init_from: Option<&Path>) -> Result<TrainReport> {
    check_name(name)?;
    let corpus = s.corpus()?;
    let vocab = corpus.spec.vocab()?;
    let model_cfg = s.model_config(arch.clone())?;
    let init_bytes = init_from.map(file_bytes).transpose()?.unwrap_or_default();
    let arch_text = arch.to_string();
    s.manifest(
        format!("train:{name}"),
        s.config.train.seed,
        &[s.config.render().as_bytes(), arch_text.as_bytes(), &s.corpus_bytes()?, &init_bytes],
    )?;
    s.run.create()?;
    let mut model = Model::<f64>::build(&model_cfg, s.config.train.seed)?;
    if let Some(path) = init_from {
        let base: Model<f64> = load_checkpoint(path)?;
        dense_pretrain_init(&mut model, &base)?;
    }
    let data = TrainData::new(&corpus.train, &vocab)?;
    let valid = TrainData::new(&corpus.valid, &vocab)?;
    let bs = s.config.train.batch_size;
    let init_valid_loss = corpus_loss(&model, &valid, bs)?;
    let mode = if arch.is_search() { TrainMode::Search } else { TrainMode::Standard };
    let out = train_loop(&mut model, &data, &s.config.train, mode, |_| {})?;
    let valid_loss = corpus_loss(&model, &valid, bs)?;
    let checkpoint = s.run.checkpoint(name);
    save_checkpoint(&model, &checkpoint)?;
    fs::write(s.run.logs().join(format!("{name}.log")), log_text(&out.log, arch.mixed_layers().len()))?;
    if let Some(m) = &out.mixing {
        fs::write(s.run.reports().join(format!("{name}.mixing.txt")), m.render())?;
    }
    let report = TrainReport {
        name: name.to_string(),
        arch,
        steps: s.config.train.max_steps,
        final_loss: out.final_loss,
        init_valid_loss,
        valid_loss,
        checkpoint,
    };
    fs::write(s.run.reports().join(format!("{name}.train.txt")), report.render())?;
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Valid,
    Test,
}

impl FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "valid" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("split must be valid|test, got `{other}`"))),
        }
    }
}

impl Split {
    fn name(self) -> &'static str {
        match self {
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }

    fn pick(self, c: &GeneratedCorpus) -> &Corpus {
        match self {
            Split::Valid => &c.valid,
            Split::Test => &c.test,
        }
    }
}

/// Per-direction paired bootstrap of model `a` against model `b`.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonRow {
    pub direction: Direction,
    pub chrf_a: f64,
    pub chrf_b: f64,
    /// Estimated probability that `a` is not better than `b`.
    pub p_value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalOutcome {
    pub report: MatrixReport,
    pub other: Option<MatrixReport>,
    pub comparison: Vec<ComparisonRow>,
}

fn evaluate(s: &Session, corpus: &GeneratedCorpus, model: &str, split: Split, dsplit: &DirectionSplit) -> Result<MatrixReport> {
    let m: Model<f64> = load_checkpoint(&s.run.checkpoint(model))?;
    let vocab: Vocab = corpus.spec.vocab()?;
    let mut tr = ModelTranslator { model: &m, vocab: &vocab, max_len: s.config.eval.max_len };
    let dirs = all_directions(&corpus.spec.language_ids());
    evaluate_matrix(
        &mut tr,
        split.pick(corpus),
        corpus.spec.alphabet_size,
        &dirs,
        &corpus.spec.families(),
        Some(dsplit),
        &ChrfConfig::default(),
    )
}

fn eval_inputs(s: &Session, models: &[&str]) -> Result<Vec<Vec<u8>>> {
    let mut v = vec![s.config.render().into_bytes(), s.corpus_bytes()?];
    for m in models {
        v.push(file_bytes(&s.run.checkpoint(m))?);
    }
    Ok(v)
}

/// Scores every direction of `split`; with `compare`, also scores the other
/// model and runs a paired bootstrap per direction.
pub fn cmd_eval(s: &Session, model: &str, compare: Option<&str>, split: Split) -> Result<EvalOutcome> {
    check_name(model)?;
    let corpus = s.corpus()?;
    let mut models = vec![model];
    models.extend(compare);
    let inputs = eval_inputs(s, &models)?;
    let refs: Vec<&[u8]> = inputs.iter().map(Vec::as_slice).collect();
    s.manifest(format!("eval:{}:{}", models.join(":"), split.name()), s.config.eval.bootstrap_seed, &refs)?;
    s.run.create()?;
    let dsplit = corpus.spec.split()?;
    let report = evaluate(s, &corpus, model, split, &dsplit)?;
    let stem = format!("{model}.{}", split.name());
    fs::write(s.run.reports().join(format!("{stem}.scores.tsv")), report.scores_tsv())?;
    fs::write(s.run.reports().join(format!("{stem}.summary.txt")), report.summary_text())?;
    let Some(other_name) = compare else {
        return Ok(EvalOutcome { report, other: None, comparison: Vec::new() });
    };
    check_name(other_name)?;
    let other = evaluate(s, &corpus, other_name, split, &dsplit)?;
    let mut comparison = Vec::new();
    let mut text = String::from("# src\ttgt\tchrf_a\tchrf_b\tp\n");
    for (oa, sa) in report.outputs.iter().zip(&report.scores) {
        let Some((ob, sb)) = other.outputs.iter().zip(&other.scores).find(|(o, _)| o.direction == oa.direction) else {
            continue;
        };
        let p = paired_bootstrap(
            &oa.hyps,
            &ob.hyps,
            &oa.refs,
            s.config.eval.bootstrap_resamples,
            s.config.eval.bootstrap_seed,
            &ChrfConfig::default(),
        )?;
        let _ = writeln!(text, "{}\t{}\t{:.4}\t{:.4}\t{p:.4}", sa.src, sa.tgt, sa.chrf, sb.chrf);
        comparison.push(ComparisonRow { direction: oa.direction.clone(), chrf_a: sa.chrf, chrf_b: sb.chrf, p_value: p });
    }
    fs::write(s.run.reports().join(format!("{model}_vs_{other_name}.{}.bootstrap.tsv", split.name())), text)?;
    Ok(EvalOutcome { report, other: Some(other), comparison })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ZeroShotReport {
    pub split: DirectionSplit,
    pub report: MatrixReport,
}

impl ZeroShotReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        for sc in &self.report.scores {
            let kind = if self.split.is_zero_shot(&(sc.src.clone(), sc.tgt.clone())) { "zero_shot" } else { "supervised" };
            let _ = writeln!(out, "{kind}\t{}\t{}\t{:.4}", sc.src, sc.tgt, sc.chrf);
        }
        let opt = |v: Option<f64>| v.map_or("-".into(), |v| format!("{v:.4}"));
        let _ = writeln!(out, "supervised_avg\t{}", opt(self.report.summary.supervised));
        let _ = writeln!(out, "zero_shot_avg\t{}", opt(self.report.summary.zero_shot));
        out
    }
}

/// Test-set scores split into supervised and zero-shot directions.
pub fn cmd_zero_shot(s: &Session, model: &str) -> Result<ZeroShotReport> {
    check_name(model)?;
    let corpus = s.corpus()?;
    let split = corpus.spec.split()?;
    if split.zero_shot.is_empty() {
        return Err(Error::Config("corpus has no zero-shot directions; generate it with corpus.direction_mode=centric".into()));
    }
    let inputs = eval_inputs(s, &[model])?;
    let refs: Vec<&[u8]> = inputs.iter().map(Vec::as_slice).collect();
    s.manifest(format!("zero-shot:{model}"), s.config.corpus.seed, &refs)?;
    s.run.create()?;
    let report = evaluate(s, &corpus, model, Split::Test, &split)?;
    let z = ZeroShotReport { split, report };
    fs::write(s.run.reports().join(format!("{model}.zero_shot.txt")), z.render())?;
    Ok(z)
}

/// Symbolic parameter counts. With `build`, the model is also materialized
/// and the two counts must agree.
pub fn cmd_params(arch: &ArchitectureSpec, dims: ModelDims, n_languages: usize, build: bool) -> Result<ParamReport> {
    let dims = ModelDims { n_enc_layers: arch.n_enc(), ..dims };
    let report = count_params_symbolic(&dims, n_languages, arch);
    if build {
        let langs = (0..n_languages)
            .map(|i| lsl_core::lsl::LanguageId::new(format!("l{i}")))
            .collect::<Result<Vec<_>>>()?;
        let model = Model::<f32>::build(&ModelConfig::new(arch.clone(), dims, langs)?, 0)?;
        let built = count_params(&model)?;
        if built != report {
            return Err(Error::Contract(format!("symbolic count {report:?} differs from built count {built:?}")));
        }
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub k: usize,
    pub arch: ArchitectureSpec,
    pub valid_loss: f64,
    pub test_chrf: f64,
}

/// Trains the symmetric placement for every `k` (default 0, 2, .., depth)
/// and scores it on the test split.
pub fn cmd_sweep_lsl_count(s: &Session, ks: Option<&[usize]>) -> Result<Vec<SweepRow>> {
    let depth = s.config.model.n_enc_layers;
    let ks: Vec<usize> = ks.map_or_else(|| (0..=depth).step_by(2).collect(), <[usize]>::to_vec);
    let specs = ks
        .iter()
        .map(|&k| ArchitectureSpec::symmetric(depth, s.config.model.decoder_mode, k))
        .collect::<Result<Vec<_>>>()?;
    s.manifest("sweep".into(), s.config.train.seed, &[s.config.render().as_bytes(), &s.corpus_bytes()?])?;
    let mut rows = Vec::new();
    let mut text = String::from("# k\tarch\tvalid_loss\ttest_chrf\n");
    for (k, arch) in ks.into_iter().zip(specs) {
        let name = format!("sweep_k{k}");
        let t = cmd_train(s, &name, arch.clone(), None)?;
        let e = cmd_eval(s, &name, None, Split::Test)?;
        let chrf = e.report.summary.overall.unwrap_or(0.0);
        let _ = writeln!(text, "{k}\t{arch}\t{:.6}\t{chrf:.4}", t.valid_loss);
        rows.push(SweepRow { k, arch, valid_loss: t.valid_loss, test_chrf: chrf });
    }
    fs::write(s.run.reports().join("sweep.tsv"), text)?;
    Ok(rows)
}
