use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lsl_cli::{
    cmd_eval, cmd_gen, cmd_params, cmd_search, cmd_sweep_lsl_count, cmd_train, cmd_zero_shot, exit_code,
    parse_arch_file, RunDir, Session, Split,
};
use lsl_core::arch::ArchitectureSpec;
use lsl_core::layers::ModelDims;
use lsl_core::{Error, Result};

#[derive(Parser)]
#[command(name = "lsl", version, about = "Language-specific transformer layer experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Run name; artifacts go to <runs-dir>/<name>/.
    #[arg(long)]
    run: String,
    #[arg(long, default_value = "runs")]
    runs_dir: PathBuf,
    /// Experiment config; defaults to the one saved in the run directory.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `section.key=value` override, applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl RunArgs {
    fn session(&self) -> Result<Session> {
        Session::open(RunDir::new(self.runs_dir.join(&self.run)), self.config.as_deref(), &self.overrides)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic corpus.
    Gen(RunArgs),
    /// Run the mixing-weight search and select an architecture.
    Search(RunArgs),
    /// Train one model.
    Train {
        #[command(flatten)]
        run: RunArgs,
        /// Checkpoint name inside the run.
        #[arg(long)]
        model: String,
        /// Architecture in text form, e.g. `enc=4 dec=separate src=[2] tgt=[3]`.
        #[arg(long, conflicts_with = "arch_file")]
        arch: Option<String>,
        /// Architecture file, e.g. the `reports/selected.arch` of a search.
        #[arg(long)]
        arch_file: Option<PathBuf>,
        /// Dense initialization from an all-shared checkpoint.
        #[arg(long)]
        init_from: Option<PathBuf>,
    },
    /// Score a model on every direction; optionally compare two models.
    Eval {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        model: String,
        #[arg(long)]
        compare: Option<String>,
        #[arg(long, default_value = "test")]
        split: String,
    },
    /// Supervised versus zero-shot test scores.
    ZeroShot {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        model: String,
    },
    /// Total and per-direction parameter counts.
    Params {
        #[arg(long, default_value = "enc=16 dec=separate src=[] tgt=[]")]
        arch: String,
        #[arg(long, default_value_t = 512)]
        d_model: usize,
        #[arg(long, default_value_t = 2048)]
        d_ffn: usize,
        #[arg(long, default_value_t = 8)]
        heads: usize,
        #[arg(long, default_value_t = 3)]
        dec_layers: usize,
        #[arg(long, default_value_t = 250_000)]
        vocab: usize,
        #[arg(long, default_value_t = 10)]
        languages: usize,
        /// Also build the model and cross-check the count.
        #[arg(long)]
        build: bool,
    },
    /// Train and score symmetric placements with k LSLs.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated k values; defaults to 0, 2, .., encoder depth.
        #[arg(long, value_delimiter = ',')]
        ks: Option<Vec<usize>>,
    },
}

fn read_arch(arch: Option<&str>, file: Option<&Path>) -> Result<ArchitectureSpec> {
    match (arch, file) {
        (Some(a), _) => ArchitectureSpec::parse(a),
        (None, Some(f)) => parse_arch_file(
            &std::fs::read_to_string(f).map_err(|e| Error::Config(format!("cannot read {}: {e}", f.display())))?,
        ),
        (None, None) => Err(Error::Config("give --arch or --arch-file".into())),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(r) => {
            let s = r.session()?;
            let c = cmd_gen(&s)?;
            println!("train\t{}\nvalid\t{}\ntest\t{}", c.train.len(), c.valid.len(), c.test.len());
        }
        Command::Search(r) => {
            let out = cmd_search(&r.session()?)?;
            for (i, w) in out.averaged.iter().enumerate() {
                println!("{}\t{:.4}\t{:.4}\t{:.4}", i + 1, w[0], w[1], w[2]);
            }
            println!("selected\t{}", out.spec);
        }
        Command::Train { run, model, arch, arch_file, init_from } => {
            let arch = read_arch(arch.as_deref(), arch_file.as_deref())?;
            print!("{}", cmd_train(&run.session()?, &model, arch, init_from.as_deref())?.render());
        }
        Command::Eval { run, model, compare, split } => {
            let out = cmd_eval(&run.session()?, &model, compare.as_deref(), split.parse::<Split>()?)?;
            print!("{}", out.report.summary_text());
            for row in &out.comparison {
                println!("p\t{}\t{}\t{:.4}", row.direction.0, row.direction.1, row.p_value);
            }
        }
        Command::ZeroShot { run, model } => print!("{}", cmd_zero_shot(&run.session()?, &model)?.render()),
        Command::Params { arch, d_model, d_ffn, heads, dec_layers, vocab, languages, build } => {
            let arch = ArchitectureSpec::parse(&arch)?;
            let dims = ModelDims {
                d_model,
                d_ffn,
                n_heads: heads,
                n_enc_layers: arch.n_enc(),
                n_dec_layers: dec_layers,
                vocab_size: vocab,
            };
            print!("{}", cmd_params(&arch, dims, languages, build)?);
        }
        Command::Sweep { run, ks } => {
            for row in cmd_sweep_lsl_count(&run.session()?, ks.as_deref())? {
                println!("{}\t{}\t{:.4}\t{:.2}", row.k, row.arch, row.valid_loss, row.test_chrf);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
