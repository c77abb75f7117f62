//! Run directories and their manifests.
//!
//! A run lives in `<root>/<name>/` with `manifest`, `corpus/`,
//! `checkpoints/`, `logs/` and `reports/`. The manifest holds one block per
//! command invocation key; rerunning a command replaces its block.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use lsl_core::{Error, Result};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest")
    }

    /// Resolved experiment config saved by `gen`.
    pub fn config(&self) -> PathBuf {
        self.root.join("experiment.cfg")
    }

    pub fn corpus(&self) -> PathBuf {
        self.root.join("corpus")
    }

    pub fn checkpoints(&self) -> PathBuf {
        self.root.join("checkpoints")
    }

    pub fn checkpoint(&self, model: &str) -> PathBuf {
        self.checkpoints().join(format!("{model}.ckpt"))
    }

    pub fn logs(&self) -> PathBuf {
        self.root.join("logs")
    }

    pub fn reports(&self) -> PathBuf {
        self.root.join("reports")
    }

    pub fn create(&self) -> Result<()> {
        for d in [self.corpus(), self.checkpoints(), self.logs(), self.reports()] {
            fs::create_dir_all(d)?;
        }
        Ok(())
    }
}

/// sha256 over git-style blob framing (`blob <len>\0<bytes>`) of each input.
pub fn content_hash<'a>(inputs: impl IntoIterator<Item = &'a [u8]>) -> String {
    let mut h = Sha256::new();
    for bytes in inputs {
        h.update(format!("blob {}\0", bytes.len()).as_bytes());
        h.update(bytes);
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn file_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunManifest {
    /// Command plus an optional model name, e.g. `train:baseline`.
    pub command: String,
    pub config: Option<PathBuf>,
    pub seed: u64,
    pub input_hash: String,
    pub output_dir: PathBuf,
}

impl RunManifest {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "[{}]", self.command);
        let _ = writeln!(out, "command={}", self.command);
        let config = self.config.as_ref().map_or("-".to_string(), |p| p.display().to_string());
        let _ = writeln!(out, "config={config}");
        let _ = writeln!(out, "seed={}", self.seed);
        let _ = writeln!(out, "input_hash={}", self.input_hash);
        let _ = writeln!(out, "output={}", self.output_dir.display());
        out
    }

    fn parse_block(lines: &[&str]) -> Result<Self> {
        let kv = lsl_core::kv::KvMap::parse(&lines.join("\n"))?;
        let config = kv.require_str("config")?.to_string();
        Ok(Self {
            command: kv.require_str("command")?.to_string(),
            config: (config != "-").then(|| PathBuf::from(config)),
            seed: kv.require("seed")?,
            input_hash: kv.require_str("input_hash")?.to_string(),
            output_dir: PathBuf::from(kv.require_str("output")?),
        })
    }

    pub fn read_all(path: &Path) -> Result<Vec<Self>> {
        let text = match fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e.into()),
        };
        let mut out = Vec::new();
        let mut block: Vec<&str> = Vec::new();
        for line in text.lines() {
            if line.starts_with('[') {
                if !block.is_empty() {
                    out.push(Self::parse_block(&block)?);
                }
                block.clear();
            } else if !line.trim().is_empty() {
                block.push(line);
            }
        }
        if !block.is_empty() {
            out.push(Self::parse_block(&block)?);
        }
        Ok(out)
    }

    /// Inserts or replaces this command's block, keeping the others in order.
    pub fn record(&self, run: &RunDir) -> Result<()> {
        fs::create_dir_all(&run.root)?;
        let mut all = Self::read_all(&run.manifest())?;
        match all.iter_mut().find(|m| m.command == self.command) {
            Some(slot) => *slot = self.clone(),
            None => all.push(self.clone()),
        }
        let text: Vec<String> = all.iter().map(Self::render).collect();
        fs::write(run.manifest(), text.join("\n"))?;
        Ok(())
    }
}
