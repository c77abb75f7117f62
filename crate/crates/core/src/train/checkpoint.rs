//! Binary checkpoints.
//!
//! Layout, all integers little-endian:
//! `b"LSLCKPT\0"`, `u32` version, `u64` manifest length, UTF-8 manifest,
//! `u64` value count, then every parameter value as `f64` in store order.
//! The manifest is the model config, a `---` line, and one
//! `name<TAB>shape` line per parameter.

use std::fs;
use std::path::Path;

use crate::arch::{Model, ModelConfig};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const MAGIC: &[u8; 8] = b"LSLCKPT\0";
const VERSION: u32 = 1;

fn manifest<S: Scalar>(model: &Model<S>) -> String {
    let mut text = model.config().render();
    text.push_str("---\n");
    for (_, p) in model.store().iter() {
        let dims: Vec<String> = p.value.shape().iter().map(|d| d.to_string()).collect();
        text.push_str(&format!("{}\t{}\n", p.name, dims.join("x")));
    }
    text
}

pub fn encode_checkpoint<S: Scalar>(model: &Model<S>) -> Vec<u8> {
    let manifest = manifest(model);
    let n = model.store().total_numel();
    let mut out = Vec::with_capacity(24 + manifest.len() + 8 * n);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(manifest.len() as u64).to_le_bytes());
    out.extend_from_slice(manifest.as_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    for (_, p) in model.store().iter() {
        for v in p.value.data() {
            out.extend_from_slice(&v.to_f64_lossy().to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() < n {
            return Err(Error::Data("checkpoint is truncated".into()));
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Ok(head)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn decode_checkpoint<S: Scalar>(bytes: &[u8]) -> Result<Model<S>> {
    let mut r = Reader { bytes };
    if r.take(8)? != MAGIC {
        return Err(Error::Data("not a checkpoint file".into()));
    }
    let version = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(Error::Data(format!("unsupported checkpoint version {version}")));
    }
    let len = r.u64()? as usize;
    let text = std::str::from_utf8(r.take(len)?).map_err(|_| Error::Data("checkpoint manifest is not UTF-8".into()))?;
    let (config_text, params_text) = text
        .split_once("---\n")
        .ok_or_else(|| Error::Data("checkpoint manifest lacks a parameter section".into()))?;
    let config = ModelConfig::parse(config_text)?;
    let mut model = Model::<S>::build(&config, 0)?;
    if manifest(&model) != text {
        return Err(Error::Data("checkpoint parameters do not match its config".into()));
    }
    debug_assert!(params_text.lines().count() == model.store().len());
    let n = r.u64()? as usize;
    if n != model.store().total_numel() || r.bytes.len() != 8 * n {
        return Err(Error::Data("checkpoint value count does not match its config".into()));
    }
    for p in model.store_mut().params_mut() {
        for v in p.value.data_mut() {
            let x = f64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes"));
            if !x.is_finite() {
                return Err(Error::Data(format!("non-finite value in `{}`", p.name)));
            }
            *v = S::of(x);
        }
    }
    Ok(model)
}

pub fn save_checkpoint<S: Scalar>(model: &Model<S>, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, encode_checkpoint(model))?;
    Ok(())
}

pub fn load_checkpoint<S: Scalar>(path: &Path) -> Result<Model<S>> {
    let bytes = fs::read(path).map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
    decode_checkpoint(&bytes)
}
