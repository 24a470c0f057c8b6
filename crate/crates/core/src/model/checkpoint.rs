//! Checkpoint file format (UTF-8 JSON, one document):
//!
//! ```text
//! {
//!   "format": "perturblab-checkpoint",
//!   "version": 1,
//!   "config": { ModelConfig fields },
//!   "tensors": [ { "name": "...", "shape": [rows, cols], "data": [f64, ...] }, ... ]
//! }
//! ```
//!
//! Tensors appear in lexicographic name order and values are written in
//! shortest round-trip form, so identical parameters give identical bytes.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelConfig, ModelParams};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "perturblab-checkpoint";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NamedTensor {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointFile {
    format: String,
    version: u32,
    config: ModelConfig,
    tensors: Vec<NamedTensor>,
}

pub fn write_checkpoint<W: Write>(params: &ModelParams, writer: W) -> Result<()> {
    let file = CheckpointFile {
        format: CHECKPOINT_FORMAT.to_string(),
        version: VERSION,
        config: params.config().clone(),
        tensors: params
            .iter()
            .map(|(name, t)| NamedTensor {
                name: name.to_string(),
                shape: t.shape().to_vec(),
                data: t.data().to_vec(),
            })
            .collect(),
    };
    serde_json::to_writer(writer, &file)?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(reader: R) -> Result<ModelParams> {
    let file: CheckpointFile = serde_json::from_reader(reader)?;
    if file.format != CHECKPOINT_FORMAT {
        return Err(Error::Checkpoint(format!(
            "unknown format `{}`",
            file.format
        )));
    }
    if file.version != VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported version {}",
            file.version
        )));
    }
    let mut tensors = BTreeMap::new();
    for t in file.tensors {
        let tensor = Tensor::new(t.shape, t.data)
            .map_err(|e| Error::Checkpoint(format!("tensor `{}`: {e}", t.name)))?;
        if tensors.insert(t.name.clone(), tensor).is_some() {
            return Err(Error::Checkpoint(format!("duplicate tensor `{}`", t.name)));
        }
    }
    ModelParams::from_tensors(file.config, tensors)
}

pub fn save_checkpoint(params: &ModelParams, path: &Path) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    write_checkpoint(params, &mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<ModelParams> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(BufReader::new(f))
}
