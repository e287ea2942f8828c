//! Checkpoints: `params.bin` holds every parameter as little-endian `f64`s in
//! store order; `checkpoint.json` records the model configuration, names,
//! shapes and hashes.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::Matrix;
use crate::model::{Model, ModelConfig};
use crate::params::ParamStore;
use crate::{sha256_hex, Error, Result};

pub const CHECKPOINT_MANIFEST: &str = "checkpoint.json";
pub const CHECKPOINT_PARAMS: &str = "params.bin";
const FORMAT: &str = "trustgcn-checkpoint/1";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format: String,
    pub model: ModelConfig,
    pub config_hash: String,
    pub seed: u64,
    pub epoch: usize,
    pub params: Vec<ParamEntry>,
    pub params_sha256: String,
}

pub fn write_checkpoint(
    model: &Model,
    config_hash: &str,
    seed: u64,
    epoch: usize,
    dir: impl AsRef<Path>,
) -> Result<CheckpointManifest> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut bytes = Vec::with_capacity(model.params.num_scalars() * 8);
    for v in model.params.values() {
        for x in v.as_slice() {
            bytes.extend_from_slice(&x.to_le_bytes());
        }
    }
    let path = dir.join(CHECKPOINT_PARAMS);
    fs::write(&path, &bytes).map_err(|e| Error::io(&path, e))?;
    let manifest = CheckpointManifest {
        format: FORMAT.into(),
        model: model.config.clone(),
        config_hash: config_hash.into(),
        seed,
        epoch,
        params: model
            .params
            .names()
            .iter()
            .zip(model.params.values())
            .map(|(name, v)| ParamEntry {
                name: name.clone(),
                rows: v.rows(),
                cols: v.cols(),
            })
            .collect(),
        params_sha256: sha256_hex(&bytes),
    };
    let mut json = serde_json::to_string_pretty(&manifest)?;
    json.push('\n');
    let path = dir.join(CHECKPOINT_MANIFEST);
    fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

pub fn read_checkpoint(dir: impl AsRef<Path>) -> Result<(Model, CheckpointManifest)> {
    let dir = dir.as_ref();
    let path = dir.join(CHECKPOINT_MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: CheckpointManifest = serde_json::from_str(&text)?;
    if manifest.format != FORMAT {
        return Err(Error::Bundle(format!("unsupported checkpoint format `{}`", manifest.format)));
    }
    let path = dir.join(CHECKPOINT_PARAMS);
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    if sha256_hex(&bytes) != manifest.params_sha256 {
        return Err(Error::Bundle("checkpoint parameters do not match their hash".into()));
    }
    let expected: usize = manifest.params.iter().map(|p| p.rows * p.cols * 8).sum();
    if bytes.len() != expected {
        return Err(Error::Bundle(format!("{} parameter bytes, expected {expected}", bytes.len())));
    }
    let mut store = ParamStore::new();
    let mut chunks = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    for p in &manifest.params {
        let data: Vec<f64> = chunks.by_ref().take(p.rows * p.cols).collect();
        store.insert(p.name.clone(), Matrix::new(p.rows, p.cols, data)?)?;
    }
    let model = Model::from_params(manifest.model.clone(), store)?;
    Ok((model, manifest))
}
