//! Single-file safetensors checkpoints.
//!
//! One file holds generator and discriminator weights, both optimizer
//! states, and metadata. Metadata rides along as tensors: counters as
//! U32 scalars, the architecture fingerprint and the full config (JSON)
//! as U8 byte tensors, so no sidecar files are needed.

use std::collections::HashMap;
use std::path::Path;

use candle_core::{DType, Device, Tensor};
use candle_nn::VarMap;

use crate::config::TrainConfig;
use crate::error::{Error, Result};

pub const GEN_PREFIX: &str = "gen.";
pub const DISC_PREFIX: &str = "disc.";

fn corrupt(path: &Path, reason: impl Into<String>) -> Error {
    Error::CheckpointCorrupt { path: path.to_path_buf(), reason: reason.into() }
}

fn bytes_tensor(bytes: &[u8], device: &Device) -> Result<Tensor> {
    Ok(Tensor::from_vec(bytes.to_vec(), bytes.len(), device)?)
}

fn u32_tensor(v: u32, device: &Device) -> Result<Tensor> {
    Ok(Tensor::from_vec(vec![v], 1, device)?)
}

fn read_bytes(tensors: &HashMap<String, Tensor>, key: &str, path: &Path) -> Result<Vec<u8>> {
    let t = tensors.get(key).ok_or_else(|| corrupt(path, format!("missing {key}")))?;
    if t.dtype() != DType::U8 {
        return Err(corrupt(path, format!("{key} has dtype {:?}, expected u8", t.dtype())));
    }
    Ok(t.flatten_all()?.to_vec1::<u8>()?)
}

fn read_u32(tensors: &HashMap<String, Tensor>, key: &str, path: &Path) -> Result<u32> {
    let t = tensors.get(key).ok_or_else(|| corrupt(path, format!("missing {key}")))?;
    let v = t.flatten_all()?.to_vec1::<u32>().map_err(|e| corrupt(path, e.to_string()))?;
    v.first().copied().ok_or_else(|| corrupt(path, format!("{key} is empty")))
}

/// Everything read back from a checkpoint file, before it is applied to
/// live networks.
pub struct LoadedCheckpoint {
    pub epoch: usize,
    pub iteration: usize,
    pub fingerprint: String,
    pub config: TrainConfig,
    pub tensors: HashMap<String, Tensor>,
}

pub fn save_checkpoint(
    path: &Path,
    gen: &VarMap,
    disc: &VarMap,
    extra: &[(String, Tensor)],
    epoch: usize,
    iteration: usize,
    config: &TrainConfig,
    device: &Device,
) -> Result<()> {
    let mut tensors: HashMap<String, Tensor> = HashMap::new();
    for (prefix, map) in [(GEN_PREFIX, gen), (DISC_PREFIX, disc)] {
        let data = map.data().lock().unwrap();
        for (name, var) in data.iter() {
            tensors.insert(format!("{prefix}{name}"), var.as_tensor().clone());
        }
    }
    for (name, t) in extra {
        tensors.insert(name.clone(), t.clone());
    }
    tensors.insert("meta.epoch".into(), u32_tensor(epoch as u32, device)?);
    tensors.insert("meta.iteration".into(), u32_tensor(iteration as u32, device)?);
    tensors.insert("meta.fingerprint".into(), bytes_tensor(config.fingerprint().as_bytes(), device)?);
    let config_json = serde_json::to_vec(config).map_err(|e| Error::Config(e.to_string()))?;
    tensors.insert("meta.config".into(), bytes_tensor(&config_json, device)?);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    candle_core::safetensors::save(&tensors, path)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path, device: &Device) -> Result<LoadedCheckpoint> {
    let tensors = candle_core::safetensors::load(path, device)
        .map_err(|e| corrupt(path, e.to_string()))?;
    let epoch = read_u32(&tensors, "meta.epoch", path)? as usize;
    let iteration = read_u32(&tensors, "meta.iteration", path)? as usize;
    let fingerprint = String::from_utf8(read_bytes(&tensors, "meta.fingerprint", path)?)
        .map_err(|_| corrupt(path, "fingerprint is not utf-8"))?;
    let config: TrainConfig = serde_json::from_slice(&read_bytes(&tensors, "meta.config", path)?)
        .map_err(|e| corrupt(path, format!("config json: {e}")))?;
    Ok(LoadedCheckpoint { epoch, iteration, fingerprint, config, tensors })
}

/// Copy `{prefix}{name}` tensors from a loaded checkpoint into a varmap.
/// Every live variable must be present with a matching shape.
pub fn restore_varmap(
    ckpt: &LoadedCheckpoint,
    prefix: &str,
    map: &VarMap,
    path: &Path,
) -> Result<()> {
    let data = map.data().lock().unwrap();
    for (name, var) in data.iter() {
        let key = format!("{prefix}{name}");
        let t = ckpt.tensors.get(&key).ok_or_else(|| corrupt(path, format!("missing {key}")))?;
        if t.shape() != var.shape() {
            return Err(corrupt(
                path,
                format!("{key}: shape {:?} does not match live {:?}", t.shape(), var.shape()),
            ));
        }
        var.set(t)?;
    }
    Ok(())
}
