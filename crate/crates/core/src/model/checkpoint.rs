//! Checkpoint layout: one line of JSON header terminated by `\n`, followed by
//! the tables `user_emb`, `item_emb`, `pop_emb` as consecutive little-endian
//! `f64` values in row-major order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelKind, ModelParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub model_kind: ModelKind,
    #[serde(rename = "D")]
    pub dim: usize,
    pub n_layers: usize,
    pub lambda_p: f64,
    pub n_users: usize,
    pub n_items: usize,
    pub seed: u64,
}

pub fn save_checkpoint(path: &Path, params: &ModelParams, seed: u64) -> Result<()> {
    let header = CheckpointHeader {
        model_kind: params.kind,
        dim: params.dim,
        n_layers: params.n_layers,
        lambda_p: params.lambda_p,
        n_users: params.n_users,
        n_items: params.n_items,
        seed,
    };
    let mut bytes = serde_json::to_vec(&header)?;
    bytes.push(b'\n');
    let n = params.user_emb.len() + params.item_emb.len() + params.pop_emb.len();
    bytes.reserve(n * 8);
    for x in params
        .user_emb
        .iter()
        .chain(&params.item_emb)
        .chain(&params.pop_emb)
    {
        bytes.extend_from_slice(&x.to_le_bytes());
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<(ModelParams, CheckpointHeader)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Checkpoint("missing header line".into()))?;
    let header: CheckpointHeader = serde_json::from_slice(&bytes[..newline])?;
    let body = &bytes[newline + 1..];
    let n_user = header.n_users * header.dim;
    let n_item = header.n_items * header.dim;
    let expected = (n_user + n_item + header.dim) * 8;
    if body.len() != expected {
        return Err(Error::Checkpoint(format!(
            "expected {expected} table bytes, found {}",
            body.len()
        )));
    }
    let mut values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let mut take = |n: usize| -> Vec<f64> { values.by_ref().take(n).collect() };
    let params = ModelParams {
        kind: header.model_kind,
        dim: header.dim,
        n_layers: header.n_layers,
        lambda_p: header.lambda_p,
        n_users: header.n_users,
        n_items: header.n_items,
        user_emb: take(n_user),
        item_emb: take(n_item),
        pop_emb: take(header.dim),
    };
    Ok((params, header))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_params, ModelConfig};

    #[test]
    fn round_trip_and_truncation() {
        let cfg = ModelConfig {
            kind: ModelKind::Lgc,
            ..ModelConfig::default()
        };
        let p = init_params(&cfg, 3, 5, 42);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.bin");
        save_checkpoint(&path, &p, 42).unwrap();
        let (q, h) = load_checkpoint(&path).unwrap();
        assert_eq!(p, q);
        assert_eq!(h.seed, 42);

        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 8]).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::Checkpoint(_))));
    }
}
