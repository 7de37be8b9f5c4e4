//! Flat little-endian `f64` parameter files with a JSON manifest of named blocks.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{LearnError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockInfo {
    pub name: String,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub blocks: Vec<BlockInfo>,
}

fn paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("bin"), stem.with_extension("json"))
}

/// Writes `<stem>.bin` and `<stem>.json`.
pub fn save(stem: &Path, blocks: &[(&str, &[f64])]) -> Result<()> {
    let (bin, json) = paths(stem);
    let mut bytes = Vec::with_capacity(blocks.iter().map(|(_, b)| b.len() * 8).sum());
    for (_, b) in blocks {
        for x in *b {
            bytes.extend_from_slice(&x.to_le_bytes());
        }
    }
    let manifest =
        Manifest { blocks: blocks.iter().map(|(n, b)| BlockInfo { name: (*n).to_string(), len: b.len() }).collect() };
    fs::write(bin, bytes)?;
    fs::write(json, serde_json::to_string_pretty(&manifest).map_err(|e| LearnError::Checkpoint(e.to_string()))?)?;
    Ok(())
}

pub fn load(stem: &Path) -> Result<Vec<(String, Vec<f64>)>> {
    let (bin, json) = paths(stem);
    let manifest: Manifest =
        serde_json::from_str(&fs::read_to_string(json)?).map_err(|e| LearnError::Checkpoint(e.to_string()))?;
    let bytes = fs::read(bin)?;
    let total: usize = manifest.blocks.iter().map(|b| b.len).sum();
    if bytes.len() != total * 8 {
        return Err(LearnError::Checkpoint(format!("expected {} bytes, found {}", total * 8, bytes.len())));
    }
    let mut values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
    Ok(manifest.blocks.into_iter().map(|b| (b.name, values.by_ref().take(b.len).collect())).collect())
}

/// Copies the block called `name` into `dst`, checking its length.
pub fn restore(blocks: &[(String, Vec<f64>)], name: &str, dst: &mut [f64]) -> Result<()> {
    let (_, v) = blocks
        .iter()
        .find(|(n, _)| n == name)
        .ok_or_else(|| LearnError::Checkpoint(format!("missing block {name}")))?;
    if v.len() != dst.len() {
        return Err(LearnError::Checkpoint(format!("block {name}: expected {} values, found {}", dst.len(), v.len())));
    }
    dst.copy_from_slice(v);
    Ok(())
}
