//! Checkpoints: one MRT1 tensor per weight and bias plus a JSON index.
//!
//! Weights are stored as `out x (in*k*k)` real tensors, biases as `1 x out`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::network::{SegmenterParams, LAYER_NAMES, TOPOLOGY};
use crate::error::{Error, Result};
use crate::grid::Image2D;
use crate::tensor_io::{read_image, write_tensor, Tensor};

pub const INDEX_FILE: &str = "checkpoint.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerEntry {
    pub name: String,
    pub out_channels: usize,
    pub in_channels: usize,
    pub kernel: usize,
    pub weight: PathBuf,
    pub bias: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointIndex {
    pub format_version: u32,
    pub parameter_count: usize,
    pub layers: Vec<LayerEntry>,
}

/// Writes `params` into `dir` (created if needed).
pub fn save_checkpoint(dir: impl AsRef<Path>, params: &SegmenterParams) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut layers = Vec::new();
    for (name, l) in LAYER_NAMES.iter().zip(&params.layers) {
        let cols = l.in_ch * l.kernel * l.kernel;
        let weight = PathBuf::from(format!("{name}.weight.mrt"));
        let bias = PathBuf::from(format!("{name}.bias.mrt"));
        write_tensor(dir.join(&weight), &Tensor::Image(Image2D::new(l.out_ch, cols, l.weight.clone())?))?;
        write_tensor(dir.join(&bias), &Tensor::Image(Image2D::new(1, l.out_ch, l.bias.clone())?))?;
        layers.push(LayerEntry {
            name: name.to_string(),
            out_channels: l.out_ch,
            in_channels: l.in_ch,
            kernel: l.kernel,
            weight,
            bias,
        });
    }
    let index = CheckpointIndex {
        format_version: 1,
        parameter_count: SegmenterParams::parameter_count(),
        layers,
    };
    let path = dir.join(INDEX_FILE);
    let mut text = serde_json::to_string_pretty(&index).expect("index serializes");
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(dir: impl AsRef<Path>) -> Result<SegmenterParams> {
    let dir = dir.as_ref();
    let path = dir.join(INDEX_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let index: CheckpointIndex = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.clone(),
        source,
    })?;
    if index.layers.len() != TOPOLOGY.len() {
        return Err(Error::validation(format!(
            "{}: expected {} layers, found {}",
            path.display(),
            TOPOLOGY.len(),
            index.layers.len()
        )));
    }
    let mut params = SegmenterParams::zeros();
    for ((entry, &(o, i, k)), layer) in index.layers.iter().zip(&TOPOLOGY).zip(&mut params.layers) {
        if (entry.out_channels, entry.in_channels, entry.kernel) != (o, i, k) {
            return Err(Error::validation(format!(
                "layer {}: shape {}x{}x{} does not match the network",
                entry.name, entry.out_channels, entry.in_channels, entry.kernel
            )));
        }
        let w = read_image(dir.join(&entry.weight))?;
        let b = read_image(dir.join(&entry.bias))?;
        if w.shape() != (o, i * k * k) || b.shape() != (1, o) {
            return Err(Error::shape(format!("layer {}: tensor dims do not match the index", entry.name)));
        }
        layer.weight.copy_from_slice(w.data());
        layer.bias.copy_from_slice(b.data());
    }
    Ok(params)
}
