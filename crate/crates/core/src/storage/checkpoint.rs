use std::path::Path;

use serde::{Deserialize, Serialize};

use super::container::{decode, encode, read_file, write_file, Reader};
use crate::model::{ModelConfig, ModelParams};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"MTCK";
const VERSION: u16 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    tensors: Vec<TensorEntry>,
}

/// Stores parameters as little-endian `f32` in layout order, with the
/// tensor names and shapes in the header so loads can be validated.
pub fn encode_checkpoint(params: &ModelParams) -> Result<Vec<u8>> {
    let header = Header {
        config: params.config.clone(),
        tensors: params
            .layout
            .specs
            .iter()
            .map(|s| TensorEntry {
                name: s.name.clone(),
                shape: s.shape.clone(),
            })
            .collect(),
    };
    let mut payload = Vec::with_capacity(params.len() * 4);
    for &v in &params.values {
        payload.extend_from_slice(&(v as f32).to_le_bytes());
    }
    encode(MAGIC, VERSION, &header, &payload)
}

pub fn decode_checkpoint(bytes: &[u8], path: &Path) -> Result<ModelParams> {
    let (h, payload): (Header, _) = decode(bytes, MAGIC, VERSION, path)?;
    let corrupt = |reason: String| Error::Corrupt {
        path: path.to_path_buf(),
        reason,
    };
    h.config.validate().map_err(|e| corrupt(e.to_string()))?;
    let expected = crate::model::ParamLayout::new(&h.config)?;
    if expected.specs.len() != h.tensors.len() {
        return Err(corrupt(format!(
            "expected {} tensors, found {}",
            expected.specs.len(),
            h.tensors.len()
        )));
    }
    for (spec, entry) in expected.specs.iter().zip(&h.tensors) {
        if spec.name != entry.name || spec.shape != entry.shape {
            return Err(corrupt(format!(
                "tensor `{}` {:?} does not match `{}` {:?}",
                entry.name, entry.shape, spec.name, spec.shape
            )));
        }
    }
    let mut r = Reader::new(payload, path);
    let values = r.f32s(expected.total)?.into_iter().map(f64::from).collect();
    r.finish()?;
    ModelParams::from_values(h.config, values)
}

pub fn save_checkpoint(path: &Path, params: &ModelParams) -> Result<()> {
    write_file(path, &encode_checkpoint(params)?)
}

pub fn load_checkpoint(path: &Path) -> Result<ModelParams> {
    decode_checkpoint(&read_file(path)?, path)
}
