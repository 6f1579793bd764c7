//! VSMD model files.
//!
//! Layout (little-endian): `"VSMD"`, u32 version (1), u32 metadata length,
//! UTF-8 JSON metadata, then every parameter array as f32 in layer order
//! (weight before bias).

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::layers::LayerSpec;
use super::model::{Head, LayerWeights, ModelParams};
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const VSMD_MAGIC: &[u8; 4] = b"VSMD";
pub const VSMD_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Metadata {
    layers: Vec<LayerSpec>,
    head: Head,
    class_count: Option<usize>,
    input_shape: Vec<usize>,
    param_count: usize,
    #[serde(default)]
    extra: serde_json::Value,
}

pub fn encode_model(model: &ModelParams) -> Result<Vec<u8>> {
    model.validate()?;
    let meta = Metadata {
        layers: model.layers.clone(),
        head: model.head,
        class_count: model.class_count(),
        input_shape: model.input_shape.clone(),
        param_count: model.param_count(),
        extra: model.extra.clone(),
    };
    let json = serde_json::to_vec(&meta).expect("metadata serializes");
    let mut out = Vec::with_capacity(12 + json.len() + 4 * meta.param_count);
    out.extend_from_slice(VSMD_MAGIC);
    out.extend_from_slice(&VSMD_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for s in model.param_slices() {
        for &v in s {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_model(path: &Path, bytes: &[u8]) -> Result<ModelParams> {
    if bytes.len() < 12 {
        return Err(Error::format(path, format!("byte {}", bytes.len()), "truncated header"));
    }
    if &bytes[..4] != VSMD_MAGIC {
        return Err(Error::format(path, "byte 0", "bad magic"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VSMD_VERSION {
        return Err(Error::UnsupportedVersion {
            format: "VSMD",
            found: version,
            expected: VSMD_VERSION,
        });
    }
    let json_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let json_end = 12usize
        .checked_add(json_len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| Error::format(path, format!("byte {}", bytes.len()), "truncated metadata"))?;
    let meta: Metadata = serde_json::from_slice(&bytes[12..json_end])
        .map_err(|e| Error::format(path, "byte 12", format!("bad metadata: {e}")))?;

    let payload = &bytes[json_end..];
    if payload.len() != meta.param_count * 4 {
        return Err(Error::format(
            path,
            format!("byte {}", json_end + payload.len().min(meta.param_count * 4)),
            format!(
                "parameter payload is {} bytes, expected {}",
                payload.len(),
                meta.param_count * 4
            ),
        ));
    }
    let mut floats = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64);
    let mut take = |shape: Vec<usize>| -> Result<Tensor> {
        let n: usize = shape.iter().product();
        let vals: Vec<f64> = floats.by_ref().take(n).collect();
        if vals.len() != n {
            return Err(Error::format(path, "payload", "parameter count does not match layers"));
        }
        Tensor::new(shape, vals)
    };
    let mut weights = Vec::with_capacity(meta.layers.len());
    for l in &meta.layers {
        weights.push(match l.param_shapes() {
            Some((ws, bs)) => Some(LayerWeights {
                weight: take(ws)?,
                bias: take(bs)?,
            }),
            None => None,
        });
    }
    let model = ModelParams {
        layers: meta.layers,
        weights,
        head: meta.head,
        input_shape: meta.input_shape,
        extra: meta.extra,
    };
    model.validate()?;
    if model.param_count() != meta.param_count {
        return Err(Error::format(path, "byte 12", "param_count disagrees with layers"));
    }
    Ok(model)
}

pub fn serialize_model(model: &ModelParams, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_model(model)?).map_err(|e| Error::io(path, e))
}

pub fn deserialize_model(path: impl AsRef<Path>) -> Result<ModelParams> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(path, &bytes)
}
