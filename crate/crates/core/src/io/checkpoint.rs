//! Parameter checkpoints: one JSON header line, then every tensor as
//! little-endian `f32` in header order.

use serde::{Deserialize, Serialize};

use crate::encoder::{EncoderConfig, EncoderParams, TensorSet};
use crate::error::{Error, Result};
use crate::learn::Model;

pub const CHECKPOINT_FORMAT: &str = "unilight-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub format: String,
    pub version: u32,
    pub encoder: EncoderConfig,
    pub tensors: Vec<TensorEntry>,
}

pub fn encode_checkpoint(model: &Model) -> Result<Vec<u8>> {
    let header = CheckpointHeader {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        encoder: model.encoder.config,
        tensors: model.layout().into_iter().map(|(name, shape)| TensorEntry { name, shape }).collect(),
    };
    let mut out = serde_json::to_vec(&header).map_err(|e| Error::Format(e.to_string()))?;
    out.push(b'\n');
    model.visit(&mut |_, _, d| {
        for &v in d {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    });
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Model> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Format("checkpoint header is not terminated".into()))?;
    let header: CheckpointHeader =
        serde_json::from_slice(&bytes[..nl]).map_err(|e| Error::Format(format!("bad checkpoint header: {e}")))?;
    if header.format != CHECKPOINT_FORMAT || header.version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!("unsupported checkpoint {} v{}", header.format, header.version)));
    }
    header.encoder.validate()?;
    let mut model = Model { encoder: EncoderParams::zeros(&header.encoder), log_scale: 0.0 };
    let expected: Vec<TensorEntry> =
        model.layout().into_iter().map(|(name, shape)| TensorEntry { name, shape }).collect();
    if expected != header.tensors {
        return Err(Error::Format("checkpoint tensors do not match the encoder config".into()));
    }
    let body = &bytes[nl + 1..];
    let n = model.num_scalars();
    if body.len() != n * 4 {
        return Err(Error::Corrupt {
            offset: bytes.len() as u64,
            message: format!("checkpoint body has {} bytes, expected {}", body.len(), n * 4),
        });
    }
    let flat: Vec<f64> =
        body.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64).collect();
    model.load_flat(&flat)?;
    Ok(model)
}
