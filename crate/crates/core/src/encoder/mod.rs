//! The lighting encoder: frozen stub backbones per modality, a query-token
//! fusion module mapping backbone features to a `T x D` embedding, and an
//! SH prediction head.

mod backbone;
mod fusion;
mod head;
mod params;
mod payload;

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub use backbone::{stub_backbone, BACKBONE_DIM, PATCH_GRID, TEXT_TOKENS};
pub use fusion::{fusion_backward, fusion_forward, fusion_forward_cached, FusionCache, FusionParams};
pub use head::{predict_sh, sh_head_backward, sh_head_forward, ShHeadCache, ShHeadParams, SH_OUTPUTS};
pub use params::{init_params, EncoderParams, TensorSet};
pub use payload::{envmap_payload, rgb_payload, EnvmapInputs, ImagePayload, Payload};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Envmap,
    Image,
    Irradiance,
    Text,
}

impl Modality {
    pub const ALL: [Modality; 4] = [Modality::Envmap, Modality::Image, Modality::Irradiance, Modality::Text];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Modality::Envmap => "envmap",
            Modality::Image => "image",
            Modality::Irradiance => "irradiance",
            Modality::Text => "text",
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| invalid(format!("unknown modality {s:?}")))
    }
}

/// Shapes and switches of the encoder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncoderConfig {
    /// Number of query tokens `T`.
    pub tokens: usize,
    /// Embedding width `D`.
    pub dim: usize,
    /// Internal attention width.
    pub model_dim: usize,
    pub heads: usize,
    pub head_hidden: usize,
    /// Add the query tokens back before layer normalization.
    pub residual: bool,
    /// One SH head for all modalities instead of one per modality.
    pub shared_sh_head: bool,
    pub sh_head_bias: bool,
    /// Seed of the frozen stub backbones.
    pub backbone_seed: u64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            tokens: 8,
            dim: 512,
            model_dim: 64,
            heads: 4,
            head_hidden: 256,
            residual: true,
            shared_sh_head: true,
            sh_head_bias: true,
            backbone_seed: 0x00C0_FFEE,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tokens == 0 || self.dim == 0 || self.model_dim == 0 || self.heads == 0 || self.head_hidden == 0 {
            return Err(invalid("encoder dimensions must all be positive"));
        }
        if !self.model_dim.is_multiple_of(self.heads) {
            return Err(invalid(format!(
                "model_dim {} is not divisible by heads {}",
                self.model_dim, self.heads
            )));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.model_dim / self.heads
    }
}

/// Token features emitted by a stub backbone.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    pub tokens: Array2<f64>,
    pub modality: Modality,
    /// Set for empty text, whose sequence is all zeros.
    pub empty: bool,
}

/// Joint-latent tokens for one sample and modality.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub tokens: Array2<f64>,
    pub modality: Modality,
    pub id: String,
}

impl Embedding {
    pub fn flat(&self) -> &[f64] {
        self.tokens.as_slice().expect("embedding tokens are contiguous")
    }

    /// Flattened and L2-normalized, or `None` for a zero vector.
    pub fn unit_vector(&self) -> Option<Vec<f64>> {
        let v = self.flat();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        (n > 0.0 && n.is_finite()).then(|| v.iter().map(|x| x / n).collect())
    }
}

/// Cosine similarity of two flattened embeddings (0 if either is zero).
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Stub backbone followed by the modality's fusion module.
pub fn encode(
    params: &EncoderParams,
    payload: &Payload,
    modality: Modality,
    id: impl Into<String>,
) -> Result<Embedding> {
    let features = stub_backbone(payload, modality, params.config.backbone_seed)?;
    let mut emb = fusion_forward(params.fusion(modality), &features, &params.config)?;
    emb.id = id.into();
    Ok(emb)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modality_names_round_trip() {
        for m in Modality::ALL {
            assert_eq!(m.name().parse::<Modality>().unwrap(), m);
            assert_eq!(Modality::from_index(m.index()), Some(m));
        }
        assert!("audio".parse::<Modality>().is_err());
    }

    #[test]
    fn config_validation() {
        assert!(EncoderConfig::default().validate().is_ok());
        let bad = EncoderConfig { model_dim: 30, heads: 4, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = EncoderConfig { tokens: 0, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
