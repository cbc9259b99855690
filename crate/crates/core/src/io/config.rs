use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::encoder::EncoderConfig;
use crate::envmap::CropSpec;
use crate::error::{invalid, Error, Result};
use crate::evalkit::{SiRmseMode, DEFAULT_KS};
use crate::learn::LearnConfig;
use crate::lights::LightDetectConfig;
use crate::tonemap::{DEFAULT_GAMMA, DEFAULT_I_MAX, DEFAULT_KEY, DEFAULT_LOG_DROPOUT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSection {
    /// Directory of `.hdr` / `.pfm` panoramas.
    pub panoramas: Option<PathBuf>,
    /// Width the panorama is resampled to for the envmap payload.
    pub envmap_width: usize,
    /// Width of the stored irradiance map.
    pub irradiance_width: usize,
}

impl Default for DatasetSection {
    fn default() -> Self {
        Self { panoramas: None, envmap_width: 128, irradiance_width: 64 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CropSection {
    pub fov: f64,
    pub size: usize,
}

impl Default for CropSection {
    fn default() -> Self {
        Self { fov: CropSpec::DEFAULT_FOV, size: CropSpec::DEFAULT_SIZE }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TonemapSection {
    pub key: f64,
    pub gamma: f64,
    pub i_max: f64,
    pub log_dropout: f64,
}

impl Default for TonemapSection {
    fn default() -> Self {
        Self { key: DEFAULT_KEY, gamma: DEFAULT_GAMMA, i_max: DEFAULT_I_MAX, log_dropout: DEFAULT_LOG_DROPOUT }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub ks: Vec<usize>,
    pub si_rmse: SiRmseMode,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self { ks: DEFAULT_KS.to_vec(), si_rmse: SiRmseMode::Linear }
    }
}

/// Everything a pipeline run can be configured with; every section and key
/// is optional and unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub dataset: DatasetSection,
    pub crops: CropSection,
    pub tonemap: TonemapSection,
    pub lights: LightDetectConfig,
    pub encoder: EncoderConfig,
    pub learn: LearnConfig,
    pub eval: EvalSection,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Format(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        CropSpec::new(0.0, self.crops.fov, self.crops.size)?;
        let t = &self.tonemap;
        if !(t.key > 0.0 && t.key <= 1.0) || !(t.gamma > 0.0) || !(t.i_max > 1.0) || !(0.0..=1.0).contains(&t.log_dropout) {
            return Err(invalid("tonemap constants out of range (0 < key <= 1, gamma > 0, i_max > 1)"));
        }
        if self.dataset.envmap_width < 2 || !self.dataset.envmap_width.is_multiple_of(2) {
            return Err(invalid("dataset.envmap_width must be an even number >= 2"));
        }
        if self.dataset.irradiance_width < 2 || !self.dataset.irradiance_width.is_multiple_of(2) {
            return Err(invalid("dataset.irradiance_width must be an even number >= 2"));
        }
        if self.eval.ks.is_empty() || self.eval.ks.contains(&0) {
            return Err(invalid("eval.ks must list positive K values"));
        }
        self.lights.validate()?;
        self.encoder.validate()?;
        self.learn.validate()
    }
}
