//! File formats: HDR panoramas (PFM, RGBE), PNG, embedding stores,
//! checkpoints, configs and JSON documents.

mod checkpoint;
mod config;
mod header;
mod pfm;
mod png;
mod rgbe;
mod store;

pub use self::png::{decode_png, encode_png, quantize};
pub use checkpoint::{decode_checkpoint, encode_checkpoint, CheckpointHeader, TensorEntry};
pub use config::{CropSection, DatasetSection, EvalSection, PipelineConfig, TonemapSection};
pub use pfm::{decode_pfm, encode_pfm};
pub use rgbe::{decode_hdr, encode_hdr, float_to_rgbe, rgbe_to_float};
pub use store::{EmbeddingStore, STORE_HEADER_LEN, STORE_MAGIC, STORE_VERSION};

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::envmap::EquirectMap;
use crate::error::{Error, Result};
use crate::image::{LdrImage, RgbImage};
use crate::learn::Model;
use crate::lights::LightSource;
use crate::sh::{ShCoefficients, ShDocument};

/// Writes through a temporary sibling file and renames it into place.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().ok_or_else(|| Error::InvalidArgument(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}

/// Decodes a PFM or Radiance HDR image, chosen by the file's magic bytes.
pub fn decode_radiance(bytes: &[u8]) -> Result<RgbImage> {
    if bytes.starts_with(b"PF") || bytes.starts_with(b"Pf") {
        decode_pfm(bytes)
    } else if bytes.starts_with(b"#?") {
        decode_hdr(bytes)
    } else {
        Err(Error::Format("unknown radiance file magic".into()))
    }
}

pub fn load_radiance_map(path: &Path) -> Result<EquirectMap> {
    EquirectMap::new(decode_radiance(&fs::read(path)?)?)
}

pub fn load_radiance_image(path: &Path) -> Result<RgbImage> {
    decode_radiance(&fs::read(path)?)
}

/// Saves as PFM when the extension is `.pfm`, Radiance HDR otherwise.
pub fn save_radiance_image(image: &RgbImage, path: &Path) -> Result<()> {
    let is_pfm = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pfm"));
    let bytes = if is_pfm { encode_pfm(image) } else { encode_hdr(image)? };
    atomic_write(path, &bytes)
}

pub fn save_ldr_image(image: &LdrImage, path: &Path) -> Result<()> {
    atomic_write(path, &encode_png(image)?)
}

pub fn load_ldr_image(path: &Path) -> Result<LdrImage> {
    decode_png(&fs::read(path)?)
}

pub fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

pub fn load_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    serde_json::from_slice(&fs::read(path)?).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

pub fn save_sh(coeffs: &ShCoefficients, path: &Path) -> Result<()> {
    save_json(&coeffs.to_document(), path)
}

pub fn load_sh(path: &Path) -> Result<ShCoefficients> {
    ShCoefficients::from_document(&load_json::<ShDocument>(path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LightRecord {
    pub direction: [f64; 3],
    pub pixel: [usize; 2],
    pub peak_radiance: f64,
    pub region_area: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LightsDocument {
    pub threshold: f64,
    pub lights: Vec<LightRecord>,
}

impl LightsDocument {
    pub fn new(threshold: f64, lights: &[LightSource]) -> Self {
        Self {
            threshold,
            lights: lights
                .iter()
                .map(|l| LightRecord {
                    direction: [l.direction.x, l.direction.y, l.direction.z],
                    pixel: [l.pixel.0, l.pixel.1],
                    peak_radiance: l.peak_radiance,
                    region_area: l.region_area,
                })
                .collect(),
        }
    }
}

pub fn save_checkpoint(model: &Model, path: &Path) -> Result<()> {
    atomic_write(path, &encode_checkpoint(model)?)
}

pub fn load_checkpoint(path: &Path) -> Result<Model> {
    decode_checkpoint(&fs::read(path)?)
}

pub fn save_store(store: &EmbeddingStore, path: &Path) -> Result<()> {
    atomic_write(path, &store.encode()?)
}

pub fn load_store(path: &Path) -> Result<EmbeddingStore> {
    EmbeddingStore::decode(&fs::read(path)?)
}
