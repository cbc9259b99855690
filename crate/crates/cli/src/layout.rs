//! On-disk layout of a generated dataset.
//!
//! ```text
//! <out>/manifest.json
//! <out>/<panorama>/crop_00.png .. crop_08.png   tone-mapped crops
//! <out>/<panorama>/envmap.pfm                   linear radiance at the payload width
//! <out>/<panorama>/envmap_ldr.png               tone-mapped encoding
//! <out>/<panorama>/envmap_log.pfm               log encoding
//! <out>/<panorama>/envmap_dir.pfm               per-pixel unit directions
//! <out>/<panorama>/irradiance.pfm               diffuse response of the SH fit
//! <out>/<panorama>/sh.json                      SH ground truth, panorama frame
//! <out>/<panorama>/lights.json                  detected lights
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use unilight_core::dataset::{crop_sample, process_panorama, LightingFrame, PanoramaArtifacts};
use unilight_core::io::{
    load_json, load_ldr_image, load_radiance_map, load_sh, save_json, save_ldr_image, save_radiance_image, save_sh,
    LightsDocument,
};
use unilight_core::tonemap::log_encode;
use unilight_core::{EquirectMap, Error, PipelineConfig, Result, RgbImage, Sample};

pub const MANIFEST: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleEntry {
    pub id: String,
    /// Crop file relative to the panorama directory.
    pub crop: String,
    pub yaw: f64,
    pub fov: f64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanoramaEntry {
    pub name: String,
    /// File name of the source panorama.
    pub source: String,
    pub light_count: usize,
    pub samples: Vec<SampleEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    pub panoramas: Vec<PanoramaEntry>,
}

fn is_radiance_file(p: &Path) -> bool {
    p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("hdr") || e.eq_ignore_ascii_case("pfm"))
}

/// `.hdr` / `.pfm` files directly inside `dir`, sorted by file name.
pub fn list_panoramas(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir)? {
        let p = entry?.path();
        if is_radiance_file(&p) {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

/// Expands directories to their panoramas; files are kept as given.
pub fn expand_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            out.extend(list_panoramas(p)?);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

pub fn panorama_name(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn direction_image(map: &EquirectMap) -> Result<RgbImage> {
    let dirs = unilight_core::envmap::direction_map(map.width(), map.height())?;
    RgbImage::new(map.width(), map.height(), dirs.directions().iter().map(|d| [d.x as f32, d.y as f32, d.z as f32]).collect())
}

pub fn crop_file(index: usize) -> String {
    format!("crop_{index:02}.png")
}

fn write_artifacts(dir: &Path, a: &PanoramaArtifacts, config: &PipelineConfig) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (i, (_, img)) in a.crops.iter().enumerate() {
        save_ldr_image(img, &dir.join(crop_file(i)))?;
    }
    let env = &a.frame.envmap;
    let t = &config.tonemap;
    save_radiance_image(env.image(), &dir.join("envmap.pfm"))?;
    save_ldr_image(&unilight_core::tonemap::reinhard_tonemap(env.image(), t.key, t.gamma)?, &dir.join("envmap_ldr.png"))?;
    save_radiance_image(log_encode(env.image(), t.i_max)?.image(), &dir.join("envmap_log.pfm"))?;
    save_radiance_image(&direction_image(env)?, &dir.join("envmap_dir.pfm"))?;
    save_radiance_image(a.frame.irradiance.image(), &dir.join("irradiance.pfm"))?;
    save_sh(&a.frame.sh, &dir.join("sh.json"))?;
    save_json(&LightsDocument::new(a.threshold, &a.lights), &dir.join("lights.json"))
}

/// Processes one panorama and writes its directory; returns its manifest entry.
pub fn build_panorama(source: &Path, out: &Path, config: &PipelineConfig) -> Result<PanoramaEntry> {
    let name = panorama_name(source);
    let map = load_radiance_map(source).map_err(|e| Error::Format(format!("{}: {e}", source.display())))?;
    let artifacts = process_panorama(&map, config)?;
    write_artifacts(&out.join(&name), &artifacts, config)?;
    let samples = artifacts
        .crops
        .iter()
        .zip(&artifacts.descriptions)
        .enumerate()
        .map(|(i, ((spec, _), text))| SampleEntry {
            id: format!("{name}/{i:02}"),
            crop: crop_file(i),
            yaw: spec.yaw,
            fov: spec.fov,
            text: text.clone(),
        })
        .collect();
    Ok(PanoramaEntry {
        name,
        source: source.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
        light_count: artifacts.lights.len(),
        samples,
    })
}

/// Builds the whole dataset, one panorama per worker task.
pub fn build_dataset(sources: &[PathBuf], out: &Path, config: &PipelineConfig) -> Result<DatasetManifest> {
    let mut names: Vec<String> = sources.iter().map(|p| panorama_name(p)).collect();
    names.sort();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::InvalidArgument(format!("two panoramas share the name '{}'", w[0])));
    }
    let panoramas = sources.par_iter().map(|p| build_panorama(p, out, config)).collect::<Result<Vec<_>>>()?;
    let manifest = DatasetManifest { version: MANIFEST_VERSION, panoramas };
    save_json(&manifest, &out.join(MANIFEST))?;
    Ok(manifest)
}

pub fn load_manifest(dataset: &Path) -> Result<DatasetManifest> {
    let m: DatasetManifest = load_json(&dataset.join(MANIFEST))?;
    if m.version != MANIFEST_VERSION {
        return Err(Error::Format(format!("unsupported dataset manifest version {}", m.version)));
    }
    Ok(m)
}

fn load_panorama_samples(dataset: &Path, entry: &PanoramaEntry, config: &PipelineConfig) -> Result<Vec<Sample>> {
    let dir = dataset.join(&entry.name);
    let frame = LightingFrame {
        envmap: load_radiance_map(&dir.join("envmap.pfm"))?,
        irradiance: load_radiance_map(&dir.join("irradiance.pfm"))?,
        sh: load_sh(&dir.join("sh.json"))?,
    };
    entry
        .samples
        .iter()
        .map(|s| {
            let crop = load_ldr_image(&dir.join(&s.crop))?;
            crop_sample((s.id.clone(), entry.name.clone()), s.yaw, &crop, &frame, s.text.clone(), config)
        })
        .collect()
}

/// Every crop of the dataset as a training sample, in manifest order.
pub fn load_samples(dataset: &Path, config: &PipelineConfig) -> Result<Vec<Sample>> {
    let manifest = load_manifest(dataset)?;
    let per_panorama = manifest
        .panoramas
        .par_iter()
        .map(|p| load_panorama_samples(dataset, p, config))
        .collect::<Result<Vec<_>>>()?;
    let samples: Vec<Sample> = per_panorama.into_iter().flatten().collect();
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(samples)
}
