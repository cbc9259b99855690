//! Per-panorama dataset artifacts: tone-mapped crops, envmap encodings, an
//! SH-derived irradiance map, detected lights and a text description per crop.

use crate::encoder::{envmap_payload, rgb_payload, Payload};
use crate::envmap::{crops_with, rotate_yaw, CropSpec, EquirectMap};
use crate::error::{invalid, Result};
use crate::image::{LdrImage, RgbImage};
use crate::io::PipelineConfig;
use crate::learn::Sample;
use crate::lights::{detect_lights, find_threshold, LightSource};
use crate::sh::{dominant_direction, fit_sh, render_sh, rotate_sh_yaw, sh_index, ShCoefficients, SH_CHANNELS, SH_DEGREE};
use crate::tonemap::reinhard_tonemap;

/// Clamped-cosine convolution weights divided by π, per band.
pub const LAMBERT_BANDS: [f64; SH_DEGREE + 1] = [1.0, 2.0 / 3.0, 0.25, 0.0];

/// Panorama-frame lighting shared by all crops of one panorama.
#[derive(Debug, Clone)]
pub struct LightingFrame {
    /// Linear radiance resampled to the envmap payload width.
    pub envmap: EquirectMap,
    pub irradiance: EquirectMap,
    pub sh: ShCoefficients,
}

#[derive(Debug, Clone)]
pub struct PanoramaArtifacts {
    pub crops: Vec<(CropSpec, LdrImage)>,
    pub frame: LightingFrame,
    pub threshold: f64,
    pub lights: Vec<LightSource>,
    /// One description per crop, relative to the crop's viewing direction.
    pub descriptions: Vec<String>,
}

/// Area-weighted resampling to `width x width/2`.
pub fn resample_equirect(map: &EquirectMap, width: usize) -> Result<EquirectMap> {
    if width < 2 || !width.is_multiple_of(2) {
        return Err(invalid(format!("equirect width must be even and >= 2, got {width}")));
    }
    let height = width / 2;
    if (width, height) == (map.width(), map.height()) {
        return Ok(map.clone());
    }
    let cols = box_weights(map.width(), width);
    let rows = box_weights(map.height(), height);
    let src = map.image();
    let img = RgbImage::from_fn(width, height, |u, v| {
        let mut acc = [0.0f64; 3];
        for &(sv, wv) in &rows[v] {
            for &(su, wu) in &cols[u] {
                let p = src.get(su, sv);
                for c in 0..3 {
                    acc[c] += p[c] as f64 * wu * wv;
                }
            }
        }
        acc.map(|x| x as f32)
    })?;
    EquirectMap::new(img)
}

/// For each output cell, the source cells it covers and their normalized overlap.
fn box_weights(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    let step = src as f64 / dst as f64;
    (0..dst)
        .map(|i| {
            let (lo, hi) = (i as f64 * step, (i + 1) as f64 * step);
            let first = lo.floor() as usize;
            let last = (hi.ceil() as usize).min(src);
            (first..last)
                .map(|j| {
                    let overlap = (hi.min(j as f64 + 1.0) - lo.max(j as f64)).max(0.0);
                    (j, overlap / step)
                })
                .filter(|&(_, w)| w > 0.0)
                .collect()
        })
        .collect()
}

/// Coefficients of the diffuse (Lambertian, unit albedo) response to the lighting.
pub fn lambertian_sh(coeffs: &ShCoefficients) -> ShCoefficients {
    let mut out = *coeffs;
    for ch in out.channels.iter_mut() {
        for (l, a) in LAMBERT_BANDS.iter().enumerate() {
            for m in -(l as i64)..=(l as i64) {
                ch[sh_index(l, m)] *= a;
            }
        }
    }
    out
}

pub fn irradiance_map(coeffs: &ShCoefficients, width: usize) -> Result<EquirectMap> {
    render_sh(&lambertian_sh(coeffs), width, width / 2)?.to_map()
}

const ISOTROPIC_RATIO: f64 = 0.02;

const SECTORS: [&str; 8] = ["the front", "the front right", "the right", "the back right", "behind", "the back left", "the left", "the front left"];

/// Short caption of the dominant light as seen by a viewer facing +z:
/// tint, horizontal sector and elevation.
pub fn describe_lighting(coeffs: &ShCoefficients) -> String {
    let dc: [f64; SH_CHANNELS] = coeffs.channels.map(|ch| ch[0]);
    let linear = coeffs.channels.iter().flat_map(|ch| (1..4).map(move |i| ch[i] * ch[i])).sum::<f64>().sqrt();
    let d = match dominant_direction(coeffs) {
        // Quadrature leaves a little band-1 energy on a flat map.
        Ok(d) if linear > ISOTROPIC_RATIO * dc.iter().map(|x| x.abs()).sum::<f64>() => d,
        _ => return "soft even light with no clear direction".to_string(),
    };
    let tint = if dc[0] > 1.15 * dc[2] {
        "warm"
    } else if dc[2] > 1.15 * dc[0] {
        "cool"
    } else {
        "neutral"
    };
    let elevation = d.y.clamp(-1.0, 1.0).asin().to_degrees();
    if elevation > 75.0 {
        return format!("{tint} light from directly above");
    }
    let azimuth = d.x.atan2(d.z).to_degrees().rem_euclid(360.0);
    let sector = SECTORS[((azimuth + 22.5) / 45.0) as usize % 8];
    let height = match elevation {
        e if e < -10.0 => "below the horizon",
        e if e < 20.0 => "near the horizon",
        e if e < 45.0 => "low in the sky",
        _ => "high up",
    };
    format!("{tint} light from {sector}, {height}")
}

pub fn process_panorama(map: &EquirectMap, config: &PipelineConfig) -> Result<PanoramaArtifacts> {
    let t = &config.tonemap;
    let crops = crops_with(map, config.crops.fov, config.crops.size)?
        .into_iter()
        .map(|(spec, img)| Ok((spec, reinhard_tonemap(&img, t.key, t.gamma)?)))
        .collect::<Result<Vec<_>>>()?;
    let sh = fit_sh(map)?;
    let threshold = find_threshold(map, &config.lights)?;
    let lights = detect_lights(map, &config.lights)?;
    let descriptions = crops.iter().map(|(spec, _)| describe_lighting(&rotate_sh_yaw(&sh, spec.yaw))).collect();
    Ok(PanoramaArtifacts {
        crops,
        frame: LightingFrame {
            envmap: resample_equirect(map, config.dataset.envmap_width)?,
            irradiance: irradiance_map(&sh, config.dataset.irradiance_width)?,
            sh,
        },
        threshold,
        lights,
        descriptions,
    })
}

/// The training sample for the crop looking along `yaw`: envmap, irradiance
/// and SH are turned so the crop direction sits at the panorama center.
/// `id` is the sample id and its group.
pub fn crop_sample(
    id: (String, String),
    yaw: f64,
    crop: &LdrImage,
    frame: &LightingFrame,
    description: String,
    config: &PipelineConfig,
) -> Result<Sample> {
    let t = &config.tonemap;
    let env = envmap_payload(&rotate_yaw(&frame.envmap, yaw), t.key, t.gamma, t.i_max)?;
    let irr = reinhard_tonemap(rotate_yaw(&frame.irradiance, yaw).image(), t.key, t.gamma)?;
    Ok(Sample {
        id: id.0,
        group: id.1,
        payloads: [
            Payload::Image(env),
            Payload::Image(rgb_payload(crop.image())),
            Payload::Image(rgb_payload(irr.image())),
            Payload::Text(description),
        ],
        sh_gt: rotate_sh_yaw(&frame.sh, yaw),
    })
}
