//! Dominant light detection by stop-wise threshold search over connected
//! bright regions of an HDR panorama.

use serde::{Deserialize, Serialize};

use crate::envmap::{pixel_direction, solid_angle_weights, EquirectMap, Vec3};
use crate::error::{invalid, Error, Result};
use crate::image::luminance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Connectivity {
    #[serde(rename = "4")]
    Four,
    #[serde(rename = "8")]
    Eight,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LightDetectConfig {
    pub tau0: f64,
    pub min_region_pixels: usize,
    pub connectivity: Connectivity,
}

impl Default for LightDetectConfig {
    fn default() -> Self {
        Self { tau0: 4.0, min_region_pixels: 1, connectivity: Connectivity::Eight }
    }
}

impl LightDetectConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau0 > 0.0 && self.tau0.is_finite()) {
            return Err(invalid(format!("tau0 must be positive, got {}", self.tau0)));
        }
        if self.min_region_pixels == 0 {
            return Err(invalid("min_region_pixels must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LightSource {
    pub direction: Vec3,
    pub pixel: (usize, usize),
    pub peak_radiance: f64,
    /// Solid angle of the connected region, steradians.
    pub region_area: f64,
}

/// The `i`-th threshold of the sequence `tau0 / sqrt(2)^i`. Even steps are exact
/// powers of two so the half-stop sequence stays bit-reproducible.
pub fn threshold_at(tau0: f64, step: u32) -> f64 {
    let halvings = (step / 2) as i32;
    let base = tau0 * 2f64.powi(-halvings);
    if step.is_multiple_of(2) {
        base
    } else {
        base / std::f64::consts::SQRT_2
    }
}

fn luminance_plane(map: &EquirectMap) -> Vec<f64> {
    map.image().pixels().iter().map(|&p| luminance(p)).collect()
}

fn threshold_for(lum: &[f64], config: &LightDetectConfig) -> Result<f64> {
    config.validate()?;
    let max = lum.iter().copied().fold(0.0f64, f64::max);
    if !(max > 0.0) {
        return Err(Error::NoLight);
    }
    // A region of `min_region_pixels` may not exist even at tiny thresholds
    // when fewer positive pixels exist; fall back to the count of positive pixels.
    let positive = lum.iter().filter(|&&l| l > 0.0).count();
    let needed = config.min_region_pixels.min(positive);
    let mut step = 0;
    loop {
        let tau = threshold_at(config.tau0, step);
        if lum.iter().filter(|&&l| l > tau).count() >= needed {
            return Ok(tau);
        }
        step += 1;
    }
}

/// First `tau` of the half-stop sequence with enough pixels strictly above it.
pub fn find_threshold(map: &EquirectMap, config: &LightDetectConfig) -> Result<f64> {
    threshold_for(&luminance_plane(map), config)
}

/// Labels `mask` into connected components, treating the left and right borders
/// as adjacent. Returns one label per pixel (`usize::MAX` for background) and
/// the number of components.
pub fn label_components(mask: &[bool], width: usize, height: usize, connectivity: Connectivity) -> (Vec<usize>, usize) {
    const UNLABELED: usize = usize::MAX;
    let mut labels = vec![UNLABELED; mask.len()];
    let mut count = 0;
    let mut stack = Vec::new();
    let offsets: &[(i64, i64)] = match connectivity {
        Connectivity::Four => &[(-1, 0), (1, 0), (0, -1), (0, 1)],
        Connectivity::Eight => &[(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)],
    };
    for start in 0..mask.len() {
        if !mask[start] || labels[start] != UNLABELED {
            continue;
        }
        labels[start] = count;
        stack.push(start);
        while let Some(idx) = stack.pop() {
            let u = (idx % width) as i64;
            let v = (idx / width) as i64;
            for &(du, dv) in offsets {
                let nv = v + dv;
                if nv < 0 || nv >= height as i64 {
                    continue;
                }
                let nu = (u + du).rem_euclid(width as i64);
                let n = nv as usize * width + nu as usize;
                if mask[n] && labels[n] == UNLABELED {
                    labels[n] = count;
                    stack.push(n);
                }
            }
        }
        count += 1;
    }
    (labels, count)
}

/// Detects light sources as the brightest pixel of each wrap-aware connected
/// region above the threshold from [`find_threshold`], brightest first.
pub fn detect_lights(map: &EquirectMap, config: &LightDetectConfig) -> Result<Vec<LightSource>> {
    let lum = luminance_plane(map);
    let tau = threshold_for(&lum, config)?;
    let (w, h) = (map.width(), map.height());
    let mask: Vec<bool> = lum.iter().map(|&l| l > tau).collect();
    let (labels, count) = label_components(&mask, w, h, config.connectivity);
    let weights = solid_angle_weights(w, h)?;

    let mut peak: Vec<Option<usize>> = vec![None; count];
    let mut area = vec![0.0f64; count];
    let mut size = vec![0usize; count];
    for (i, &label) in labels.iter().enumerate() {
        if label == usize::MAX {
            continue;
        }
        area[label] += weights[i];
        size[label] += 1;
        match peak[label] {
            Some(p) if lum[p] >= lum[i] => {}
            _ => peak[label] = Some(i),
        }
    }
    // Regions below the size cutoff are dropped unless nothing would remain.
    let largest = size.iter().copied().max().unwrap_or(0);
    let min_size = config.min_region_pixels.min(largest);
    let mut lights: Vec<LightSource> = (0..count)
        .filter(|&c| size[c] >= min_size)
        .map(|c| {
            let i = peak[c].expect("every component has a pixel");
            let (u, v) = (i % w, i / w);
            LightSource {
                direction: pixel_direction(u, v, w, h),
                pixel: (u, v),
                peak_radiance: lum[i],
                region_area: area[c],
            }
        })
        .collect();
    lights.sort_by(|a, b| b.peak_radiance.total_cmp(&a.peak_radiance).then(a.pixel.cmp(&b.pixel)));
    Ok(lights)
}
