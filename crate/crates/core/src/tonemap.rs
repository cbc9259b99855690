//! HDR to encoder-input conversions.

use rand::Rng;

use crate::error::{invalid, Result};
use crate::image::{luminance, LdrImage, RgbImage};

pub const DEFAULT_KEY: f64 = 0.35;
pub const DEFAULT_GAMMA: f64 = 2.2;
pub const DEFAULT_I_MAX: f64 = 1000.0;
pub const DEFAULT_LOG_DROPOUT: f64 = 0.5;

const LOG_AVG_DELTA: f64 = 1e-6;

/// Global Reinhard operator with log-average auto exposure, followed by gamma.
pub fn reinhard_tonemap(image: &RgbImage, key: f64, gamma: f64) -> Result<LdrImage> {
    if !(key > 0.0) {
        return Err(invalid(format!("key must be positive, got {key}")));
    }
    if !(gamma > 0.0) {
        return Err(invalid(format!("gamma must be positive, got {gamma}")));
    }
    if let Some(bad) = image.channel_values().find(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(invalid(format!("radiance {bad} is negative or non-finite")));
    }
    let n = image.pixels().len() as f64;
    let log_sum: f64 = image.pixels().iter().map(|&p| (LOG_AVG_DELTA + luminance(p)).ln()).sum();
    let log_avg = (log_sum / n).exp();
    let exposure = key / log_avg;
    let inv_gamma = 1.0 / gamma;
    let out = image.map(|p| {
        let lum = luminance(p);
        let scaled = exposure * lum;
        let display = scaled / (1.0 + scaled);
        let ratio = display / lum.max(LOG_AVG_DELTA);
        p.map(|c| ((c as f64 * ratio).clamp(0.0, 1.0)).powf(inv_gamma) as f32)
    });
    LdrImage::new(out)
}

/// Logarithmic HDR encoding in `[0, 1]`; `dropped` marks a zeroed (dropout) copy.
#[derive(Debug, Clone, PartialEq)]
pub struct LogImage {
    image: RgbImage,
    dropped: bool,
}

impl LogImage {
    pub fn image(&self) -> &RgbImage {
        &self.image
    }

    pub fn dropped(&self) -> bool {
        self.dropped
    }
}

/// `ln(min(v, i_max - 1) + 1) / ln(i_max)` per channel.
pub fn log_encode(image: &RgbImage, i_max: f64) -> Result<LogImage> {
    if !(i_max > 1.0) || !i_max.is_finite() {
        return Err(invalid(format!("i_max must be a finite value > 1, got {i_max}")));
    }
    if let Some(bad) = image.channel_values().find(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(invalid(format!("radiance {bad} is negative or non-finite")));
    }
    let norm = i_max.ln();
    let clip = i_max - 1.0;
    let out = image.map(|p| p.map(|c| ((c as f64).min(clip).ln_1p() / norm).clamp(0.0, 1.0) as f32));
    Ok(LogImage { image: out, dropped: false })
}

/// Zeroes the whole log encoding with the given probability.
/// Always consumes exactly one draw from `rng`.
pub fn drop_log_channels<R: Rng + ?Sized>(log: &LogImage, probability: f64, rng: &mut R) -> Result<LogImage> {
    if !(0.0..=1.0).contains(&probability) {
        return Err(invalid(format!("dropout probability {probability} outside [0, 1]")));
    }
    let draw: f64 = rng.gen();
    if draw < probability {
        Ok(LogImage { image: log.image.map(|_| [0.0; 3]), dropped: true })
    } else {
        Ok(log.clone())
    }
}
