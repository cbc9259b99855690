use rand::Rng;

use crate::envmap::{direction_map, DirectionMap, EquirectMap};
use crate::error::{invalid, Result};
use crate::image::{LdrImage, RgbImage};
use crate::tonemap::{drop_log_channels, log_encode, reinhard_tonemap, LogImage};

/// Channel-interleaved image handed to an image-type backbone.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePayload {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl ImagePayload {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 || channels == 0 {
            return Err(invalid(format!("payload dimensions must be positive, got {width}x{height}x{channels}")));
        }
        if data.len() != width * height * channels {
            return Err(invalid("payload buffer length does not match its dimensions"));
        }
        Ok(Self { width, height, channels, data })
    }

    #[inline]
    pub fn pixel(&self, u: usize, v: usize) -> &[f32] {
        let start = (v * self.width + u) * self.channels;
        &self.data[start..start + self.channels]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Image(ImagePayload),
    Text(String),
}

pub fn rgb_payload(image: &RgbImage) -> ImagePayload {
    let data = image.channel_values().collect();
    ImagePayload { width: image.width(), height: image.height(), channels: 3, data }
}

/// The three environment-map encodings: tone-mapped LDR, log HDR and per-pixel direction.
#[derive(Debug, Clone)]
pub struct EnvmapInputs {
    pub ldr: LdrImage,
    pub log: LogImage,
    pub dir: DirectionMap,
}

impl EnvmapInputs {
    pub fn from_map(map: &EquirectMap, key: f64, gamma: f64, i_max: f64) -> Result<Self> {
        Ok(Self {
            ldr: reinhard_tonemap(map.image(), key, gamma)?,
            log: log_encode(map.image(), i_max)?,
            dir: direction_map(map.width(), map.height())?,
        })
    }

    pub fn with_log_dropout<R: Rng + ?Sized>(&self, probability: f64, rng: &mut R) -> Result<Self> {
        Ok(Self { log: drop_log_channels(&self.log, probability, rng)?, ..self.clone() })
    }

    /// Nine channels per pixel: `ldr.rgb, log.rgb, dir.xyz`.
    pub fn to_payload(&self) -> ImagePayload {
        let (w, h) = (self.ldr.width(), self.ldr.height());
        let mut data = Vec::with_capacity(w * h * 9);
        for v in 0..h {
            for u in 0..w {
                data.extend_from_slice(&self.ldr.image().get(u, v));
                data.extend_from_slice(&self.log.image().get(u, v));
                let d = self.dir.get(u, v);
                data.extend_from_slice(&[d.x as f32, d.y as f32, d.z as f32]);
            }
        }
        ImagePayload { width: w, height: h, channels: 9, data }
    }
}

pub fn envmap_payload(map: &EquirectMap, key: f64, gamma: f64, i_max: f64) -> Result<ImagePayload> {
    Ok(EnvmapInputs::from_map(map, key, gamma, i_max)?.to_payload())
}
