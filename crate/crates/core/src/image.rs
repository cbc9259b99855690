//! Raster containers shared by the geometry, tone mapping and metric code.

use crate::error::{invalid, Result};

/// Interleaved RGB raster of linear or display-referred values.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<[f32; 3]>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<[f32; 3]>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(invalid(format!("image dimensions must be positive, got {width}x{height}")));
        }
        if data.len() != width * height {
            return Err(invalid(format!(
                "pixel buffer has {} entries, expected {}",
                data.len(),
                width * height
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: [f32; 3]) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [f32; 3]) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for v in 0..height {
            for u in 0..width {
                data.push(f(u, v));
            }
        }
        Self::new(width, height, data)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn pixels(&self) -> &[[f32; 3]] {
        &self.data
    }

    #[inline]
    pub fn pixels_mut(&mut self) -> &mut [[f32; 3]] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> [f32; 3] {
        self.data[v * self.width + u]
    }

    #[inline]
    pub fn set(&mut self, u: usize, v: usize, value: [f32; 3]) {
        self.data[v * self.width + u] = value;
    }

    pub fn into_pixels(self) -> Vec<[f32; 3]> {
        self.data
    }

    pub fn map(&self, f: impl Fn([f32; 3]) -> [f32; 3]) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&p| f(p)).collect(),
        }
    }

    pub fn scaled(&self, s: f32) -> Self {
        self.map(|[r, g, b]| [r * s, g * s, b * s])
    }

    /// Channel values in row-major, channel-interleaved order.
    pub fn channel_values(&self) -> impl Iterator<Item = f32> + '_ {
        self.data.iter().flat_map(|p| p.iter().copied())
    }
}

/// Display-referred image with every channel in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LdrImage(RgbImage);

impl LdrImage {
    pub fn new(image: RgbImage) -> Result<Self> {
        if let Some(bad) = image.channel_values().find(|v| !(0.0..=1.0).contains(v)) {
            return Err(invalid(format!("LDR value {bad} outside [0, 1]")));
        }
        Ok(Self(image))
    }

    pub fn image(&self) -> &RgbImage {
        &self.0
    }

    pub fn into_inner(self) -> RgbImage {
        self.0
    }

    pub fn width(&self) -> usize {
        self.0.width()
    }

    pub fn height(&self) -> usize {
        self.0.height()
    }
}

/// Rec.709 luminance.
#[inline]
pub fn luminance([r, g, b]: [f32; 3]) -> f64 {
    0.2126 * r as f64 + 0.7152 * g as f64 + 0.0722 * b as f64
}

pub const LUMA_WEIGHTS: [f64; 3] = [0.2126, 0.7152, 0.0722];
