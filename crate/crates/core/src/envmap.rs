//! Equirectangular panorama geometry.
//!
//! Convention: y is up, longitude grows with the column index and the
//! image center (u-fraction 0.5) faces +z. A pixel center at
//! `((u + 0.5) / W, (v + 0.5) / H)` has longitude
//! `λ = ((u + 0.5) / W - 0.5) · 2π` and polar angle `θ = ((v + 0.5) / H) · π`,
//! giving the direction `(sinθ sinλ, cosθ, sinθ cosλ)`.

use std::f64::consts::PI;

use nalgebra::Vector3;

use crate::error::{invalid, Result};
use crate::image::RgbImage;

pub type Vec3 = Vector3<f64>;

/// Linear-radiance HDR panorama in latitude-longitude layout (`width = 2 * height`).
#[derive(Debug, Clone, PartialEq)]
pub struct EquirectMap(RgbImage);

impl EquirectMap {
    pub fn new(image: RgbImage) -> Result<Self> {
        if image.width() != 2 * image.height() {
            return Err(invalid(format!(
                "equirectangular map must be 2:1, got {}x{}",
                image.width(),
                image.height()
            )));
        }
        if let Some(bad) = image.channel_values().find(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(invalid(format!("radiance value {bad} is negative or non-finite")));
        }
        Ok(Self(image))
    }

    /// Builds a map by evaluating `f` at every pixel-center direction.
    pub fn from_direction_fn(width: usize, height: usize, f: impl Fn(Vec3) -> [f32; 3]) -> Result<Self> {
        check_dims(width, height)?;
        let image = RgbImage::from_fn(width, height, |u, v| f(pixel_direction(u, v, width, height)))?;
        Self::new(image)
    }

    pub fn constant(width: usize, height: usize, value: [f32; 3]) -> Result<Self> {
        Self::new(RgbImage::filled(width, height, value)?)
    }

    pub fn image(&self) -> &RgbImage {
        &self.0
    }

    pub fn into_image(self) -> RgbImage {
        self.0
    }

    pub fn width(&self) -> usize {
        self.0.width()
    }

    pub fn height(&self) -> usize {
        self.0.height()
    }

    /// Bilinear lookup at continuous pixel coordinates (pixel centers at integers),
    /// wrapping in longitude and clamping at the poles.
    pub fn sample_pixel(&self, u: f64, v: f64) -> [f32; 3] {
        let w = self.width();
        let h = self.height();
        let v = v.clamp(0.0, (h - 1) as f64);
        let u0 = u.floor();
        let v0 = v.floor();
        let fu = u - u0;
        let fv = v - v0;
        let iu0 = (u0 as i64).rem_euclid(w as i64) as usize;
        let iu1 = (iu0 + 1) % w;
        let iv0 = v0 as usize;
        let iv1 = (iv0 + 1).min(h - 1);
        let img = &self.0;
        let mut out = [0.0f32; 3];
        let p00 = img.get(iu0, iv0);
        let p10 = img.get(iu1, iv0);
        let p01 = img.get(iu0, iv1);
        let p11 = img.get(iu1, iv1);
        for c in 0..3 {
            let top = p00[c] as f64 * (1.0 - fu) + p10[c] as f64 * fu;
            let bottom = p01[c] as f64 * (1.0 - fu) + p11[c] as f64 * fu;
            out[c] = (top * (1.0 - fv) + bottom * fv) as f32;
        }
        out
    }

    /// Bilinear lookup of the radiance arriving from `dir` (need not be normalized).
    pub fn sample_direction(&self, dir: &Vec3) -> [f32; 3] {
        let (u, v) = direction_to_pixel(dir, self.width(), self.height());
        self.sample_pixel(u, v)
    }
}

/// Per-pixel unit direction vectors of an equirectangular grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionMap {
    width: usize,
    height: usize,
    data: Vec<Vec3>,
}

impl DirectionMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, u: usize, v: usize) -> Vec3 {
        self.data[v * self.width + u]
    }

    pub fn directions(&self) -> &[Vec3] {
        &self.data
    }
}

/// Perspective crop parameters. Angles in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CropSpec {
    pub yaw: f64,
    pub fov: f64,
    pub size: usize,
}

impl CropSpec {
    pub const DEFAULT_FOV: f64 = 90.0;
    pub const DEFAULT_SIZE: usize = 512;
    pub const YAW_STEP: f64 = 40.0;
    pub const CROPS_PER_PANORAMA: usize = 9;

    pub fn new(yaw: f64, fov: f64, size: usize) -> Result<Self> {
        let spec = Self { yaw, fov, size };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.yaw.is_finite() {
            return Err(invalid("crop yaw must be finite"));
        }
        if !(self.fov > 0.0 && self.fov < 180.0) {
            return Err(invalid(format!("crop fov {} outside (0, 180)", self.fov)));
        }
        if self.size == 0 {
            return Err(invalid("crop size must be positive"));
        }
        Ok(())
    }

    /// The nine evenly spaced yaws `0, 40, ..., 320` at the given fov and size.
    pub fn panorama_ring(fov: f64, size: usize) -> Vec<CropSpec> {
        (0..Self::CROPS_PER_PANORAMA)
            .map(|i| CropSpec { yaw: i as f64 * Self::YAW_STEP, fov, size })
            .collect()
    }
}

impl Default for CropSpec {
    fn default() -> Self {
        Self { yaw: 0.0, fov: Self::DEFAULT_FOV, size: Self::DEFAULT_SIZE }
    }
}

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width < 2 || height < 1 {
        return Err(invalid(format!("equirect grid needs width >= 2 and height >= 1, got {width}x{height}")));
    }
    Ok(())
}

/// Longitude and polar angle (radians) of a pixel center.
#[inline]
pub fn pixel_angles(u: usize, v: usize, width: usize, height: usize) -> (f64, f64) {
    let lon = ((u as f64 + 0.5) / width as f64 - 0.5) * 2.0 * PI;
    let polar = (v as f64 + 0.5) / height as f64 * PI;
    (lon, polar)
}

#[inline]
pub fn angles_to_direction(lon: f64, polar: f64) -> Vec3 {
    let (sp, cp) = polar.sin_cos();
    let (sl, cl) = lon.sin_cos();
    Vec3::new(sp * sl, cp, sp * cl)
}

/// Longitude in `(-π, π]` and polar angle in `[0, π]` of a direction.
#[inline]
pub fn direction_to_angles(dir: &Vec3) -> (f64, f64) {
    let n = dir.norm();
    let lon = dir.x.atan2(dir.z);
    let polar = (dir.y / n).clamp(-1.0, 1.0).acos();
    (lon, polar)
}

#[inline]
pub fn pixel_direction(u: usize, v: usize, width: usize, height: usize) -> Vec3 {
    let (lon, polar) = pixel_angles(u, v, width, height);
    angles_to_direction(lon, polar)
}

/// Continuous pixel coordinates (centers at integers) hit by `dir`.
#[inline]
pub fn direction_to_pixel(dir: &Vec3, width: usize, height: usize) -> (f64, f64) {
    let (lon, polar) = direction_to_angles(dir);
    let u = (lon / (2.0 * PI) + 0.5) * width as f64 - 0.5;
    let v = polar / PI * height as f64 - 0.5;
    (u, v)
}

pub fn direction_map(width: usize, height: usize) -> Result<DirectionMap> {
    check_dims(width, height)?;
    let mut data = Vec::with_capacity(width * height);
    for v in 0..height {
        for u in 0..width {
            data.push(pixel_direction(u, v, width, height));
        }
    }
    Ok(DirectionMap { width, height, data })
}

/// Pinhole view of the panorama looking along `spec.yaw` with a level horizon.
/// The output stays in linear radiance.
pub fn extract_crop(map: &EquirectMap, spec: &CropSpec) -> Result<RgbImage> {
    spec.validate()?;
    let yaw = spec.yaw.to_radians();
    let forward = Vec3::new(yaw.sin(), 0.0, yaw.cos());
    // Screen-right follows increasing longitude so crops are not mirrored.
    let right = Vec3::new(yaw.cos(), 0.0, -yaw.sin());
    let up = Vec3::new(0.0, 1.0, 0.0);
    let half = (spec.fov.to_radians() * 0.5).tan();
    let n = spec.size;
    RgbImage::from_fn(n, n, |i, j| {
        let sx = ((i as f64 + 0.5) / n as f64 * 2.0 - 1.0) * half;
        let sy = (1.0 - (j as f64 + 0.5) / n as f64 * 2.0) * half;
        let ray = forward + right * sx + up * sy;
        map.sample_direction(&ray)
    })
}

/// The nine default crops (yaw 0..320 in 40 degree steps, 90 degree fov, 512 px).
pub fn crops_from_panorama(map: &EquirectMap) -> Result<Vec<(CropSpec, RgbImage)>> {
    crops_with(map, CropSpec::DEFAULT_FOV, CropSpec::DEFAULT_SIZE)
}

pub fn crops_with(map: &EquirectMap, fov: f64, size: usize) -> Result<Vec<(CropSpec, RgbImage)>> {
    CropSpec::panorama_ring(fov, size)
        .into_iter()
        .map(|spec| extract_crop(map, &spec).map(|img| (spec, img)))
        .collect()
}

/// Turns the panorama about the vertical axis: the returned map shows at
/// longitude `λ` what the input shows at `λ + angle`, so
/// `extract_crop(rotate_yaw(m, a), yaw = 0)` matches `extract_crop(m, yaw = a)`.
pub fn rotate_yaw(map: &EquirectMap, angle: f64) -> EquirectMap {
    let w = map.width();
    let h = map.height();
    let shift = (angle / 360.0 * w as f64).rem_euclid(w as f64);
    let whole = shift.floor();
    let frac = shift - whole;
    let whole = whole as usize % w;
    let src = map.image();
    let mut out = src.clone();
    for v in 0..h {
        for u in 0..w {
            let a = src.get((u + whole) % w, v);
            let value = if frac == 0.0 {
                a
            } else {
                let b = src.get((u + whole + 1) % w, v);
                let mut p = [0.0f32; 3];
                for c in 0..3 {
                    p[c] = (a[c] as f64 * (1.0 - frac) + b[c] as f64 * frac) as f32;
                }
                p
            };
            out.set(u, v, value);
        }
    }
    EquirectMap(out)
}

/// Per-pixel solid angle `sinθ · (2π / W) · (π / H)` in steradians, row-major.
pub fn solid_angle_weights(width: usize, height: usize) -> Result<Vec<f64>> {
    check_dims(width, height)?;
    let d_lon = 2.0 * PI / width as f64;
    let d_polar = PI / height as f64;
    let mut out = Vec::with_capacity(width * height);
    for v in 0..height {
        let (_, polar) = pixel_angles(0, v, width, height);
        let w = polar.sin() * d_lon * d_polar;
        out.extend(std::iter::repeat_n(w, width));
    }
    Ok(out)
}
