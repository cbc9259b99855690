//! Real spherical harmonics up to degree 3.
//!
//! Coefficient `i = l(l+1) + m` for `l in 0..=3`, `m in -l..=l`. The basis is
//! orthonormal, without the Condon-Shortley phase, and is evaluated directly
//! on the y-up `(x, y, z)` coordinates of [`crate::envmap`].

use std::sync::OnceLock;

use nalgebra::{DMatrix, Rotation3};
use serde::{Deserialize, Serialize};

use crate::envmap::{direction_map, solid_angle_weights, EquirectMap, Vec3};
use crate::error::{invalid, Error, Result};
use crate::image::{RgbImage, LUMA_WEIGHTS};

pub const SH_DEGREE: usize = 3;
pub const SH_COUNT: usize = (SH_DEGREE + 1) * (SH_DEGREE + 1);
pub const SH_CHANNELS: usize = 3;
pub const SH_BASIS_NAME: &str = "real-orthonormal-yup";

#[inline]
pub const fn sh_index(l: usize, m: i64) -> usize {
    ((l * (l + 1)) as i64 + m) as usize
}

/// 16 coefficients per RGB channel.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ShCoefficients {
    pub channels: [[f64; SH_COUNT]; SH_CHANNELS],
}

impl ShCoefficients {
    pub fn zeros() -> Self {
        Self::default()
    }

    /// Channel-major flat view (`channel * 16 + i`).
    pub fn to_flat(&self) -> [f64; SH_CHANNELS * SH_COUNT] {
        let mut out = [0.0; SH_CHANNELS * SH_COUNT];
        for (c, ch) in self.channels.iter().enumerate() {
            out[c * SH_COUNT..(c + 1) * SH_COUNT].copy_from_slice(ch);
        }
        out
    }

    pub fn from_flat(flat: &[f64]) -> Result<Self> {
        if flat.len() != SH_CHANNELS * SH_COUNT {
            return Err(Error::ShapeMismatch(format!("expected 48 SH values, got {}", flat.len())));
        }
        let mut out = Self::zeros();
        for c in 0..SH_CHANNELS {
            out.channels[c].copy_from_slice(&flat[c * SH_COUNT..(c + 1) * SH_COUNT]);
        }
        out.validate()?;
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels.iter().flatten().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(invalid("SH coefficients must be finite"))
        }
    }

    pub fn norm(&self) -> f64 {
        self.channels.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn to_document(&self) -> ShDocument {
        ShDocument {
            degree: SH_DEGREE,
            channels: self.channels.iter().map(|c| c.to_vec()).collect(),
            basis: SH_BASIS_NAME.to_owned(),
        }
    }

    pub fn from_document(doc: &ShDocument) -> Result<Self> {
        if doc.degree != SH_DEGREE {
            return Err(Error::Format(format!("unsupported SH degree {}", doc.degree)));
        }
        if doc.basis != SH_BASIS_NAME {
            return Err(Error::Format(format!("unsupported SH basis {:?}", doc.basis)));
        }
        if doc.channels.len() != SH_CHANNELS || doc.channels.iter().any(|c| c.len() != SH_COUNT) {
            return Err(Error::Format("SH document must hold 3 channels of 16 values".into()));
        }
        let flat: Vec<f64> = doc.channels.iter().flatten().copied().collect();
        Self::from_flat(&flat)
    }
}

/// Serialized form of [`ShCoefficients`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShDocument {
    pub degree: usize,
    pub channels: Vec<Vec<f64>>,
    pub basis: String,
}

/// Basis values without the unit-length check.
#[inline]
pub fn sh_basis_unchecked(d: &Vec3) -> [f64; SH_COUNT] {
    const C0: f64 = 0.282_094_791_773_878_14;
    const C1: f64 = 0.488_602_511_902_919_9;
    const C2A: f64 = 1.092_548_430_592_079_2;
    const C2B: f64 = 0.315_391_565_252_520_05;
    const C2C: f64 = 0.546_274_215_296_039_6;
    const C3A: f64 = 0.590_043_589_926_643_5;
    const C3B: f64 = 2.890_611_442_640_554;
    const C3C: f64 = 0.457_045_799_464_465_8;
    const C3D: f64 = 0.373_176_332_590_115_4;
    const C3E: f64 = 1.445_305_721_320_277;
    let (x, y, z) = (d.x, d.y, d.z);
    let (x2, y2, z2) = (x * x, y * y, z * z);
    [
        C0,
        C1 * y,
        C1 * z,
        C1 * x,
        C2A * x * y,
        C2A * y * z,
        C2B * (3.0 * z2 - 1.0),
        C2A * x * z,
        C2C * (x2 - y2),
        C3A * y * (3.0 * x2 - y2),
        C3B * x * y * z,
        C3C * y * (5.0 * z2 - 1.0),
        C3D * z * (5.0 * z2 - 3.0),
        C3C * x * (5.0 * z2 - 1.0),
        C3E * z * (x2 - y2),
        C3A * x * (x2 - 3.0 * y2),
    ]
}

pub fn sh_basis(direction: &Vec3) -> Result<[f64; SH_COUNT]> {
    let n = direction.norm();
    if !((n - 1.0).abs() <= 1e-6) {
        return Err(invalid(format!("SH basis needs a unit direction, got norm {n}")));
    }
    Ok(sh_basis_unchecked(direction))
}

/// Riemann projection of the map onto the basis using per-pixel solid angles.
pub fn fit_sh(map: &EquirectMap) -> Result<ShCoefficients> {
    let (w, h) = (map.width(), map.height());
    let dirs = direction_map(w, h)?;
    let weights = solid_angle_weights(w, h)?;
    let mut out = ShCoefficients::zeros();
    for ((d, &wt), px) in dirs.directions().iter().zip(&weights).zip(map.image().pixels()) {
        let y = sh_basis_unchecked(d);
        for c in 0..SH_CHANNELS {
            let s = px[c] as f64 * wt;
            for (acc, yi) in out.channels[c].iter_mut().zip(&y) {
                *acc += s * yi;
            }
        }
    }
    Ok(out)
}

/// Reconstructed radiance at one direction (may be negative).
pub fn eval_sh(coeffs: &ShCoefficients, direction: &Vec3) -> [f64; SH_CHANNELS] {
    let y = sh_basis_unchecked(direction);
    coeffs.channels.map(|ch| ch.iter().zip(&y).map(|(c, b)| c * b).sum())
}

/// A reconstruction on a lat-long grid. Values keep their sign; clamp on export.
#[derive(Debug, Clone, PartialEq)]
pub struct ShRender {
    pub width: usize,
    pub height: usize,
    pub values: Vec<[f64; SH_CHANNELS]>,
}

impl ShRender {
    /// Non-negative radiance map for export.
    pub fn to_map(&self) -> Result<EquirectMap> {
        let img = RgbImage::new(
            self.width,
            self.height,
            self.values.iter().map(|p| p.map(|v| v.max(0.0) as f32)).collect(),
        )?;
        EquirectMap::new(img)
    }
}

pub fn render_sh(coeffs: &ShCoefficients, width: usize, height: usize) -> Result<ShRender> {
    coeffs.validate()?;
    let dirs = direction_map(width, height)?;
    let values = dirs.directions().iter().map(|d| eval_sh(coeffs, d)).collect();
    Ok(ShRender { width, height, values })
}

/// Luminance-weighted degree-1 direction.
pub fn dominant_direction(coeffs: &ShCoefficients) -> Result<Vec3> {
    let mut g = [0.0f64; 3];
    for (c, w) in LUMA_WEIGHTS.iter().enumerate() {
        for (k, m) in [-1i64, 0, 1].into_iter().enumerate() {
            g[k] += w * coeffs.channels[c][sh_index(1, m)];
        }
    }
    // (m=-1, m=0, m=1) carry (y, z, x).
    let v = Vec3::new(g[2], g[0], g[1]);
    let n = v.norm();
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::IsotropicLight);
    }
    Ok(v / n)
}

/// Rotation about +y that moves longitude `λ` to `λ + angle`.
pub fn yaw_rotation(angle_deg: f64) -> Rotation3<f64> {
    Rotation3::from_axis_angle(&Vec3::y_axis(), angle_deg.to_radians())
}

fn probe_directions() -> &'static [Vec3] {
    static DIRS: OnceLock<Vec<Vec3>> = OnceLock::new();
    DIRS.get_or_init(|| {
        // Fibonacci sphere; generic enough that every band's system has full rank.
        let n = 64;
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        (0..n)
            .map(|i| {
                let y = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                let r = (1.0 - y * y).sqrt();
                let phi = golden * i as f64;
                Vec3::new(r * phi.cos(), y, r * phi.sin())
            })
            .collect()
    })
}

/// Per-band matrices `M_l` with `Y_l(R ω) = M_l Y_l(ω)`, solved by least squares on
/// probe directions. The functions lie exactly in the band, so the fit is exact
/// to rounding.
fn band_rotation_matrices(rot: &Rotation3<f64>) -> Vec<DMatrix<f64>> {
    let dirs = probe_directions();
    let before: Vec<[f64; SH_COUNT]> = dirs.iter().map(sh_basis_unchecked).collect();
    let after: Vec<[f64; SH_COUNT]> = dirs.iter().map(|d| sh_basis_unchecked(&(rot * d))).collect();
    (0..=SH_DEGREE)
        .map(|l| {
            let start = l * l;
            let n = 2 * l + 1;
            let a = DMatrix::from_fn(dirs.len(), n, |k, j| before[k][start + j]);
            let b = DMatrix::from_fn(dirs.len(), n, |k, j| after[k][start + j]);
            // a * X = b, X[j][i] = M[i][j]
            let x = a.svd(true, true).solve(&b, 1e-14).expect("SVD solve on a full-rank probe system");
            x.transpose()
        })
        .collect()
}

/// Coefficients of the yaw-rotated lighting, matching
/// `fit_sh(rotate_yaw(render(c), angle))` without resampling.
pub fn rotate_sh_yaw(coeffs: &ShCoefficients, angle_deg: f64) -> ShCoefficients {
    // rotate_yaw(map, a) evaluates the original at R(a) ω.
    let mats = band_rotation_matrices(&yaw_rotation(angle_deg));
    let mut out = ShCoefficients::zeros();
    for c in 0..SH_CHANNELS {
        for (l, m) in mats.iter().enumerate() {
            let start = l * l;
            let n = 2 * l + 1;
            for j in 0..n {
                let mut acc = 0.0;
                for i in 0..n {
                    // c'_i = Σ_j M_ji c_j  because L(Rω) = Σ_j c_j Σ_i M_ji Y_i(ω)
                    acc += m[(i, j)] * coeffs.channels[c][start + i];
                }
                out.channels[c][start + j] = acc;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envmap::{pixel_direction, rotate_yaw};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_coeffs(rng: &mut impl Rng) -> ShCoefficients {
        let mut c = ShCoefficients::zeros();
        for ch in c.channels.iter_mut() {
            for v in ch.iter_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
        }
        c
    }

    #[test]
    fn analytic_constants() {
        let y = sh_basis(&Vec3::new(0.0, 0.0, 1.0)).unwrap();
        assert_abs_diff_eq!(y[0], 0.282_094_79, epsilon = 1e-7);
        assert_abs_diff_eq!(y[2], 0.488_602_51, epsilon = 1e-7);
        assert_eq!(y[1], 0.0);
        assert_eq!(y[3], 0.0);
        let y = sh_basis(&Vec3::new(0.6, 0.0, 0.8)).unwrap();
        assert_abs_diff_eq!(y[0], 0.5 * (1.0 / PI).sqrt(), epsilon = 1e-7);
    }

    #[test]
    fn non_unit_direction_rejected() {
        assert!(sh_basis(&Vec3::new(0.0, 0.0, 1.1)).is_err());
    }

    #[test]
    fn gram_matrix_is_identity() {
        let (w, h) = (256, 128);
        let weights = solid_angle_weights(w, h).unwrap();
        let mut gram = [[0.0f64; SH_COUNT]; SH_COUNT];
        for v in 0..h {
            for u in 0..w {
                let y = sh_basis_unchecked(&pixel_direction(u, v, w, h));
                let wt = weights[v * w + u];
                for i in 0..SH_COUNT {
                    for j in 0..SH_COUNT {
                        gram[i][j] += y[i] * y[j] * wt;
                    }
                }
            }
        }
        for i in 0..SH_COUNT {
            for j in 0..SH_COUNT {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((gram[i][j] - expected).abs() < 1e-3, "gram[{i}][{j}] = {}", gram[i][j]);
            }
        }
    }

    #[test]
    fn constant_map_fit() {
        let map = EquirectMap::constant(256, 128, [0.5; 3]).unwrap();
        let c = fit_sh(&map).unwrap();
        for ch in &c.channels {
            assert_abs_diff_eq!(ch[0], PI.sqrt(), epsilon = 1e-3);
            assert!(ch[1..].iter().all(|v| v.abs() < 1e-3));
        }
    }

    #[test]
    fn single_basis_function_fit() {
        let (w, h) = (256, 128);
        let mut img = RgbImage::filled(w, h, [0.0; 3]).unwrap();
        // Y_1,0 takes negative values, so project the signed field directly.
        let dirs = direction_map(w, h).unwrap();
        let weights = solid_angle_weights(w, h).unwrap();
        let mut c = [0.0f64; SH_COUNT];
        for (d, wt) in dirs.directions().iter().zip(&weights) {
            let y = sh_basis_unchecked(d);
            for i in 0..SH_COUNT {
                c[i] += y[2] * y[i] * wt;
            }
        }
        assert_abs_diff_eq!(c[2], 1.0, epsilon = 1e-3);
        for (i, v) in c.iter().enumerate() {
            if i != 2 {
                assert!(v.abs() < 1e-3);
            }
        }
        // Non-negative variant through fit_sh: Y00-offset so the map is valid.
        for v in 0..h {
            for u in 0..w {
                let y = sh_basis_unchecked(&dirs.get(u, v));
                let val = (y[2] + 0.5) as f32;
                img.set(u, v, [val; 3]);
            }
        }
        let fit = fit_sh(&EquirectMap::new(img).unwrap()).unwrap();
        assert_abs_diff_eq!(fit.channels[0][2], 1.0, epsilon = 1e-3);
    }

    #[test]
    fn render_of_zero_and_dc() {
        let r = render_sh(&ShCoefficients::zeros(), 16, 8).unwrap();
        assert!(r.values.iter().flatten().all(|&v| v == 0.0));
        let mut c = ShCoefficients::zeros();
        for ch in c.channels.iter_mut() {
            ch[0] = PI.sqrt();
        }
        let r = render_sh(&c, 16, 8).unwrap();
        assert!(r.values.iter().flatten().all(|&v| (v - 0.5).abs() < 1e-12));
    }

    #[test]
    fn dominant_direction_axes() {
        let mut c = ShCoefficients::zeros();
        for ch in c.channels.iter_mut() {
            ch[sh_index(1, 1)] = 1.0;
        }
        let d = dominant_direction(&c).unwrap();
        assert_abs_diff_eq!(d.x, 1.0, epsilon = 1e-12);
        assert!(matches!(dominant_direction(&ShCoefficients::zeros()), Err(Error::IsotropicLight)));
    }

    #[test]
    fn dominant_direction_of_a_texel() {
        let (w, h) = (128, 64);
        let mut img = RgbImage::filled(w, h, [0.0; 3]).unwrap();
        img.set(37, 20, [100.0; 3]);
        let c = fit_sh(&EquirectMap::new(img).unwrap()).unwrap();
        let d = dominant_direction(&c).unwrap();
        let truth = pixel_direction(37, 20, w, h);
        assert!(d.dot(&truth).clamp(-1.0, 1.0).acos().to_degrees() < 2.0);
    }

    #[test]
    fn rotation_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let c = random_coeffs(&mut rng);
        let r0 = rotate_sh_yaw(&c, 0.0);
        let r360 = rotate_sh_yaw(&c, 360.0);
        for (a, (b, d)) in c.to_flat().iter().zip(r0.to_flat().iter().zip(r360.to_flat().iter())) {
            assert!((a - b).abs() < 1e-12);
            assert!((a - d).abs() < 1e-9);
        }
    }

    #[test]
    fn rotation_preserves_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let c = random_coeffs(&mut rng);
            let angle = rng.gen_range(-360.0..360.0);
            let r = rotate_sh_yaw(&c, angle);
            assert!((r.norm() - c.norm()).abs() < 1e-9);
        }
    }

    #[test]
    fn rotation_matches_refit_of_rotated_render() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut c = random_coeffs(&mut rng);
        for ch in c.channels.iter_mut() {
            ch[0] = 12.0; // keep the render non-negative
        }
        let map = render_sh(&c, 512, 256).unwrap().to_map().unwrap();
        let refit = fit_sh(&rotate_yaw(&map, 40.0)).unwrap();
        let rotated = rotate_sh_yaw(&c, 40.0);
        for (a, b) in refit.to_flat().iter().zip(rotated.to_flat().iter()) {
            assert!((a - b).abs() < 1e-3, "{a} vs {b}");
        }
    }

    #[test]
    fn dominant_direction_follows_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let c = random_coeffs(&mut rng);
        let d = dominant_direction(&c).unwrap();
        for angle in [30.0, 90.0, -140.0] {
            let rotated = dominant_direction(&rotate_sh_yaw(&c, angle)).unwrap();
            // Content at λ + a shows up at λ, so the direction turns by -a about y.
            let expected = yaw_rotation(-angle) * d;
            assert!(rotated.dot(&expected).clamp(-1.0, 1.0).acos() < 1e-4);
        }
    }
}
