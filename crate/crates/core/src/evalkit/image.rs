use serde::{Deserialize, Serialize, Serializer};

use crate::error::{invalid, Error, Result};
use crate::image::LdrImage;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;
const LOG_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SiRmseMode {
    /// `RMSE(alpha * pred, gt)` with the least-squares `alpha`.
    #[default]
    Linear,
    /// Scale-invariant error of `ln(pred) - ln(gt)`.
    Log,
}

fn psnr_ser<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImageMetrics {
    /// `f64::INFINITY` when the images are identical.
    #[serde(serialize_with = "psnr_ser")]
    pub psnr: f64,
    pub rmse: f64,
    pub si_rmse: f64,
    pub ssim: f64,
    pub mae: f64,
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (1.0 / mse).log10()
    }
}

fn flat(img: &LdrImage) -> Vec<f64> {
    img.image().channel_values().map(|v| v as f64).collect()
}

fn check_pair(pred: &LdrImage, gt: &LdrImage) -> Result<()> {
    if (pred.width(), pred.height()) != (gt.width(), gt.height()) {
        return Err(Error::ShapeMismatch(format!(
            "prediction is {}x{}, ground truth {}x{}",
            pred.width(),
            pred.height(),
            gt.width(),
            gt.height()
        )));
    }
    Ok(())
}

pub fn si_rmse(pred: &[f64], gt: &[f64], mode: SiRmseMode) -> f64 {
    let n = pred.len() as f64;
    match mode {
        SiRmseMode::Linear => {
            let pp: f64 = pred.iter().map(|p| p * p).sum();
            let alpha = if pp > 0.0 { pred.iter().zip(gt).map(|(p, g)| p * g).sum::<f64>() / pp } else { 0.0 };
            (pred.iter().zip(gt).map(|(p, g)| (alpha * p - g).powi(2)).sum::<f64>() / n).sqrt()
        }
        SiRmseMode::Log => {
            let d: Vec<f64> = pred.iter().zip(gt).map(|(p, g)| (p + LOG_EPS).ln() - (g + LOG_EPS).ln()).collect();
            let mean = d.iter().sum::<f64>() / n;
            let msq = d.iter().map(|v| v * v).sum::<f64>() / n;
            (msq - mean * mean).max(0.0).sqrt()
        }
    }
}

fn gaussian_window(size: usize) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let w: Vec<f64> = (0..size).map(|i| (-((i as f64 - c).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Separable "valid" filtering of a `w x h` plane.
fn filter_valid(plane: &[f64], w: usize, h: usize, k: &[f64]) -> (Vec<f64>, usize, usize) {
    let n = k.len();
    let ow = w - n + 1;
    let oh = h - n + 1;
    let mut tmp = vec![0.0; ow * h];
    for y in 0..h {
        for x in 0..ow {
            tmp[y * ow + x] = (0..n).map(|i| k[i] * plane[y * w + x + i]).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..n).map(|i| k[i] * tmp[(y + i) * ow + x]).sum();
        }
    }
    (out, ow, oh)
}

/// Single-scale SSIM of two planes in `[0, 1]` with a Gaussian window; the
/// window shrinks to the largest odd size that fits small images.
pub fn ssim_plane(a: &[f64], b: &[f64], w: usize, h: usize) -> f64 {
    let mut size = SSIM_WINDOW.min(w).min(h);
    if size.is_multiple_of(2) {
        size -= 1;
    }
    let k = gaussian_window(size.max(1));
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let prod = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).collect::<Vec<f64>>();
    let (mu_a, ow, oh) = filter_valid(a, w, h, &k);
    let (mu_b, ..) = filter_valid(b, w, h, &k);
    let (aa, ..) = filter_valid(&prod(a, a), w, h, &k);
    let (bb, ..) = filter_valid(&prod(b, b), w, h, &k);
    let (ab, ..) = filter_valid(&prod(a, b), w, h, &k);
    let mut total = 0.0;
    for i in 0..ow * oh {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = aa[i] - ma * ma;
        let vb = bb[i] - mb * mb;
        let cov = ab[i] - ma * mb;
        total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    total / (ow * oh) as f64
}

pub fn ssim(pred: &LdrImage, gt: &LdrImage) -> Result<f64> {
    check_pair(pred, gt)?;
    let (w, h) = (pred.width(), pred.height());
    let mut sum = 0.0;
    for c in 0..3 {
        let a: Vec<f64> = pred.image().pixels().iter().map(|p| p[c] as f64).collect();
        let b: Vec<f64> = gt.image().pixels().iter().map(|p| p[c] as f64).collect();
        sum += ssim_plane(&a, &b, w, h);
    }
    Ok(sum / 3.0)
}

pub fn image_metrics(pred: &LdrImage, gt: &LdrImage, si_mode: SiRmseMode) -> Result<ImageMetrics> {
    check_pair(pred, gt)?;
    let p = flat(pred);
    let g = flat(gt);
    if p.is_empty() {
        return Err(invalid("images are empty"));
    }
    let n = p.len() as f64;
    let mse = p.iter().zip(&g).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n;
    let mae = p.iter().zip(&g).map(|(a, b)| (a - b).abs()).sum::<f64>() / n;
    Ok(ImageMetrics {
        psnr: psnr_from_mse(mse),
        rmse: mse.sqrt(),
        si_rmse: si_rmse(&p, &g, si_mode),
        ssim: ssim(pred, gt)?,
        mae,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::RgbImage;

    fn ldr(w: usize, h: usize, f: impl Fn(usize, usize, usize) -> f32) -> LdrImage {
        LdrImage::new(RgbImage::from_fn(w, h, |u, v| [f(u, v, 0), f(u, v, 1), f(u, v, 2)]).unwrap()).unwrap()
    }

    fn pattern(u: usize, v: usize, c: usize) -> f32 {
        (0.5 + 0.4 * ((u * 3 + v * 7 + c * 5) as f32 * 0.37).sin()) * 0.5
    }

    #[test]
    fn identity_case() {
        let a = ldr(16, 12, pattern);
        let m = image_metrics(&a, &a, SiRmseMode::Linear).unwrap();
        assert_eq!((m.rmse, m.mae, m.si_rmse), (0.0, 0.0, 0.0));
        assert!(m.psnr.is_infinite());
        assert!((m.ssim - 1.0).abs() < 1e-12);
        assert_eq!(serde_json::to_value(m).unwrap()["psnr"], "inf");
    }

    #[test]
    fn psnr_of_uniform_error() {
        let a = ldr(8, 8, |_, _, _| 0.5);
        let b = ldr(8, 8, |_, _, _| 0.6);
        let m = image_metrics(&a, &b, SiRmseMode::Linear).unwrap();
        assert!((m.psnr - 20.0).abs() < 1e-5, "{}", m.psnr);
        assert!((psnr_from_mse(0.01) - 20.0).abs() < 1e-12);
        assert!((m.mae - 0.1).abs() < 1e-6);
    }

    #[test]
    fn scale_invariance() {
        let gt = ldr(9, 9, pattern);
        let pred = ldr(9, 9, |u, v, c| 2.0 * pattern(u, v, c));
        let m = image_metrics(&pred, &gt, SiRmseMode::Linear).unwrap();
        assert!(m.si_rmse < 1e-7 && m.rmse > 0.1);
        let l = image_metrics(&pred, &gt, SiRmseMode::Log).unwrap();
        assert!(l.si_rmse < 1e-5);
    }

    #[test]
    fn ssim_symmetric_and_bounded() {
        let a = ldr(20, 14, pattern);
        let b = ldr(20, 14, |u, v, c| pattern(v % 20, u % 14, c));
        let ab = ssim(&a, &b).unwrap();
        let ba = ssim(&b, &a).unwrap();
        assert!((ab - ba).abs() < 1e-9);
        assert!(ab < 1.0 && ab > -1.0);
    }

    #[test]
    fn ssim_matches_reference_implementation() {
        // Reference values from an independent windowed SSIM implementation
        // (Gaussian 11x11, sigma 1.5, population covariance, data range 1).
        let a = ldr(24, 20, pattern);
        let b = ldr(24, 20, |u, v, c| (pattern(u, v, c) * 0.8 + 0.05 * ((u + 2 * v) % 5) as f32 / 5.0).min(1.0));
        let s = ssim(&a, &b).unwrap();
        assert!((s - SSIM_REFERENCE).abs() < 1e-6, "{s}");
    }

    const SSIM_REFERENCE: f64 = 0.9593051351822922;

    #[test]
    fn size_mismatch() {
        let a = ldr(8, 8, pattern);
        let b = ldr(8, 9, pattern);
        assert!(image_metrics(&a, &b, SiRmseMode::Linear).is_err());
    }
}
