//! Radiance `.hdr` (RGBE) reader and writer. Scanlines are written with the
//! run-length scheme of the reference codec when the width allows it.

use crate::error::{Error, Result};
use crate::image::RgbImage;

const MIN_RLE_WIDTH: usize = 8;
const MAX_RLE_WIDTH: usize = 0x7fff;

/// Shared-exponent encoding of one pixel.
pub fn float_to_rgbe(rgb: [f32; 3]) -> [u8; 4] {
    let v = rgb[0].max(rgb[1]).max(rgb[2]) as f64;
    if !(v >= 1e-32) {
        return [0; 4];
    }
    let (mantissa, exp) = frexp(v);
    let scale = mantissa * 256.0 / v;
    [
        (rgb[0].max(0.0) as f64 * scale) as u8,
        (rgb[1].max(0.0) as f64 * scale) as u8,
        (rgb[2].max(0.0) as f64 * scale) as u8,
        (exp + 128) as u8,
    ]
}

pub fn rgbe_to_float(p: [u8; 4]) -> [f32; 3] {
    if p[3] == 0 {
        return [0.0; 3];
    }
    let f = 2f64.powi(p[3] as i32 - (128 + 8));
    [((p[0] as f64 + 0.5) * f) as f32, ((p[1] as f64 + 0.5) * f) as f32, ((p[2] as f64 + 0.5) * f) as f32]
}

/// `v = m * 2^e` with `m` in `[0.5, 1)`.
fn frexp(v: f64) -> (f64, i32) {
    let mut e = v.log2().floor() as i32 + 1;
    let mut m = v / 2f64.powi(e);
    // Guard against log2 rounding at exact powers of two.
    if m >= 1.0 {
        m /= 2.0;
        e += 1;
    } else if m < 0.5 {
        m *= 2.0;
        e -= 1;
    }
    (m, e)
}

pub fn encode_hdr(image: &RgbImage) -> Result<Vec<u8>> {
    let (w, h) = (image.width(), image.height());
    if image.pixels().iter().flatten().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidArgument("RGBE needs finite, non-negative radiance".into()));
    }
    let mut out = format!("#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n-Y {h} +X {w}\n").into_bytes();
    let rle = (MIN_RLE_WIDTH..=MAX_RLE_WIDTH).contains(&w);
    let mut line = vec![[0u8; 4]; w];
    for v in 0..h {
        for (u, px) in line.iter_mut().enumerate() {
            *px = float_to_rgbe(image.get(u, v));
        }
        if rle {
            out.extend_from_slice(&[2, 2, (w >> 8) as u8, (w & 0xff) as u8]);
            for c in 0..4 {
                let channel: Vec<u8> = line.iter().map(|p| p[c]).collect();
                write_rle_channel(&channel, &mut out);
            }
        } else {
            out.extend(line.iter().flatten());
        }
    }
    Ok(out)
}

/// Runs of at least four equal bytes become `(128 + n, value)`; everything
/// else is written as literal chunks `(n, bytes...)` with `n <= 128`.
fn write_rle_channel(data: &[u8], out: &mut Vec<u8>) {
    const MIN_RUN: usize = 4;
    let mut cur = 0;
    while cur < data.len() {
        let mut beg_run = cur;
        let mut run_count = 0;
        let mut old_run_count = 0;
        while run_count < MIN_RUN && beg_run < data.len() {
            beg_run += run_count;
            old_run_count = run_count;
            run_count = 1;
            while beg_run + run_count < data.len() && run_count < 127 && data[beg_run] == data[beg_run + run_count] {
                run_count += 1;
            }
        }
        // A short run right before the long one is cheaper as a run too.
        if old_run_count > 1 && old_run_count == beg_run - cur {
            out.extend_from_slice(&[128 + old_run_count as u8, data[cur]]);
            cur = beg_run;
        }
        while cur < beg_run {
            let n = (beg_run - cur).min(128);
            out.push(n as u8);
            out.extend_from_slice(&data[cur..cur + n]);
            cur += n;
        }
        if run_count >= MIN_RUN {
            out.extend_from_slice(&[128 + run_count as u8, data[beg_run]]);
            cur += run_count;
        }
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Corrupt { offset: self.bytes.len() as u64, message: format!("truncated {what}") });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn line(&mut self) -> Result<&'a str> {
        let rest = &self.bytes[self.pos..];
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Format("unterminated RGBE header".into()))?;
        self.pos += end + 1;
        std::str::from_utf8(&rest[..end]).map_err(|_| Error::Format("non-ASCII RGBE header".into()))
    }
}

pub fn decode_hdr(bytes: &[u8]) -> Result<RgbImage> {
    let mut cur = Cursor { bytes, pos: 0 };
    let first = cur.line()?;
    if !first.starts_with("#?") {
        return Err(Error::Format("missing #? signature".into()));
    }
    loop {
        let line = cur.line()?;
        if line.is_empty() {
            break;
        }
        if let Some(fmt) = line.strip_prefix("FORMAT=") {
            if fmt.trim() != "32-bit_rle_rgbe" {
                return Err(Error::Format(format!("unsupported pixel format {fmt}")));
            }
        }
    }
    let res: Vec<&str> = cur.line()?.split_whitespace().collect();
    let (h, w) = match res.as_slice() {
        ["-Y", h, "+X", w] => (
            h.parse::<usize>().map_err(|_| Error::Format("bad height".into()))?,
            w.parse::<usize>().map_err(|_| Error::Format("bad width".into()))?,
        ),
        _ => return Err(Error::Format(format!("unsupported resolution line {res:?}"))),
    };
    let mut data = Vec::with_capacity(w * h);
    let mut line = vec![[0u8; 4]; w];
    for _ in 0..h {
        read_scanline(&mut cur, &mut line)?;
        data.extend(line.iter().map(|&p| rgbe_to_float(p)));
    }
    RgbImage::new(w, h, data)
}

fn read_scanline(cur: &mut Cursor, line: &mut [[u8; 4]]) -> Result<()> {
    let w = line.len();
    let start = cur.pos;
    let head = cur.take(4.min(w * 4), "scanline")?;
    let is_rle = (MIN_RLE_WIDTH..=MAX_RLE_WIDTH).contains(&w) && head[0] == 2 && head[1] == 2 && head[2] & 0x80 == 0;
    if !is_rle {
        cur.pos = start;
        let raw = cur.take(w * 4, "flat scanline")?;
        for (px, chunk) in line.iter_mut().zip(raw.chunks_exact(4)) {
            px.copy_from_slice(chunk);
        }
        return Ok(());
    }
    if ((head[2] as usize) << 8 | head[3] as usize) != w {
        return Err(Error::Corrupt { offset: start as u64, message: "scanline width mismatch".into() });
    }
    for c in 0..4 {
        let mut u = 0;
        while u < w {
            let at = cur.pos;
            let n = cur.take(1, "run header")?[0] as usize;
            if n > 128 {
                let count = n - 128;
                let value = cur.take(1, "run value")?[0];
                if u + count > w {
                    return Err(Error::Corrupt { offset: at as u64, message: "run overflows scanline".into() });
                }
                line[u..u + count].iter_mut().for_each(|p| p[c] = value);
                u += count;
            } else {
                if n == 0 || u + n > w {
                    return Err(Error::Corrupt { offset: at as u64, message: "bad literal count".into() });
                }
                let lit = cur.take(n, "literal bytes")?;
                for (p, &b) in line[u..u + n].iter_mut().zip(lit) {
                    p[c] = b;
                }
                u += n;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn reference_bytes() {
        assert_eq!(float_to_rgbe([1.0, 0.0, 0.0]), [128, 0, 0, 129]);
        assert_eq!(float_to_rgbe([0.0; 3]), [0; 4]);
        assert_eq!(rgbe_to_float([0, 0, 0, 0]), [0.0; 3]);
        assert_eq!(rgbe_to_float([9, 9, 9, 0]), [0.0; 3]);
        assert_eq!(rgbe_to_float([128, 0, 0, 129])[0], 128.5 / 128.0);
        assert_eq!(frexp(1.0), (0.5, 1));
        assert_eq!(frexp(0.75), (0.75, 0));
    }

    fn random_image(w: usize, h: usize, seed: u64) -> RgbImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        RgbImage::from_fn(w, h, |u, _| {
            // Flat stretches exercise the run encoder.
            if u % 13 < 6 {
                [2.0, 2.0, 2.0]
            } else {
                [rng.gen_range(0.0..1000.0), rng.gen_range(0.0..1000.0), rng.gen_range(0.0..1000.0)]
            }
        })
        .unwrap()
    }

    fn max_relative_error(a: &RgbImage, b: &RgbImage) -> f64 {
        a.pixels()
            .iter()
            .zip(b.pixels())
            .map(|(p, q)| {
                let m = p[0].max(p[1]).max(p[2]) as f64;
                (0..3).map(|c| (p[c] as f64 - q[c] as f64).abs() / m).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn roundtrip_within_quantization() {
        for (w, h) in [(64, 32), (5, 3), (300, 2)] {
            let img = random_image(w, h, w as u64);
            let bytes = encode_hdr(&img).unwrap();
            let back = decode_hdr(&bytes).unwrap();
            assert_eq!((back.width(), back.height()), (w, h));
            assert!(max_relative_error(&img, &back) <= 1.0 / 256.0);
            // Decoding and re-encoding is lossless on the byte level.
            assert_eq!(encode_hdr(&back).unwrap(), bytes);
        }
    }

    #[test]
    fn rle_compresses_flat_lines() {
        let img = RgbImage::filled(256, 4, [0.5, 0.25, 0.125]).unwrap();
        let bytes = encode_hdr(&img).unwrap();
        assert!(bytes.len() < 256 * 4 * 4 / 4);
        assert_eq!(decode_hdr(&bytes).unwrap().get(100, 2), rgbe_to_float(float_to_rgbe([0.5, 0.25, 0.125])));
    }

    #[test]
    fn truncation_reports_offset() {
        let bytes = encode_hdr(&random_image(64, 8, 3)).unwrap();
        let cut = &bytes[..bytes.len() - 10];
        match decode_hdr(cut) {
            Err(Error::Corrupt { offset, .. }) => assert_eq!(offset, cut.len() as u64),
            other => panic!("{other:?}"),
        }
        assert!(matches!(decode_hdr(b"P6\n"), Err(Error::Format(_))));
        assert!(matches!(decode_hdr(b"#?RADIANCE\n\n+Y 2 +X 2\n"), Err(Error::Format(_))));
    }
}
