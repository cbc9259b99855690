//! Portable float map. Rows are stored bottom to top; a negative scale marks
//! little-endian data.

use crate::error::{Error, Result};
use crate::image::RgbImage;

use super::header::HeaderReader;

pub fn encode_pfm(image: &RgbImage) -> Vec<u8> {
    let (w, h) = (image.width(), image.height());
    let mut out = format!("PF\n{w} {h}\n-1.0\n").into_bytes();
    out.reserve(w * h * 12);
    for v in (0..h).rev() {
        for u in 0..w {
            for c in image.get(u, v) {
                out.extend_from_slice(&c.to_le_bytes());
            }
        }
    }
    out
}

pub fn decode_pfm(bytes: &[u8]) -> Result<RgbImage> {
    let mut r = HeaderReader::new(bytes);
    let channels = match r.token()? {
        "PF" => 3,
        "Pf" => 1,
        other => return Err(Error::Format(format!("not a PFM file (magic {other:?})"))),
    };
    let w: usize = r.parse_token()?;
    let h: usize = r.parse_token()?;
    let scale: f64 = r.parse_token()?;
    let data_start = r.skip_single_whitespace()?;
    if w == 0 || h == 0 || scale == 0.0 || !scale.is_finite() {
        return Err(Error::Format(format!("invalid PFM header {w}x{h} scale {scale}")));
    }
    let little = scale < 0.0;
    let need = w * h * channels * 4;
    let body = &bytes[data_start..];
    if body.len() < need {
        return Err(Error::Corrupt {
            offset: bytes.len() as u64,
            message: format!("PFM body has {} bytes, expected {need}", body.len()),
        });
    }
    let float = |i: usize| {
        let b: [u8; 4] = body[i * 4..i * 4 + 4].try_into().expect("4-byte slice");
        if little {
            f32::from_le_bytes(b)
        } else {
            f32::from_be_bytes(b)
        }
    };
    let mut data = vec![[0.0f32; 3]; w * h];
    for row in 0..h {
        let v = h - 1 - row;
        for u in 0..w {
            let base = (row * w + u) * channels;
            data[v * w + u] = if channels == 3 {
                [float(base), float(base + 1), float(base + 2)]
            } else {
                [float(base); 3]
            };
        }
    }
    RgbImage::new(w, h, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn roundtrip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let img = RgbImage::from_fn(7, 5, |_, _| [rng.gen(), rng.gen_range(0.0..1e6), rng.gen_range(-3.0..3.0)]).unwrap();
        let back = decode_pfm(&encode_pfm(&img)).unwrap();
        let bits = |i: &RgbImage| i.channel_values().map(f32::to_bits).collect::<Vec<_>>();
        assert_eq!(bits(&img), bits(&back));
    }

    #[test]
    fn big_endian_grey_and_row_order() {
        let mut bytes = b"Pf\n2 2\n1.0\n".to_vec();
        for v in [1.0f32, 2.0, 3.0, 4.0] {
            bytes.extend_from_slice(&v.to_be_bytes());
        }
        let img = decode_pfm(&bytes).unwrap();
        // First stored row is the bottom row.
        assert_eq!(img.get(0, 1), [1.0; 3]);
        assert_eq!(img.get(1, 0), [4.0; 3]);
    }

    #[test]
    fn bad_inputs() {
        assert!(matches!(decode_pfm(b"P6\n1 1\n255\n"), Err(Error::Format(_))));
        assert!(matches!(decode_pfm(b"PF\n2 2\n-1.0\n\0\0"), Err(Error::Corrupt { .. })));
    }
}
