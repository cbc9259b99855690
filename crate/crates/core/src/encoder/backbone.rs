//! Deterministic, frozen stand-ins for the pretrained image and text backbones.
//!
//! Image-type payloads are cut into a 16 x 16 grid of patches; each patch is
//! flattened, pushed through a seed-derived random projection and offset by a
//! seed-derived positional code. Text is split into overlapping character
//! trigrams which are hashed into a fixed number of token slots.

use ndarray::Array2;

use super::{FeatureSequence, ImagePayload, Modality, Payload};
use crate::error::{invalid, Result};
use crate::rng::{derive_indexed, derive_seed, fnv1a, mix64, SplitMixStream};

pub const PATCH_GRID: usize = 16;
pub const BACKBONE_DIM: usize = 64;
pub const TEXT_TOKENS: usize = 32;
const POSITION_SCALE: f64 = 0.5;

pub fn stub_backbone(payload: &Payload, modality: Modality, seed: u64) -> Result<FeatureSequence> {
    match payload {
        Payload::Image(img) => {
            if modality == Modality::Text {
                return Err(invalid("text modality needs a text payload"));
            }
            Ok(FeatureSequence { tokens: image_tokens(img, seed)?, modality, empty: false })
        }
        Payload::Text(text) => {
            if modality != Modality::Text {
                return Err(invalid(format!("{modality} modality needs an image payload")));
            }
            let (tokens, empty) = text_tokens(text, seed);
            Ok(FeatureSequence { tokens, modality, empty })
        }
    }
}

/// Source index for sample `k` of `count` inside `[start, end)` (nearest neighbour).
#[inline]
fn patch_sample(start: usize, end: usize, k: usize, count: usize, limit: usize) -> usize {
    if end <= start {
        return start.min(limit - 1);
    }
    let len = end - start;
    start + ((2 * k + 1) * len) / (2 * count)
}

fn image_tokens(img: &ImagePayload, seed: u64) -> Result<Array2<f64>> {
    if img.width == 0 || img.height == 0 || img.channels == 0 {
        return Err(invalid("image payload dimensions must be positive"));
    }
    let pw = img.width.div_ceil(PATCH_GRID);
    let ph = img.height.div_ceil(PATCH_GRID);
    let patch_len = pw * ph * img.channels;

    let proj_seed = derive_indexed(
        derive_seed(seed, "patch-projection"),
        "shape",
        ((img.channels as u64) << 32) | ((ph as u64) << 16) | pw as u64,
    );
    let mut stream = SplitMixStream::new(proj_seed);
    let scale = (3.0 / patch_len as f64).sqrt();
    let projection = Array2::from_shape_fn((patch_len, BACKBONE_DIM), |_| stream.next_signed() * scale);
    let mut pos_stream = SplitMixStream::new(derive_seed(seed, "patch-position"));
    let mut tokens =
        Array2::from_shape_fn((PATCH_GRID * PATCH_GRID, BACKBONE_DIM), |_| pos_stream.next_signed() * POSITION_SCALE);

    let mut patch = Array2::<f64>::zeros((PATCH_GRID * PATCH_GRID, patch_len));
    for gy in 0..PATCH_GRID {
        let v0 = gy * img.height / PATCH_GRID;
        let v1 = (gy + 1) * img.height / PATCH_GRID;
        for gx in 0..PATCH_GRID {
            let u0 = gx * img.width / PATCH_GRID;
            let u1 = (gx + 1) * img.width / PATCH_GRID;
            let mut row = patch.row_mut(gy * PATCH_GRID + gx);
            let mut k = 0;
            for sy in 0..ph {
                let v = patch_sample(v0, v1, sy, ph, img.height);
                for sx in 0..pw {
                    let u = patch_sample(u0, u1, sx, pw, img.width);
                    for &c in img.pixel(u, v) {
                        row[k] = c as f64;
                        k += 1;
                    }
                }
            }
        }
    }
    tokens += &patch.dot(&projection);
    Ok(tokens)
}

fn text_tokens(text: &str, seed: u64) -> (Array2<f64>, bool) {
    let mut tokens = Array2::zeros((TEXT_TOKENS, BACKBONE_DIM));
    if text.is_empty() {
        return (tokens, true);
    }
    let text_seed = derive_seed(seed, "text-trigram");
    let chars: Vec<char> = std::iter::once(' ').chain(text.chars()).chain(std::iter::once(' ')).collect();
    let mut buf = [0u8; 12];
    for window in chars.windows(3) {
        let mut len = 0;
        for ch in window {
            len += ch.encode_utf8(&mut buf[len..]).len();
        }
        let h = mix64(fnv1a(&buf[..len]) ^ text_seed);
        let slot = (h % TEXT_TOKENS as u64) as usize;
        let mut stream = SplitMixStream::new(h);
        for x in tokens.row_mut(slot).iter_mut() {
            *x += stream.next_signed();
        }
    }
    (tokens, false)
}
