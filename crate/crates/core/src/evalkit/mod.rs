//! Retrieval statistics, the rotation-similarity experiment and image metrics.

mod image;
mod retrieval;

pub use image::{image_metrics, psnr_from_mse, si_rmse, ssim, ssim_plane, ImageMetrics, SiRmseMode};
pub use retrieval::{
    cross_modal_report, median, rank_of, retrieval_metrics, PairMetrics, RetrievalMetrics, RetrievalReport,
    SimilarityMatrix, DEFAULT_KS,
};

use crate::encoder::{cosine_similarity, Embedding};
use crate::envmap::{rotate_yaw, EquirectMap};
use crate::error::Result;

/// `-180, -150, ..., 180`.
pub fn rotation_angles() -> Vec<f64> {
    (-6..=6).map(|i| i as f64 * 30.0).collect()
}

/// Cosine similarity between the embedding of `map` yawed by each angle and
/// the embedding of the unrotated map.
pub fn rotation_curve<F>(mut encode: F, map: &EquirectMap) -> Result<Vec<(f64, f64)>>
where
    F: FnMut(&EquirectMap) -> Result<Embedding>,
{
    let reference = encode(map)?;
    rotation_angles()
        .into_iter()
        .map(|a| {
            let e = if a == 0.0 { reference.clone() } else { encode(&rotate_yaw(map, a))? };
            Ok((a, cosine_similarity(reference.flat(), e.flat())))
        })
        .collect()
}

pub fn rotation_curve_csv(curve: &[(f64, f64)]) -> String {
    let mut out = String::from("angle_deg,cosine_similarity\n");
    for (a, s) in curve {
        out.push_str(&format!("{a},{s:.9}\n"));
    }
    out
}
