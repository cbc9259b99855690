//! Multi-modal contrastive loss and SH regression loss, with gradients.

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::encoder::Embedding;
use crate::error::{invalid, Error, Result};
use crate::sh::ShCoefficients;

/// How a `T x D` embedding becomes the vector compared by cosine similarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pooling {
    #[default]
    Flatten,
    MeanPool,
}

/// Loss value with gradients w.r.t. each modality's `N x K` input matrix and
/// w.r.t. the logit scale `s = 1 / temperature`.
#[derive(Debug, Clone)]
pub struct ContrastiveOutput {
    pub loss: f64,
    pub grads: Vec<Array2<f64>>,
    pub d_scale: f64,
}

/// Row-wise L2 normalization; errors on a zero row.
fn normalize_rows(m: &Array2<f64>) -> Result<(Array2<f64>, Array1<f64>)> {
    let norms = m.map_axis(Axis(1), |r| r.dot(&r).sqrt());
    if let Some(i) = norms.iter().position(|&n| !(n > 0.0 && n.is_finite())) {
        return Err(invalid(format!("embedding {i} has zero or non-finite norm")));
    }
    let unit = m / &norms.view().insert_axis(Axis(1));
    Ok((unit, norms))
}

/// Mean over all ordered modality pairs `(a, b)`, `a != b`, of the row-wise
/// softmax cross-entropy of `scale * cos(e_a_i, e_b_j)` with target `j = i`.
pub fn contrastive_on_vectors(vectors: &[Array2<f64>], scale: f64) -> Result<ContrastiveOutput> {
    let m = vectors.len();
    if m < 2 {
        return Err(invalid("contrastive loss needs at least two modalities"));
    }
    let n = vectors[0].nrows();
    if n == 0 {
        return Err(invalid("contrastive loss needs at least one sample"));
    }
    if vectors.iter().any(|v| v.nrows() != n || v.ncols() != vectors[0].ncols()) {
        return Err(Error::ShapeMismatch("modalities disagree on batch size or width".into()));
    }
    let normalized: Vec<(Array2<f64>, Array1<f64>)> = vectors.iter().map(normalize_rows).collect::<Result<_>>()?;
    let pairs = (m * (m - 1)) as f64;
    let mut d_unit: Vec<Array2<f64>> = vectors.iter().map(|v| Array2::zeros(v.raw_dim())).collect();
    let mut loss = 0.0;
    let mut d_scale = 0.0;
    for a in 0..m {
        for b in (a + 1)..m {
            let cos = normalized[a].0.dot(&normalized[b].0.t());
            // a -> b uses rows of cos, b -> a uses rows of cos^T.
            for (query, gallery, transposed) in [(a, b, false), (b, a, true)] {
                let view = if transposed { cos.t() } else { cos.view() };
                let mut d_logits = Array2::<f64>::zeros((n, n));
                for i in 0..n {
                    let row = view.row(i);
                    let max = row.iter().fold(f64::NEG_INFINITY, |acc, &c| acc.max(scale * c));
                    let mut sum = 0.0;
                    for (j, &c) in row.iter().enumerate() {
                        let e = (scale * c - max).exp();
                        d_logits[[i, j]] = e;
                        sum += e;
                    }
                    loss += (sum.ln() + max - scale * row[i]) / (n as f64 * pairs);
                    let mut drow = d_logits.row_mut(i);
                    drow /= sum;
                    drow[i] -= 1.0;
                    drow /= n as f64 * pairs;
                }
                d_scale += (&d_logits * &view).sum();
                let d_cos = d_logits * scale;
                d_unit[query] += &d_cos.dot(&normalized[gallery].0);
                d_unit[gallery] += &d_cos.t().dot(&normalized[query].0);
            }
        }
    }
    let grads = d_unit
        .into_iter()
        .zip(&normalized)
        .map(|(du, (unit, norms))| {
            let radial = (&du * unit).sum_axis(Axis(1));
            (du - unit * &radial.insert_axis(Axis(1))) / norms.view().insert_axis(Axis(1))
        })
        .collect();
    Ok(ContrastiveOutput { loss, grads, d_scale })
}

/// Vectors compared by the contrastive loss for a `N x (T*D)` stack of
/// flattened embeddings.
pub fn pool(flat: &Array2<f64>, tokens: usize, pooling: Pooling) -> Array2<f64> {
    match pooling {
        Pooling::Flatten => flat.clone(),
        Pooling::MeanPool => {
            let d = flat.ncols() / tokens;
            let mut out = Array2::zeros((flat.nrows(), d));
            for t in 0..tokens {
                out += &flat.slice(ndarray::s![.., t * d..(t + 1) * d]);
            }
            out / tokens as f64
        }
    }
}

/// Chain rule through [`pool`].
pub fn unpool_grad(grad: &Array2<f64>, tokens: usize, pooling: Pooling) -> Array2<f64> {
    match pooling {
        Pooling::Flatten => grad.clone(),
        Pooling::MeanPool => {
            let d = grad.ncols();
            let mut out = Array2::zeros((grad.nrows(), d * tokens));
            for t in 0..tokens {
                out.slice_mut(ndarray::s![.., t * d..(t + 1) * d]).assign(&(grad / tokens as f64));
            }
            out
        }
    }
}

/// Contrastive loss on per-modality lists of aligned embeddings. Returns the
/// loss and `dL/d(tokens)` for every embedding.
pub fn contrastive_loss(
    embeddings: &[Vec<Embedding>],
    temperature: f64,
    pooling: Pooling,
) -> Result<(f64, Vec<Vec<Array2<f64>>>)> {
    if !(temperature > 0.0) {
        return Err(invalid(format!("temperature must be positive, got {temperature}")));
    }
    let first = embeddings.first().and_then(|m| m.first()).ok_or_else(|| invalid("no embeddings"))?;
    let (t, d) = first.tokens.dim();
    let stacks: Vec<Array2<f64>> = embeddings
        .iter()
        .map(|list| {
            let mut m = Array2::zeros((list.len(), t * d));
            for (i, e) in list.iter().enumerate() {
                if e.tokens.dim() != (t, d) {
                    return Err(Error::ShapeMismatch("embeddings differ in shape".into()));
                }
                m.row_mut(i).assign(&ndarray::ArrayView1::from(e.flat()));
            }
            Ok(pool(&m, t, pooling))
        })
        .collect::<Result<_>>()?;
    let out = contrastive_on_vectors(&stacks, 1.0 / temperature)?;
    let grads = out
        .grads
        .iter()
        .map(|g| {
            let g = unpool_grad(g, t, pooling);
            g.rows().into_iter().map(|r| r.to_owned().into_shape_with_order((t, d)).unwrap()).collect()
        })
        .collect();
    Ok((out.loss, grads))
}

/// Mean squared error over the 48 coefficients, with its gradient w.r.t. `pred`.
pub fn sh_loss(pred: &ShCoefficients, gt: &ShCoefficients) -> (f64, [f64; 48]) {
    let p = pred.to_flat();
    let g = gt.to_flat();
    let mut grad = [0.0; 48];
    let mut loss = 0.0;
    for i in 0..48 {
        let diff = p[i] - g[i];
        loss += diff * diff / 48.0;
        grad[i] = 2.0 * diff / 48.0;
    }
    (loss, grad)
}
