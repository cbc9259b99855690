//! Query-token fusion: learnable queries cross-attend to backbone tokens
//! through multi-head attention, get layer-normalized (after an optional
//! residual add of the queries) and are projected to the joint width `D`.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};

use super::{EncoderConfig, Embedding, FeatureSequence};
use crate::error::{Error, Result};

const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct FusionParams {
    /// `T x model_dim` learnable query tokens.
    pub queries: Array2<f64>,
    pub w_q: Array2<f64>,
    pub w_k: Array2<f64>,
    pub w_v: Array2<f64>,
    pub w_o: Array2<f64>,
    pub ln_gain: Array1<f64>,
    pub ln_bias: Array1<f64>,
    pub w_proj: Array2<f64>,
    pub b_proj: Array1<f64>,
}

impl FusionParams {
    pub fn zeros(config: &EncoderConfig, backbone_dim: usize) -> Self {
        let (t, dm, d) = (config.tokens, config.model_dim, config.dim);
        Self {
            queries: Array2::zeros((t, dm)),
            w_q: Array2::zeros((dm, dm)),
            w_k: Array2::zeros((backbone_dim, dm)),
            w_v: Array2::zeros((backbone_dim, dm)),
            w_o: Array2::zeros((dm, dm)),
            ln_gain: Array1::zeros(dm),
            ln_bias: Array1::zeros(dm),
            w_proj: Array2::zeros((dm, d)),
            b_proj: Array1::zeros(d),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            queries: Array2::zeros(self.queries.raw_dim()),
            w_q: Array2::zeros(self.w_q.raw_dim()),
            w_k: Array2::zeros(self.w_k.raw_dim()),
            w_v: Array2::zeros(self.w_v.raw_dim()),
            w_o: Array2::zeros(self.w_o.raw_dim()),
            ln_gain: Array1::zeros(self.ln_gain.raw_dim()),
            ln_bias: Array1::zeros(self.ln_bias.raw_dim()),
            w_proj: Array2::zeros(self.w_proj.raw_dim()),
            b_proj: Array1::zeros(self.b_proj.raw_dim()),
        }
    }

    pub fn backbone_dim(&self) -> usize {
        self.w_k.nrows()
    }

    pub(crate) fn check(&self, config: &EncoderConfig) -> Result<()> {
        let (t, dm, d) = (config.tokens, config.model_dim, config.dim);
        let db = self.backbone_dim();
        let ok = self.queries.dim() == (t, dm)
            && self.w_q.dim() == (dm, dm)
            && self.w_k.ncols() == dm
            && self.w_v.dim() == (db, dm)
            && self.w_o.dim() == (dm, dm)
            && self.ln_gain.len() == dm
            && self.ln_bias.len() == dm
            && self.w_proj.dim() == (dm, d)
            && self.b_proj.len() == d;
        if ok {
            Ok(())
        } else {
            Err(Error::ShapeMismatch("fusion parameters do not match the encoder config".into()))
        }
    }
}

/// Intermediate values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct FusionCache {
    q_proj: Array2<f64>,
    /// Per head: attention weights `T x N`.
    pub attention: Vec<Array2<f64>>,
    /// Per head: attention-pooled backbone features `T x backbone_dim`.
    pooled: Vec<Array2<f64>>,
    attended: Array2<f64>,
    x_hat: Array2<f64>,
    inv_std: Array1<f64>,
    normed: Array2<f64>,
}

fn softmax_rows(scores: &mut Array2<f64>) {
    for mut row in scores.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row /= sum;
    }
}

pub fn fusion_forward(params: &FusionParams, features: &FeatureSequence, config: &EncoderConfig) -> Result<Embedding> {
    fusion_forward_cached(params, features.tokens.view(), config).map(|(tokens, _)| Embedding {
        tokens,
        modality: features.modality,
        id: String::new(),
    })
}

/// Forward pass returning the `T x D` tokens and the backward cache.
pub fn fusion_forward_cached(
    params: &FusionParams,
    features: ArrayView2<f64>,
    config: &EncoderConfig,
) -> Result<(Array2<f64>, FusionCache)> {
    params.check(config)?;
    if features.ncols() != params.backbone_dim() {
        return Err(Error::ShapeMismatch(format!(
            "backbone features have width {}, fusion expects {}",
            features.ncols(),
            params.backbone_dim()
        )));
    }
    if features.nrows() == 0 {
        return Err(Error::ShapeMismatch("feature sequence is empty".into()));
    }
    let dh = config.head_dim();
    let scale = 1.0 / (dh as f64).sqrt();
    let q_proj = params.queries.dot(&params.w_q);
    let mut attended = Array2::zeros((config.tokens, config.model_dim));
    let mut attention = Vec::with_capacity(config.heads);
    let mut pooled = Vec::with_capacity(config.heads);
    for h in 0..config.heads {
        let cols = s![.., h * dh..(h + 1) * dh];
        // S = (Q Wk^T) F^T, equal to Q (F Wk)^T but cheaper for few queries.
        let qk = q_proj.slice(cols).dot(&params.w_k.slice(cols).t());
        let mut scores = qk.dot(&features.t());
        scores *= scale;
        softmax_rows(&mut scores);
        let p = scores.dot(&features);
        attended.slice_mut(cols).assign(&p.dot(&params.w_v.slice(cols)));
        attention.push(scores);
        pooled.push(p);
    }
    let mut x = attended.dot(&params.w_o);
    if config.residual {
        x += &params.queries;
    }
    let dm = config.model_dim as f64;
    let mut x_hat = x;
    let mut inv_std = Array1::zeros(config.tokens);
    for (t, mut row) in x_hat.rows_mut().into_iter().enumerate() {
        let mean = row.sum() / dm;
        row -= mean;
        let var = row.iter().map(|v| v * v).sum::<f64>() / dm;
        let is = 1.0 / (var + LN_EPS).sqrt();
        row *= is;
        inv_std[t] = is;
    }
    let normed = &x_hat * &params.ln_gain + &params.ln_bias;
    let out = normed.dot(&params.w_proj) + &params.b_proj;
    Ok((out, FusionCache { q_proj, attention, pooled, attended, x_hat, inv_std, normed }))
}

/// Accumulates parameter gradients of a scalar loss into `grad`, given
/// `d_out = dL/d(embedding tokens)`.
pub fn fusion_backward(
    params: &FusionParams,
    features: ArrayView2<f64>,
    cache: &FusionCache,
    d_out: ArrayView2<f64>,
    config: &EncoderConfig,
    grad: &mut FusionParams,
) {
    let dh = config.head_dim();
    let scale = 1.0 / (dh as f64).sqrt();
    let dm = config.model_dim as f64;

    grad.w_proj += &cache.normed.t().dot(&d_out);
    grad.b_proj += &d_out.sum_axis(Axis(0));
    let d_normed = d_out.dot(&params.w_proj.t());

    grad.ln_gain += &(&d_normed * &cache.x_hat).sum_axis(Axis(0));
    grad.ln_bias += &d_normed.sum_axis(Axis(0));
    let mut d_x = &d_normed * &params.ln_gain;
    for (t, mut row) in d_x.rows_mut().into_iter().enumerate() {
        let xh = cache.x_hat.row(t);
        let mean_d = row.sum() / dm;
        let mean_dx = row.iter().zip(xh.iter()).map(|(a, b)| a * b).sum::<f64>() / dm;
        let is = cache.inv_std[t];
        for (v, &x) in row.iter_mut().zip(xh.iter()) {
            *v = is * (*v - mean_d - x * mean_dx);
        }
    }

    if config.residual {
        grad.queries += &d_x;
    }
    grad.w_o += &cache.attended.t().dot(&d_x);
    let d_attended = d_x.dot(&params.w_o.t());

    let mut d_q_proj = Array2::zeros(cache.q_proj.raw_dim());
    for h in 0..config.heads {
        let cols = s![.., h * dh..(h + 1) * dh];
        let d_o = d_attended.slice(cols);
        let a = &cache.attention[h];
        {
            let mut gv = grad.w_v.slice_mut(cols);
            gv += &cache.pooled[h].t().dot(&d_o);
        }
        let d_p = d_o.dot(&params.w_v.slice(cols).t());
        let d_a = d_p.dot(&features.t());
        let mut d_s = d_a;
        for (mut ds_row, a_row) in d_s.rows_mut().into_iter().zip(a.rows()) {
            let dot: f64 = ds_row.iter().zip(a_row.iter()).map(|(x, y)| x * y).sum();
            for (ds, &av) in ds_row.iter_mut().zip(a_row.iter()) {
                *ds = av * (*ds - dot);
            }
        }
        let mut d_qk = d_s.dot(&features);
        d_qk *= scale;
        d_q_proj.slice_mut(cols).assign(&d_qk.dot(&params.w_k.slice(cols)));
        let mut gk = grad.w_k.slice_mut(cols);
        gk += &d_qk.t().dot(&cache.q_proj.slice(cols));
    }
    grad.w_q += &params.queries.t().dot(&d_q_proj);
    grad.queries += &d_q_proj.dot(&params.w_q.t());
}
