//! Two-layer perceptron predicting degree-3 SH coefficients from the
//! flattened embedding tokens.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use super::{EncoderConfig, Embedding};
use crate::error::{Error, Result};
use crate::sh::{ShCoefficients, SH_CHANNELS, SH_COUNT};

pub const SH_OUTPUTS: usize = SH_CHANNELS * SH_COUNT;

#[derive(Debug, Clone, PartialEq)]
pub struct ShHeadParams {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

impl ShHeadParams {
    pub fn zeros(config: &EncoderConfig) -> Self {
        let input = config.tokens * config.dim;
        // Without biases the bias tensors are empty and never applied.
        let (b1, b2) = if config.sh_head_bias { (config.head_hidden, SH_OUTPUTS) } else { (0, 0) };
        Self {
            w1: Array2::zeros((input, config.head_hidden)),
            b1: Array1::zeros(b1),
            w2: Array2::zeros((config.head_hidden, SH_OUTPUTS)),
            b2: Array1::zeros(b2),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            w1: Array2::zeros(self.w1.raw_dim()),
            b1: Array1::zeros(self.b1.raw_dim()),
            w2: Array2::zeros(self.w2.raw_dim()),
            b2: Array1::zeros(self.b2.raw_dim()),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.nrows()
    }
}

#[derive(Debug, Clone)]
pub struct ShHeadCache {
    input: Array2<f64>,
    hidden: Array2<f64>,
}

/// Batched forward: `inputs` holds one flattened embedding per row; returns
/// one row of 48 channel-major coefficients per input.
pub fn sh_head_forward(params: &ShHeadParams, inputs: ArrayView2<f64>) -> Result<(Array2<f64>, ShHeadCache)> {
    if inputs.ncols() != params.input_dim() {
        return Err(Error::ShapeMismatch(format!(
            "SH head expects {} inputs, got {}",
            params.input_dim(),
            inputs.ncols()
        )));
    }
    let mut pre = inputs.dot(&params.w1);
    if !params.b1.is_empty() {
        pre += &params.b1;
    }
    let hidden = pre.mapv_into(f64::tanh);
    let mut out = hidden.dot(&params.w2);
    if !params.b2.is_empty() {
        out += &params.b2;
    }
    Ok((out, ShHeadCache { input: inputs.to_owned(), hidden }))
}

/// Accumulates parameter gradients and returns `dL/d(inputs)`.
pub fn sh_head_backward(
    params: &ShHeadParams,
    cache: &ShHeadCache,
    d_out: ArrayView2<f64>,
    grad: &mut ShHeadParams,
) -> Array2<f64> {
    grad.w2 += &cache.hidden.t().dot(&d_out);
    let mut d_hidden = d_out.dot(&params.w2.t());
    d_hidden.zip_mut_with(&cache.hidden, |d, &a| *d *= 1.0 - a * a);
    grad.w1 += &cache.input.t().dot(&d_hidden);
    if !grad.b2.is_empty() {
        grad.b2 += &d_out.sum_axis(Axis(0));
        grad.b1 += &d_hidden.sum_axis(Axis(0));
    }
    d_hidden.dot(&params.w1.t())
}

pub fn predict_sh(params: &ShHeadParams, embedding: &Embedding) -> Result<ShCoefficients> {
    let flat = embedding.flat();
    let input = ArrayView2::from_shape((1, flat.len()), flat).expect("row view of a contiguous slice");
    let (out, _) = sh_head_forward(params, input)?;
    ShCoefficients::from_flat(out.as_slice().expect("contiguous head output"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::{init_params, Modality};

    fn cfg() -> EncoderConfig {
        EncoderConfig { tokens: 2, dim: 8, model_dim: 8, heads: 2, head_hidden: 5, ..Default::default() }
    }

    fn embedding(c: &EncoderConfig, salt: f64) -> Embedding {
        Embedding {
            tokens: Array2::from_shape_fn((c.tokens, c.dim), |(i, j)| ((i * 3 + j) as f64 + salt).sin()),
            modality: Modality::Envmap,
            id: "x".into(),
        }
    }

    #[test]
    fn produces_48_coefficients_deterministically() {
        let c = cfg();
        let p = init_params(&c, 2).unwrap();
        let e = embedding(&c, 0.1);
        let a = predict_sh(p.sh_head(Modality::Envmap), &e).unwrap();
        let b = predict_sh(p.sh_head(Modality::Envmap), &e).unwrap();
        assert_eq!(a.to_flat().len(), 48);
        assert_eq!(a, b);
    }

    #[test]
    fn zero_weights_without_bias_give_zero() {
        let c = EncoderConfig { sh_head_bias: false, ..cfg() };
        let head = ShHeadParams::zeros(&c);
        let out = predict_sh(&head, &embedding(&c, 0.4)).unwrap();
        assert!(out.to_flat().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn shape_mismatch() {
        let c = cfg();
        let head = ShHeadParams::zeros(&c);
        let e = Embedding { tokens: Array2::zeros((3, 8)), modality: Modality::Text, id: String::new() };
        assert!(predict_sh(&head, &e).is_err());
    }

    #[test]
    fn backward_matches_finite_differences() {
        let c = cfg();
        let p = init_params(&c, 9).unwrap().sh_head(Modality::Envmap).clone();
        let x = Array2::from_shape_fn((3, 16), |(i, j)| ((i * 16 + j) as f64 * 0.3).cos());
        let target = Array2::from_shape_fn((3, SH_OUTPUTS), |(i, j)| ((i + j) as f64 * 0.05).sin());
        let loss = |p: &ShHeadParams, x: &Array2<f64>| {
            let (out, _) = sh_head_forward(p, x.view()).unwrap();
            (&out - &target).mapv(|v| v * v).sum()
        };
        let (out, cache) = sh_head_forward(&p, x.view()).unwrap();
        let d_out = (&out - &target) * 2.0;
        let mut g = p.zeros_like();
        let dx = sh_head_backward(&p, &cache, d_out.view(), &mut g);
        let h = 1e-6;
        let mut plus = p.clone();
        plus.w1[[4, 2]] += h;
        let mut minus = p.clone();
        minus.w1[[4, 2]] -= h;
        let num = (loss(&plus, &x) - loss(&minus, &x)) / (2.0 * h);
        assert!((num - g.w1[[4, 2]]).abs() < 1e-6 * (1.0 + num.abs()));
        let mut xp = x.clone();
        xp[[1, 7]] += h;
        let mut xm = x.clone();
        xm[[1, 7]] -= h;
        let num = (loss(&p, &xp) - loss(&p, &xm)) / (2.0 * h);
        assert!((num - dx[[1, 7]]).abs() < 1e-6 * (1.0 + num.abs()));
    }
}
