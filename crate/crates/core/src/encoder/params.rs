use rand::Rng;

use super::{EncoderConfig, FusionParams, Modality, ShHeadParams, BACKBONE_DIM};
use crate::error::{Error, Result};
use crate::rng::rng_for;

/// A fixed, ordered collection of named `f64` tensors. Used for optimizer
/// updates, gradient checks and checkpoints.
pub trait TensorSet {
    fn visit(&self, f: &mut dyn FnMut(&str, &[usize], &[f64]));
    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &[usize], &mut [f64]));

    fn num_scalars(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_, _, d| n += d.len());
        n
    }

    fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_scalars());
        self.visit(&mut |_, _, d| out.extend_from_slice(d));
        out
    }

    fn load_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_scalars() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} scalars, got {}",
                self.num_scalars(),
                flat.len()
            )));
        }
        let mut offset = 0;
        self.visit_mut(&mut |_, _, d| {
            d.copy_from_slice(&flat[offset..offset + d.len()]);
            offset += d.len();
        });
        Ok(())
    }

    /// `(name, shape)` of every tensor in visit order.
    fn layout(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        self.visit(&mut |n, s, _| out.push((n.to_owned(), s.to_vec())));
        out
    }
}

/// All trainable encoder state: one fusion module per modality plus the SH
/// head(s).
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub config: EncoderConfig,
    pub fusions: Vec<FusionParams>,
    pub heads: Vec<ShHeadParams>,
}

impl EncoderParams {
    pub fn fusion(&self, modality: Modality) -> &FusionParams {
        &self.fusions[modality.index()]
    }

    pub fn sh_head(&self, modality: Modality) -> &ShHeadParams {
        &self.heads[self.head_index(modality)]
    }

    pub fn head_index(&self, modality: Modality) -> usize {
        if self.heads.len() == 1 {
            0
        } else {
            modality.index()
        }
    }

    /// Parameters with every entry zero, same shapes.
    pub fn zeros(config: &EncoderConfig) -> Self {
        let n_heads = if config.shared_sh_head { 1 } else { Modality::ALL.len() };
        Self {
            config: *config,
            fusions: Modality::ALL.iter().map(|_| FusionParams::zeros(config, BACKBONE_DIM)).collect(),
            heads: (0..n_heads).map(|_| ShHeadParams::zeros(config)).collect(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            config: self.config,
            fusions: self.fusions.iter().map(FusionParams::zeros_like).collect(),
            heads: self.heads.iter().map(ShHeadParams::zeros_like).collect(),
        }
    }
}

macro_rules! visit_fields {
    ($f:expr, $prefix:expr, $obj:expr, $as_slice:ident, [$($field:ident),*]) => {
        $(
            {
                let shape = $obj.$field.shape().to_vec();
                let name = format!("{}.{}", $prefix, stringify!($field));
                $f(&name, &shape, $obj.$field.$as_slice().expect("standard layout"));
            }
        )*
    };
}

impl TensorSet for EncoderParams {
    fn visit(&self, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        for (m, p) in Modality::ALL.iter().zip(&self.fusions) {
            let prefix = format!("fusion.{m}");
            visit_fields!(f, prefix, p, as_slice, [queries, w_q, w_k, w_v, w_o, ln_gain, ln_bias, w_proj, b_proj]);
        }
        for (i, h) in self.heads.iter().enumerate() {
            let prefix = format!("sh_head.{i}");
            visit_fields!(f, prefix, h, as_slice, [w1, b1, w2, b2]);
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &[usize], &mut [f64])) {
        for (m, p) in Modality::ALL.iter().zip(self.fusions.iter_mut()) {
            let prefix = format!("fusion.{m}");
            visit_fields!(f, prefix, p, as_slice_mut, [queries, w_q, w_k, w_v, w_o, ln_gain, ln_bias, w_proj, b_proj]);
        }
        for (i, h) in self.heads.iter_mut().enumerate() {
            let prefix = format!("sh_head.{i}");
            visit_fields!(f, prefix, h, as_slice_mut, [w1, b1, w2, b2]);
        }
    }
}

fn fill_uniform(data: &mut [f64], fan_in: usize, rng: &mut impl Rng) {
    let bound = 1.0 / (fan_in as f64).sqrt();
    for v in data {
        *v = rng.gen_range(-bound..bound);
    }
}

/// Deterministic initialization: weights uniform in `±1/sqrt(fan_in)`,
/// layer-norm gains one, biases zero. Every modality and head draws from an
/// independent sub-stream of `seed`.
pub fn init_params(config: &EncoderConfig, seed: u64) -> Result<EncoderParams> {
    config.validate()?;
    let mut params = EncoderParams::zeros(config);
    for (m, p) in Modality::ALL.iter().zip(params.fusions.iter_mut()) {
        let mut rng = rng_for(seed, &format!("fusion.{m}"));
        fill_uniform(p.queries.as_slice_mut().unwrap(), 1, &mut rng);
        fill_uniform(p.w_q.as_slice_mut().unwrap(), config.model_dim, &mut rng);
        fill_uniform(p.w_k.as_slice_mut().unwrap(), BACKBONE_DIM, &mut rng);
        fill_uniform(p.w_v.as_slice_mut().unwrap(), BACKBONE_DIM, &mut rng);
        fill_uniform(p.w_o.as_slice_mut().unwrap(), config.model_dim, &mut rng);
        p.ln_gain.fill(1.0);
        fill_uniform(p.w_proj.as_slice_mut().unwrap(), config.model_dim, &mut rng);
    }
    for (i, h) in params.heads.iter_mut().enumerate() {
        let mut rng = rng_for(seed, &format!("sh_head.{i}"));
        fill_uniform(h.w1.as_slice_mut().unwrap(), config.tokens * config.dim, &mut rng);
        fill_uniform(h.w2.as_slice_mut().unwrap(), config.head_hidden, &mut rng);
    }
    Ok(params)
}
