//! Training objective and a small deterministic training loop.

mod gradcheck;
mod loss;

pub use gradcheck::{grad_check, relative_error, GradCheckReport, FD_STEP};
pub use loss::{contrastive_loss, contrastive_on_vectors, pool, sh_loss, unpool_grad, ContrastiveOutput, Pooling};

use std::collections::{HashSet, VecDeque};

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::{
    fusion_backward, fusion_forward_cached, init_params, sh_head_backward, sh_head_forward, stub_backbone, Embedding,
    EncoderConfig, EncoderParams, ImagePayload, Modality, Payload, TensorSet,
};
use crate::error::{invalid, Error, Result};
use crate::rng::{derive_seed, rng_for};
use crate::sh::ShCoefficients;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnConfig {
    pub temperature: f64,
    pub learnable_temperature: bool,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub steps: usize,
    pub seed: u64,
    pub sh_loss_weight: f64,
    /// Supervise the SH head from every modality's embedding, not only the envmap.
    pub sh_on_all_modalities: bool,
    pub pooling: Pooling,
    /// Probability of zeroing the envmap's log-HDR block for a sample in a step.
    pub log_dropout: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for LearnConfig {
    fn default() -> Self {
        Self {
            temperature: 0.07,
            learnable_temperature: false,
            learning_rate: 1e-3,
            batch_size: 32,
            steps: 1000,
            seed: 0,
            sh_loss_weight: 1.0,
            sh_on_all_modalities: true,
            pooling: Pooling::Flatten,
            log_dropout: 0.5,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl LearnConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(invalid(format!("temperature must be positive, got {}", self.temperature)));
        }
        if self.batch_size == 0 {
            return Err(invalid("batch_size must be at least 1"));
        }
        if !(self.learning_rate >= 0.0) || !(self.sh_loss_weight >= 0.0) {
            return Err(invalid("learning_rate and sh_loss_weight must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.log_dropout) {
            return Err(invalid("log_dropout must lie in [0, 1]"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.epsilon > 0.0) {
            return Err(invalid("invalid Adam hyper-parameters"));
        }
        Ok(())
    }
}

/// Encoder parameters plus the contrastive logit scale (`ln(1/temperature)`).
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub encoder: EncoderParams,
    pub log_scale: f64,
}

impl Model {
    pub fn init(config: &EncoderConfig, temperature: f64, seed: u64) -> Result<Self> {
        Ok(Self { encoder: init_params(config, seed)?, log_scale: (1.0 / temperature).ln() })
    }

    pub fn zeros_like(&self) -> Self {
        Self { encoder: self.encoder.zeros_like(), log_scale: 0.0 }
    }

    pub fn temperature(&self) -> f64 {
        (-self.log_scale).exp()
    }
}

impl TensorSet for Model {
    fn visit(&self, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        self.encoder.visit(f);
        f("logit_scale", &[1], std::slice::from_ref(&self.log_scale));
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &[usize], &mut [f64])) {
        self.encoder.visit_mut(f);
        f("logit_scale", &[1], std::slice::from_mut(&mut self.log_scale));
    }
}

/// One aligned training item: a payload per modality and its SH ground truth.
/// Samples sharing a `group` (e.g. crops of one panorama) never share a batch.
#[derive(Debug, Clone)]
pub struct Sample {
    pub id: String,
    pub group: String,
    /// Indexed by [`Modality::index`].
    pub payloads: [Payload; 4],
    pub sh_gt: ShCoefficients,
}

/// A sample with its frozen backbone features computed once.
#[derive(Debug, Clone)]
pub struct PreparedSample {
    pub id: String,
    pub group: String,
    pub features: Vec<Array2<f64>>,
    /// Envmap features with the log-HDR block zeroed, when the envmap payload
    /// carries the 9-channel layout.
    pub envmap_without_log: Option<Array2<f64>>,
    pub sh_gt: ShCoefficients,
}

/// Copy of a 9-channel envmap payload with channels 3..6 (log HDR) zeroed.
pub fn zero_log_block(payload: &ImagePayload) -> Option<ImagePayload> {
    if payload.channels != 9 {
        return None;
    }
    let mut out = payload.clone();
    for px in out.data.chunks_exact_mut(9) {
        px[3..6].fill(0.0);
    }
    Some(out)
}

pub fn prepare_sample(sample: &Sample, backbone_seed: u64) -> Result<PreparedSample> {
    let features = Modality::ALL
        .iter()
        .map(|&m| stub_backbone(&sample.payloads[m.index()], m, backbone_seed).map(|f| f.tokens))
        .collect::<Result<Vec<_>>>()?;
    let envmap_without_log = match &sample.payloads[Modality::Envmap.index()] {
        Payload::Image(img) => match zero_log_block(img) {
            Some(p) => Some(stub_backbone(&Payload::Image(p), Modality::Envmap, backbone_seed)?.tokens),
            None => None,
        },
        Payload::Text(_) => None,
    };
    Ok(PreparedSample {
        id: sample.id.clone(),
        group: sample.group.clone(),
        features,
        envmap_without_log,
        sh_gt: sample.sh_gt,
    })
}

pub fn prepare_samples(samples: &[Sample], backbone_seed: u64) -> Result<Vec<PreparedSample>> {
    samples.iter().map(|s| prepare_sample(s, backbone_seed)).collect()
}

#[derive(Debug, Clone)]
pub struct Batch<'a> {
    pub samples: Vec<&'a PreparedSample>,
    /// Per sample: feed the envmap with its log block dropped.
    pub log_dropped: Vec<bool>,
}

impl<'a> Batch<'a> {
    pub fn new(samples: Vec<&'a PreparedSample>) -> Self {
        let log_dropped = vec![false; samples.len()];
        Self { samples, log_dropped }
    }

    fn features(&self, i: usize, m: Modality) -> ArrayView2<'a, f64> {
        let s = self.samples[i];
        if m == Modality::Envmap && self.log_dropped[i] {
            if let Some(f) = &s.envmap_without_log {
                return f.view();
            }
        }
        s.features[m.index()].view()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub step: usize,
    pub contrastive: f64,
    pub sh: f64,
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct LossOutput {
    pub contrastive: f64,
    pub sh: f64,
    pub total: f64,
    pub grad: Model,
}

fn sh_modalities(config: &LearnConfig) -> &'static [Modality] {
    if config.sh_on_all_modalities {
        &Modality::ALL
    } else {
        &[Modality::Envmap]
    }
}

/// `L_C + w * L_SH` on a batch, with gradients for every parameter in `model`.
pub fn total_loss(batch: &Batch, model: &Model, config: &LearnConfig) -> Result<LossOutput> {
    let n = batch.samples.len();
    if n == 0 {
        return Err(invalid("batch is empty"));
    }
    if batch.log_dropped.len() != n {
        return Err(Error::ShapeMismatch("log_dropped length differs from batch size".into()));
    }
    let enc = &model.encoder;
    let cfg = &enc.config;
    let (t, d) = (cfg.tokens, cfg.dim);
    let width = t * d;

    let mut flat: Vec<Array2<f64>> = Vec::with_capacity(4);
    let mut caches = Vec::with_capacity(4);
    for &m in &Modality::ALL {
        let mut stack = Array2::zeros((n, width));
        let mut per = Vec::with_capacity(n);
        for i in 0..n {
            let (out, cache) = fusion_forward_cached(enc.fusion(m), batch.features(i, m), cfg)?;
            stack.row_mut(i).assign(&ndarray::ArrayView1::from(out.as_slice().expect("contiguous fusion output")));
            per.push(cache);
        }
        flat.push(stack);
        caches.push(per);
    }

    let scale = if config.learnable_temperature { model.log_scale.exp() } else { 1.0 / config.temperature };
    let pooled: Vec<Array2<f64>> = flat.iter().map(|f| pool(f, t, config.pooling)).collect();
    let c = contrastive_on_vectors(&pooled, scale)?;
    let mut d_flat: Vec<Array2<f64>> = c.grads.iter().map(|g| unpool_grad(g, t, config.pooling)).collect();

    let mut grad = model.zeros_like();
    if config.learnable_temperature {
        grad.log_scale = c.d_scale * scale;
    }

    let mut sh_total = 0.0;
    if config.sh_loss_weight > 0.0 {
        let mods = sh_modalities(config);
        let denom = (n * mods.len()) as f64;
        let gt: Vec<[f64; 48]> = batch.samples.iter().map(|s| s.sh_gt.to_flat()).collect();
        for &m in mods {
            let h = enc.head_index(m);
            let (pred, cache) = sh_head_forward(&enc.heads[h], flat[m.index()].view())?;
            let mut d_pred = Array2::zeros(pred.raw_dim());
            for i in 0..n {
                for k in 0..48 {
                    let diff = pred[[i, k]] - gt[i][k];
                    sh_total += diff * diff / 48.0 / denom;
                    d_pred[[i, k]] = config.sh_loss_weight * 2.0 * diff / 48.0 / denom;
                }
            }
            let d_in = sh_head_backward(&enc.heads[h], &cache, d_pred.view(), &mut grad.encoder.heads[h]);
            d_flat[m.index()] += &d_in;
        }
    }

    for &m in &Modality::ALL {
        let params = enc.fusion(m);
        let g = &mut grad.encoder.fusions[m.index()];
        for i in 0..n {
            let d_out = d_flat[m.index()].row(i);
            let d_out = d_out.into_shape_with_order((t, d)).expect("row reshapes to T x D");
            fusion_backward(params, batch.features(i, m), &caches[m.index()][i], d_out, cfg, g);
        }
    }

    Ok(LossOutput { contrastive: c.loss, sh: sh_total, total: c.loss + config.sh_loss_weight * sh_total, grad })
}

/// Adam with bias correction over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
}

impl Adam {
    pub fn new(len: usize, config: &LearnConfig) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
            lr: config.learning_rate,
            beta1: config.beta1,
            beta2: config.beta2,
            epsilon: config.epsilon,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}

/// Draws batches from seed-shuffled epochs, never placing two samples of the
/// same group in one batch.
pub struct BatchSampler<'a> {
    groups: Vec<&'a str>,
    queue: VecDeque<usize>,
    batch_size: usize,
    rng: rand_chacha::ChaCha8Rng,
}

impl<'a> BatchSampler<'a> {
    pub fn new(samples: &'a [PreparedSample], batch_size: usize, seed: u64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let groups: Vec<&str> = samples.iter().map(|s| s.group.as_str()).collect();
        let distinct = groups.iter().collect::<HashSet<_>>().len();
        Ok(Self {
            groups,
            queue: VecDeque::new(),
            batch_size: batch_size.min(distinct),
            rng: rng_for(seed, "batch-sampler"),
        })
    }

    fn refill(&mut self) {
        let mut order: Vec<usize> = (0..self.groups.len()).collect();
        order.shuffle(&mut self.rng);
        self.queue.extend(order);
    }

    pub fn next_indices(&mut self) -> Vec<usize> {
        let mut batch = Vec::with_capacity(self.batch_size);
        let mut used: HashSet<&str> = HashSet::new();
        let mut deferred = Vec::new();
        while batch.len() < self.batch_size {
            if self.queue.is_empty() {
                self.refill();
            }
            let i = self.queue.pop_front().expect("queue refilled");
            if used.insert(self.groups[i]) {
                batch.push(i);
            } else {
                deferred.push(i);
            }
        }
        for i in deferred.into_iter().rev() {
            self.queue.push_front(i);
        }
        batch
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub log: Vec<LossRecord>,
}

pub fn train(samples: &[Sample], encoder: &EncoderConfig, config: &LearnConfig) -> Result<TrainOutcome> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let prepared = prepare_samples(samples, encoder.backbone_seed)?;
    train_prepared(&prepared, encoder, config)
}

/// Training on precomputed backbone features. Deterministic given `config.seed`.
pub fn train_prepared(prepared: &[PreparedSample], encoder: &EncoderConfig, config: &LearnConfig) -> Result<TrainOutcome> {
    config.validate()?;
    encoder.validate()?;
    let mut model = Model::init(encoder, config.temperature, derive_seed(config.seed, "init"))?;
    let mut sampler = BatchSampler::new(prepared, config.batch_size, config.seed)?;
    let mut dropout_rng = rng_for(config.seed, "log-dropout");
    let mut flat = model.to_flat();
    let mut adam = Adam::new(flat.len(), config);
    let mut log = Vec::with_capacity(config.steps);
    for step in 0..config.steps {
        let idx = sampler.next_indices();
        let samples: Vec<&PreparedSample> = idx.iter().map(|&i| &prepared[i]).collect();
        let log_dropped = samples.iter().map(|_| dropout_rng.gen::<f64>() < config.log_dropout).collect();
        let batch = Batch { samples, log_dropped };
        let out = total_loss(&batch, &model, config)?;
        if !out.total.is_finite() {
            return Err(invalid(format!("loss diverged at step {step}")));
        }
        log.push(LossRecord { step, contrastive: out.contrastive, sh: out.sh, total: out.total });
        adam.step(&mut flat, &out.grad.to_flat());
        model.load_flat(&flat)?;
    }
    Ok(TrainOutcome { model, log })
}

/// Embeds every prepared sample in one modality with full (undropped) inputs.
pub fn embed_prepared(model: &Model, prepared: &[PreparedSample], modality: Modality) -> Result<Vec<Embedding>> {
    let cfg = &model.encoder.config;
    prepared
        .iter()
        .map(|s| {
            let (tokens, _) = fusion_forward_cached(model.encoder.fusion(modality), s.features[modality.index()].view(), cfg)?;
            Ok(Embedding { tokens, modality, id: s.id.clone() })
        })
        .collect()
}

/// Mean total loss over a slice of the log.
pub fn mean_total(records: &[LossRecord]) -> f64 {
    records.iter().map(|r| r.total).sum::<f64>() / records.len() as f64
}
