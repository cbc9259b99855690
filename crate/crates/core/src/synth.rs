//! Synthetic lighting corpus where every modality is rendered from one planted
//! light (direction + colour). Used for tests, benches and the toy study.

use rand::seq::SliceRandom;

use crate::encoder::{envmap_payload, rgb_payload, EncoderConfig, ImagePayload, Modality, Payload};
use crate::evalkit::{cross_modal_report, RetrievalReport, DEFAULT_KS};
use crate::envmap::{Vec3, EquirectMap};
use crate::error::Result;
use crate::image::RgbImage;
use crate::learn::{embed_prepared, prepare_samples, train_prepared, LearnConfig, Model, Sample, TrainOutcome};
use crate::rng::{derive_seed, rng_for};
use crate::sh::fit_sh;
use crate::tonemap::{reinhard_tonemap, DEFAULT_GAMMA, DEFAULT_I_MAX, DEFAULT_KEY};

pub const AZIMUTHS: usize = 16;
pub const ELEVATIONS: [f64; 4] = [10.0, 30.0, 50.0, 70.0];
const ELEVATION_WORDS: [&str; 4] = ["near the horizon", "low in the sky", "high in the sky", "almost overhead"];
const COMPASS: [&str; 16] = [
    "north", "north-northeast", "northeast", "east-northeast", "east", "east-southeast", "southeast",
    "south-southeast", "south", "south-southwest", "southwest", "west-southwest", "west", "west-northwest",
    "northwest", "north-northwest",
];
pub const COLORS: [(&str, [f32; 3]); 8] = [
    ("white", [1.0, 1.0, 1.0]),
    ("warm orange", [1.0, 0.55, 0.2]),
    ("cool blue", [0.3, 0.5, 1.0]),
    ("red", [1.0, 0.15, 0.1]),
    ("green", [0.2, 1.0, 0.25]),
    ("purple", [0.6, 0.2, 1.0]),
    ("yellow", [1.0, 0.95, 0.2]),
    ("cyan", [0.15, 0.9, 0.9]),
];

pub const ENVMAP_WIDTH: usize = 64;
pub const IMAGE_SIZE: usize = 32;
pub const IRRADIANCE_DISC: usize = 16;
const LOBE_PEAK: f64 = 40.0;
const LOBE_SHARPNESS: f64 = 40.0;
const GLOW: f64 = 0.3;
const FLOOR: f64 = 0.02;

/// A planted light: azimuth index (north = +z, clockwise towards +x = east),
/// elevation index and colour index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ToyLight {
    pub azimuth: usize,
    pub elevation: usize,
    pub color: usize,
}

impl ToyLight {
    pub fn all() -> Vec<ToyLight> {
        let mut out = Vec::with_capacity(AZIMUTHS * ELEVATIONS.len() * COLORS.len());
        for color in 0..COLORS.len() {
            for elevation in 0..ELEVATIONS.len() {
                for azimuth in 0..AZIMUTHS {
                    out.push(ToyLight { azimuth, elevation, color });
                }
            }
        }
        out
    }

    pub fn azimuth_deg(&self) -> f64 {
        self.azimuth as f64 * 360.0 / AZIMUTHS as f64
    }

    pub fn direction(&self) -> Vec3 {
        let lon = self.azimuth_deg().to_radians();
        let el = ELEVATIONS[self.elevation].to_radians();
        Vec3::new(el.cos() * lon.sin(), el.sin(), el.cos() * lon.cos())
    }

    pub fn rgb(&self) -> [f32; 3] {
        COLORS[self.color].1
    }

    pub fn description(&self) -> String {
        format!(
            "{} light from the {}, {}",
            COLORS[self.color].0, COMPASS[self.azimuth], ELEVATION_WORDS[self.elevation]
        )
    }

    pub fn id(&self) -> String {
        format!("c{}-e{}-a{:02}", self.color, self.elevation, self.azimuth)
    }
}

fn scaled(rgb: [f32; 3], s: f64) -> [f32; 3] {
    [(rgb[0] as f64 * s) as f32, (rgb[1] as f64 * s) as f32, (rgb[2] as f64 * s) as f32]
}

/// Radiance arriving from `d`: a sharp lobe, a broad glow and a grey floor.
pub fn toy_radiance(light: &ToyLight, d: &Vec3) -> [f32; 3] {
    let c = d.dot(&light.direction());
    let s = LOBE_PEAK * (LOBE_SHARPNESS * (c - 1.0)).exp() + GLOW * 0.5 * (1.0 + c);
    let rgb = scaled(light.rgb(), s);
    [rgb[0] + FLOOR as f32, rgb[1] + FLOOR as f32, rgb[2] + FLOOR as f32]
}

pub fn toy_envmap(light: &ToyLight, width: usize) -> Result<EquirectMap> {
    EquirectMap::from_direction_fn(width, width / 2, |d| toy_radiance(light, &d))
}

/// Diffuse + wrap + specular shading for a surface normal seen from +z.
fn shade(light: &ToyLight, n: &Vec3) -> f64 {
    let l = light.direction();
    let ndl = n.dot(&l);
    let view = Vec3::new(0.0, 0.0, 1.0);
    let r = 2.0 * ndl * n - l;
    let spec = r.dot(&view).max(0.0).powi(24);
    1.5 * ndl.max(0.0) + 0.5 * (1.0 + ndl) + 2.0 * spec
}

fn disc_normal(u: usize, v: usize, size: usize, facing: f64) -> Option<Vec3> {
    let x = (u as f64 + 0.5) / size as f64 * 2.0 - 1.0;
    let y = 1.0 - (v as f64 + 0.5) / size as f64 * 2.0;
    let r2 = x * x + y * y;
    (r2 < 1.0).then(|| Vec3::new(x * facing, y, facing * (1.0 - r2).sqrt()))
}

/// A tone-mapped glossy sphere on a grey background.
pub fn toy_sphere_image(light: &ToyLight) -> Result<RgbImage> {
    let rgb = light.rgb();
    let hdr = RgbImage::from_fn(IMAGE_SIZE, IMAGE_SIZE, |u, v| match disc_normal(u, v, IMAGE_SIZE, 1.0) {
        Some(n) => scaled(rgb, shade(light, &n)),
        None => [0.2; 3],
    })?;
    Ok(reinhard_tonemap(&hdr, DEFAULT_KEY, DEFAULT_GAMMA)?.into_inner())
}

/// Diffuse irradiance of the front (+z) and back (-z) hemispheres of a
/// sphere, side by side.
pub fn toy_irradiance(light: &ToyLight) -> Result<RgbImage> {
    let s = IRRADIANCE_DISC;
    let rgb = light.rgb();
    let l = light.direction();
    RgbImage::from_fn(2 * s, s, |u, v| {
        let facing = if u < s { 1.0 } else { -1.0 };
        match disc_normal(u % s, v, s, facing) {
            Some(n) => {
                let ndl = n.dot(&l);
                let e = 0.8 * ndl.max(0.0) + 0.2 * 0.5 * (1.0 + ndl);
                scaled(rgb, e)
            }
            None => [0.0; 3],
        }
    })
}

pub fn toy_sample(light: &ToyLight) -> Result<Sample> {
    let map = toy_envmap(light, ENVMAP_WIDTH)?;
    let env: ImagePayload = envmap_payload(&map, DEFAULT_KEY, DEFAULT_GAMMA, DEFAULT_I_MAX)?;
    Ok(Sample {
        id: light.id(),
        group: light.id(),
        payloads: [
            Payload::Image(env),
            Payload::Image(rgb_payload(&toy_sphere_image(light)?)),
            Payload::Image(rgb_payload(&toy_irradiance(light)?)),
            Payload::Text(light.description()),
        ],
        sh_gt: fit_sh(&map)?,
    })
}

/// `count` distinct lights drawn without replacement, split into train and
/// held-out parts.
pub fn toy_split(count: usize, held_out: usize, seed: u64) -> (Vec<ToyLight>, Vec<ToyLight>) {
    let mut all = ToyLight::all();
    all.shuffle(&mut rng_for(seed, "toy-split"));
    all.truncate(count.min(all.len()));
    let test = all.split_off(all.len() - held_out.min(all.len()));
    (all, test)
}

pub fn toy_samples(lights: &[ToyLight]) -> Result<Vec<Sample>> {
    lights.iter().map(toy_sample).collect()
}

#[derive(Debug, Clone)]
pub struct ToyStudyConfig {
    pub total: usize,
    pub held_out: usize,
    pub split_seed: u64,
    pub encoder: EncoderConfig,
    pub learn: LearnConfig,
}

impl Default for ToyStudyConfig {
    fn default() -> Self {
        Self {
            total: 256,
            held_out: 64,
            split_seed: 0,
            encoder: EncoderConfig { tokens: 8, dim: 64, model_dim: 32, heads: 4, head_hidden: 64, ..Default::default() },
            learn: LearnConfig { steps: 1000, batch_size: 32, learning_rate: 2e-3, ..Default::default() },
        }
    }
}

#[derive(Debug, Clone)]
pub struct ToyStudyResult {
    pub trained: RetrievalReport,
    pub untrained: RetrievalReport,
    pub outcome: TrainOutcome,
    pub held_out: Vec<ToyLight>,
}

/// Held-out retrieval over all ordered modality pairs for an encoder trained
/// on the toy corpus, and for the same encoder before training.
pub fn run_toy_study(config: &ToyStudyConfig) -> Result<ToyStudyResult> {
    let (train_lights, test_lights) = toy_split(config.total, config.held_out, config.split_seed);
    let seed = config.encoder.backbone_seed;
    let train_set = prepare_samples(&toy_samples(&train_lights)?, seed)?;
    let test_set = prepare_samples(&toy_samples(&test_lights)?, seed)?;
    let outcome = train_prepared(&train_set, &config.encoder, &config.learn)?;
    let untrained = Model::init(&config.encoder, config.learn.temperature, derive_seed(config.learn.seed, "init"))?;
    let report = |model: &Model| -> Result<RetrievalReport> {
        let lists = Modality::ALL
            .iter()
            .map(|&m| Ok((m, embed_prepared(model, &test_set, m)?)))
            .collect::<Result<Vec<_>>>()?;
        cross_modal_report(&lists, &DEFAULT_KS)
    };
    Ok(ToyStudyResult {
        trained: report(&outcome.model)?,
        untrained: report(&untrained)?,
        outcome,
        held_out: test_lights,
    })
}
