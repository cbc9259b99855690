use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use unilight_core::encoder::{encode, envmap_payload};
use unilight_core::evalkit::{cross_modal_report, image_metrics, rotation_curve};
use unilight_core::io::{
    atomic_write, load_checkpoint, load_ldr_image, load_radiance_image, load_radiance_map, load_sh, load_store,
    save_checkpoint, save_json, save_radiance_image, save_sh, save_store, LightsDocument,
};
use unilight_core::learn::{embed_prepared, prepare_samples, train};
use unilight_core::lights::{detect_lights, find_threshold};
use unilight_core::sh::{fit_sh, render_sh};
use unilight_core::synth::{toy_samples, toy_split, ToyStudyConfig};
use unilight_core::tonemap::reinhard_tonemap;
use unilight_core::{dataset::resample_equirect, EmbeddingStore, Error, ImageMetrics, LdrImage, Modality, Payload, Sample};

use crate::layout::{build_dataset, expand_inputs, list_panoramas, load_samples, panorama_name};
use crate::{CliError, CliResult, Command, Context, RadianceFormat};

pub(crate) fn execute(command: &Command, ctx: &Context) -> CliResult<()> {
    match command {
        Command::Dataset { input } => dataset(input.as_deref(), ctx),
        Command::FitSh { map } => {
            let coeffs = fit_sh(&load_radiance_map(map)?)?;
            let path = ctx.out.join("sh.json");
            save_sh(&coeffs, &path)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::RenderSh { sh, width, format } => {
            if *width < 2 || width % 2 != 0 {
                return Err(CliError::Usage(format!("--width must be an even number >= 2, got {width}")));
            }
            let map = render_sh(&load_sh(sh)?, *width, width / 2)?.to_map()?;
            let name = match format {
                RadianceFormat::Hdr => "render.hdr",
                RadianceFormat::Pfm => "render.pfm",
            };
            let path = ctx.out.join(name);
            save_radiance_image(map.image(), &path)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::DetectLights { map } => {
            let map = load_radiance_map(map)?;
            let cfg = &ctx.config.lights;
            let lights = detect_lights(&map, cfg)?;
            let path = ctx.out.join("lights.json");
            save_json(&LightsDocument::new(find_threshold(&map, cfg)?, &lights), &path)?;
            println!("{} light(s); wrote {}", lights.len(), path.display());
            Ok(())
        }
        Command::Train { dataset, toy, steps } => train_cmd(dataset.as_deref(), *toy, *steps, ctx),
        Command::Embed { dataset, checkpoint, toy } => embed_cmd(dataset.as_deref(), checkpoint, *toy, ctx),
        Command::EvalRetrieval { stores } => eval_retrieval(stores, ctx),
        Command::RotateExp { inputs, checkpoint } => rotate_exp(inputs, checkpoint, ctx),
        Command::EvalRender { pred, gt } => eval_render(pred, gt, ctx),
    }
}

fn dataset(input: Option<&Path>, ctx: &Context) -> CliResult<()> {
    let dir = input
        .map(Path::to_path_buf)
        .or_else(|| ctx.config.dataset.panoramas.clone())
        .ok_or_else(|| CliError::Usage("dataset needs an input directory (argument or dataset.panoramas)".into()))?;
    let sources = list_panoramas(&dir)?;
    if sources.is_empty() {
        return Err(Error::EmptyDataset.into());
    }
    let manifest = ctx.pool.install(|| build_dataset(&sources, &ctx.out, &ctx.config))?;
    let crops: usize = manifest.panoramas.iter().map(|p| p.samples.len()).sum();
    println!("{} panorama(s), {crops} crop(s) in {}", manifest.panoramas.len(), ctx.out.display());
    Ok(())
}

/// Dataset samples, or the toy corpus split (`held_out` picks the side).
fn samples_for(dataset: Option<&Path>, toy: bool, held_out: bool, ctx: &Context) -> CliResult<Vec<Sample>> {
    if toy {
        let study = ToyStudyConfig::default();
        let (train, test) = toy_split(study.total, study.held_out, ctx.config.learn.seed);
        return Ok(toy_samples(if held_out { &test } else { &train })?);
    }
    let dir = dataset.ok_or_else(|| CliError::Usage("pass a dataset directory or --toy".into()))?;
    Ok(ctx.pool.install(|| load_samples(dir, &ctx.config))?)
}

fn train_cmd(dataset: Option<&Path>, toy: bool, steps: Option<usize>, ctx: &Context) -> CliResult<()> {
    let mut config = ctx.config.clone();
    if let Some(s) = steps {
        config.learn.steps = s;
    }
    config.validate()?;
    let samples = samples_for(dataset, toy, false, ctx)?;
    let outcome = ctx.pool.install(|| train(&samples, &config.encoder, &config.learn))?;
    let mut csv = String::from("step,contrastive,sh,total\n");
    for r in &outcome.log {
        csv.push_str(&format!("{},{:.9},{:.9},{:.9}\n", r.step, r.contrastive, r.sh, r.total));
    }
    atomic_write(&ctx.out.join("loss.csv"), csv.as_bytes())?;
    atomic_write(&ctx.out.join("config.toml"), config.to_toml()?.as_bytes())?;
    let path = ctx.out.join("checkpoint.bin");
    save_checkpoint(&outcome.model, &path)?;
    if let Some(last) = outcome.log.last() {
        println!("{} samples, {} steps, final loss {:.4}; wrote {}", samples.len(), outcome.log.len(), last.total, path.display());
    }
    Ok(())
}

fn embed_cmd(dataset: Option<&Path>, checkpoint: &Path, toy: bool, ctx: &Context) -> CliResult<()> {
    let model = load_checkpoint(checkpoint)?;
    let samples = samples_for(dataset, toy, true, ctx)?;
    let cfg = &model.encoder.config;
    let prepared = ctx.pool.install(|| {
        samples.par_chunks(16).map(|c| prepare_samples(c, cfg.backbone_seed)).collect::<Result<Vec<_>, _>>()
    })?;
    let prepared: Vec<_> = prepared.into_iter().flatten().collect();
    for m in Modality::ALL {
        let store = EmbeddingStore::from_embeddings(m, cfg.tokens, cfg.dim, &embed_prepared(&model, &prepared, m)?)?;
        save_store(&store, &ctx.out.join(format!("{}.emb", m.name())))?;
    }
    println!("embedded {} samples x 4 modalities into {}", prepared.len(), ctx.out.display());
    Ok(())
}

fn eval_retrieval(stores: &[PathBuf], ctx: &Context) -> CliResult<()> {
    let stores = stores.iter().map(|p| load_store(p)).collect::<Result<Vec<_>, _>>()?;
    let mut modalities: Vec<Modality> = stores.iter().map(|s| s.modality).collect();
    modalities.sort();
    if modalities.windows(2).any(|w| w[0] == w[1]) {
        return Err(CliError::Usage("each store must hold a different modality".into()));
    }
    // Align every store to the id order of the first.
    let order = &stores[0].ids;
    let lists = stores
        .iter()
        .map(|s| {
            let mut by_id: HashMap<String, _> = s.to_embeddings().into_iter().map(|e| (e.id.clone(), e)).collect();
            let list = order
                .iter()
                .map(|id| by_id.remove(id).ok_or_else(|| Error::MissingGroundTruth(format!("{} store lacks '{id}'", s.modality))))
                .collect::<Result<Vec<_>, _>>()?;
            Ok((s.modality, list))
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let report = cross_modal_report(&lists, &ctx.config.eval.ks)?;
    atomic_write(&ctx.out.join("retrieval.csv"), report.to_csv().as_bytes())?;
    save_json(&report, &ctx.out.join("retrieval.json"))?;
    println!("average: {}", report.average);
    Ok(())
}

fn rotate_exp(inputs: &[PathBuf], checkpoint: &Path, ctx: &Context) -> CliResult<()> {
    let model = load_checkpoint(checkpoint)?;
    let maps = expand_inputs(inputs)?;
    if maps.is_empty() {
        return Err(Error::EmptyDataset.into());
    }
    let t = ctx.config.tonemap;
    let width = ctx.config.dataset.envmap_width;
    let curves = ctx.pool.install(|| {
        maps.par_iter()
            .map(|path| {
                let map = resample_equirect(&load_radiance_map(path)?, width)?;
                let name = panorama_name(path);
                let curve = rotation_curve(
                    |m| {
                        let payload = Payload::Image(envmap_payload(m, t.key, t.gamma, t.i_max)?);
                        encode(&model.encoder, &payload, Modality::Envmap, name.as_str())
                    },
                    &map,
                )?;
                Ok((name, curve))
            })
            .collect::<Result<Vec<_>, Error>>()
    })?;
    let mut csv = String::from("map,angle_deg,cosine_similarity\n");
    for (name, curve) in &curves {
        for (a, s) in curve {
            csv.push_str(&format!("{name},{a},{s:.9}\n"));
        }
    }
    let path = ctx.out.join("rotation.csv");
    atomic_write(&path, csv.as_bytes())?;
    println!("{} map(s); wrote {}", curves.len(), path.display());
    Ok(())
}

fn load_display_image(path: &Path, ctx: &Context) -> Result<LdrImage, Error> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")) {
        return load_ldr_image(path);
    }
    let t = &ctx.config.tonemap;
    reinhard_tonemap(&load_radiance_image(path)?, t.key, t.gamma)
}

fn is_image(p: &Path) -> bool {
    p.is_file() && p.extension().is_some_and(|e| ["png", "hdr", "pfm"].iter().any(|x| e.eq_ignore_ascii_case(x)))
}

/// Pairs of (name, prediction, ground truth): single files, or files with the same name in two directories.
fn render_pairs(pred: &Path, gt: &Path) -> CliResult<Vec<(String, PathBuf, PathBuf)>> {
    if pred.is_file() && gt.is_file() {
        let name = pred.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        return Ok(vec![(name, pred.to_path_buf(), gt.to_path_buf())]);
    }
    if !(pred.is_dir() && gt.is_dir()) {
        return Err(CliError::Usage("--pred and --gt must both be files or both be directories".into()));
    }
    let mut pairs = Vec::new();
    for entry in std::fs::read_dir(pred)? {
        let p = entry?.path();
        if !is_image(&p) {
            continue;
        }
        let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let g = gt.join(&name);
        if !g.is_file() {
            return Err(Error::MissingGroundTruth(format!("no ground truth for {name} in {}", gt.display())).into());
        }
        pairs.push((name, p, g));
    }
    pairs.sort();
    if pairs.is_empty() {
        return Err(Error::EmptyDataset.into());
    }
    Ok(pairs)
}

fn fmt_psnr(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v:.6}")
    }
}

fn eval_render(pred: &Path, gt: &Path, ctx: &Context) -> CliResult<()> {
    let pairs = render_pairs(pred, gt)?;
    let mode = ctx.config.eval.si_rmse;
    let rows = ctx.pool.install(|| {
        pairs
            .par_iter()
            .map(|(name, p, g)| Ok((name.clone(), image_metrics(&load_display_image(p, ctx)?, &load_display_image(g, ctx)?, mode)?)))
            .collect::<Result<Vec<(String, ImageMetrics)>, Error>>()
    })?;
    let mut csv = String::from("image,psnr,rmse,si_rmse,ssim,mae\n");
    let row = |name: &str, m: &ImageMetrics| {
        format!("{name},{},{:.6},{:.6},{:.6},{:.6}\n", fmt_psnr(m.psnr), m.rmse, m.si_rmse, m.ssim, m.mae)
    };
    for (name, m) in &rows {
        csv.push_str(&row(name, m));
    }
    let n = rows.len() as f64;
    let mean = |f: fn(&ImageMetrics) -> f64| rows.iter().map(|(_, m)| f(m)).sum::<f64>() / n;
    let avg = ImageMetrics {
        psnr: mean(|m| m.psnr),
        rmse: mean(|m| m.rmse),
        si_rmse: mean(|m| m.si_rmse),
        ssim: mean(|m| m.ssim),
        mae: mean(|m| m.mae),
    };
    csv.push_str(&row("MEAN", &avg));
    let path = ctx.out.join("render_metrics.csv");
    atomic_write(&path, csv.as_bytes())?;
    println!("{} image(s); mean PSNR {} dB, SSIM {:.4}; wrote {}", rows.len(), fmt_psnr(avg.psnr), avg.ssim, path.display());
    Ok(())
}
