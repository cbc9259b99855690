//! Acceptance suite: one PASS/FAIL line per criterion with pinned tolerances.
//! Runs as a plain binary (`harness = false`) so the report stays in order.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use ndarray::Array2;
use rand::Rng;
use unilight_core::encoder::{encode, envmap_payload, EncoderConfig, Modality, Payload, TensorSet};
use unilight_core::envmap::{direction_map, pixel_direction, EquirectMap, Vec3};
use unilight_core::evalkit::{image_metrics, psnr_from_mse, retrieval_metrics, rotation_curve, si_rmse, SiRmseMode, SimilarityMatrix};
use unilight_core::image::{LdrImage, RgbImage};
use unilight_core::io::{decode_pfm, encode_hdr, decode_hdr, encode_pfm, decode_png, encode_png, EmbeddingStore};
use unilight_core::learn::{grad_check, prepare_samples, total_loss, Batch, LearnConfig, Model, Pooling};
use unilight_core::lights::{detect_lights, find_threshold, threshold_at, LightDetectConfig};
use unilight_core::rng::rng_for;
use unilight_core::sh::{dominant_direction, eval_sh, fit_sh, render_sh, rotate_sh_yaw, sh_basis, sh_index, ShCoefficients, SH_COUNT};
use unilight_core::synth::{run_toy_study, toy_envmap, toy_samples, ToyLight, ToyStudyConfig, ToyStudyResult, ENVMAP_WIDTH};
use unilight_core::tonemap::{DEFAULT_GAMMA, DEFAULT_I_MAX, DEFAULT_KEY};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn run(id: usize, title: &str, f: impl FnOnce() -> Verdict) -> bool {
    let start = Instant::now();
    let v = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
        verdict(false, format!("panicked: {}", msg.unwrap_or_default()))
    });
    let tag = if v.pass { "PASS" } else { "FAIL" };
    println!("[{tag}] {id:>2}. {title}: {} [{:.1}s]", v.detail, start.elapsed().as_secs_f64());
    v.pass
}

// Independent midpoint quadrature weights: sinθ dθ dλ.
fn oracle_weights(w: usize, h: usize) -> Vec<f64> {
    let (dl, dt) = (2.0 * PI / w as f64, PI / h as f64);
    (0..h).flat_map(|v| std::iter::repeat_n(((v as f64 + 0.5) * dt).sin() * dl * dt, w)).collect()
}

fn random_coeffs(rng: &mut impl Rng, dc: f64, spread: f64) -> ShCoefficients {
    let mut c = ShCoefficients::zeros();
    for ch in c.channels.iter_mut() {
        for (i, x) in ch.iter_mut().enumerate() {
            *x = if i == 0 { dc } else { rng.gen_range(-spread..spread) };
        }
    }
    c
}

fn max_coeff_diff(a: &ShCoefficients, b: &ShCoefficients) -> f64 {
    a.to_flat().iter().zip(b.to_flat().iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn sh_map(c: &ShCoefficients, w: usize, warp: impl Fn(Vec3) -> Vec3) -> EquirectMap {
    EquirectMap::from_direction_fn(w, w / 2, |d| eval_sh(c, &warp(d)).map(|v| v as f32)).unwrap()
}

fn c1_sh_analytic() -> Verdict {
    let start = Instant::now();
    let y00 = sh_basis(&Vec3::new(0.3, 0.5, 0.2).normalize()).unwrap()[0];
    let y10 = sh_basis(&Vec3::z()).unwrap()[sh_index(1, 0)];
    let e_basis = (y00 - 0.28209479).abs().max((y10 - 0.48860251).abs());

    let (w, h) = (256, 128);
    let weights = oracle_weights(w, h);
    let basis: Vec<[f64; SH_COUNT]> = direction_map(w, h).unwrap().directions().iter().map(|d| sh_basis(d).unwrap()).collect();
    let mut e_gram = 0.0f64;
    for i in 0..SH_COUNT {
        for j in 0..SH_COUNT {
            let g: f64 = basis.iter().zip(&weights).map(|(y, wt)| y[i] * y[j] * wt).sum();
            e_gram = e_gram.max((g - if i == j { 1.0 } else { 0.0 }).abs());
        }
    }

    let c0 = fit_sh(&EquirectMap::constant(w, h, [0.5; 3]).unwrap()).unwrap().channels[0][0];
    let e_const = (c0 - PI.sqrt()).abs();

    let mut rng = rng_for(1, "acceptance-c1");
    let mut e_idem = 0.0f64;
    for _ in 0..5 {
        let c = random_coeffs(&mut rng, 5.0, 0.1);
        let r = render_sh(&c, w, h).unwrap().to_map().unwrap();
        e_idem = e_idem.max(max_coeff_diff(&fit_sh(&r).unwrap(), &c));
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        e_basis <= 1e-7 && e_gram <= 1e-3 && e_const <= 1e-3 && e_idem <= 1e-3 && secs < 10.0,
        format!(
            "basis err {e_basis:.1e} (tol 1e-7), max|Gram-I| {e_gram:.1e} (tol 1e-3), |c0-sqrt(pi)| {e_const:.1e} (tol 1e-3), \
             fit(render) err {e_idem:.1e} (tol 1e-3), {secs:.1}s (limit 10s)"
        ),
    )
}

fn c2_dominant_direction() -> Verdict {
    let start = Instant::now();
    let mut rng = rng_for(2, "acceptance-c2");
    let mut hits = 0;
    let mut worst = 0.0f64;
    for _ in 0..50 {
        // Uniform on the sphere.
        let z: f64 = rng.gen_range(-1.0..1.0);
        let phi: f64 = rng.gen_range(0.0..2.0 * PI);
        let r = (1.0 - z * z).sqrt();
        let truth = Vec3::new(r * phi.cos(), z, r * phi.sin());
        let map = EquirectMap::from_direction_fn(256, 128, |d| {
            let s = 50.0 * (60.0 * (d.dot(&truth) - 1.0)).exp() + 0.05;
            [s as f32; 3]
        })
        .unwrap();
        let est = dominant_direction(&fit_sh(&map).unwrap()).unwrap();
        let err = est.dot(&truth).clamp(-1.0, 1.0).acos().to_degrees();
        worst = worst.max(err);
        if err <= 2.0 {
            hits += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        hits * 100 >= 95 * 50 && secs < 30.0,
        format!("{hits}/50 within 2 deg (need >= 95%), worst {worst:.3} deg, {secs:.1}s (limit 30s)"),
    )
}

fn c3_rotation_equivariance() -> Verdict {
    let mut rng = rng_for(3, "acceptance-c3");
    let (mut e_rot, mut e_norm) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let c = random_coeffs(&mut rng, 5.0, 0.1);
        let a: f64 = rng.gen_range(-180.0..180.0);
        let rotated = rotate_sh_yaw(&c, a);
        // Oracle: the map whose longitude λ shows the source at λ + a, fitted afresh.
        let (s, co) = a.to_radians().sin_cos();
        let refit = fit_sh(&sh_map(&c, 256, |d| Vec3::new(d.x * co + d.z * s, d.y, d.z * co - d.x * s))).unwrap();
        e_rot = e_rot.max(max_coeff_diff(&rotated, &refit));
        e_norm = e_norm.max((rotated.norm() - c.norm()).abs());
    }
    verdict(
        e_rot <= 1e-3 && e_norm <= 1e-9,
        format!("20 pairs: max coeff err {e_rot:.1e} (tol 1e-3), norm drift {e_norm:.1e} (tol 1e-9)"),
    )
}

fn c4_gradients() -> Verdict {
    let start = Instant::now();
    let lights: Vec<ToyLight> = ToyLight::all().into_iter().step_by(97).take(3).collect();
    let prepared = prepare_samples(&toy_samples(&lights).unwrap(), 7).unwrap();
    let batch = Batch { samples: prepared.iter().collect(), log_dropped: vec![false, true, false] };
    let tiny = EncoderConfig { tokens: 2, dim: 4, model_dim: 4, heads: 2, head_hidden: 3, ..Default::default() };
    let variants: Vec<(&str, EncoderConfig, LearnConfig)> = vec![
        ("default", tiny, LearnConfig::default()),
        (
            "per-modality heads, no residual, learnable temperature, mean-pool",
            EncoderConfig { shared_sh_head: false, residual: false, ..tiny },
            LearnConfig { learnable_temperature: true, pooling: Pooling::MeanPool, ..Default::default() },
        ),
    ];
    let mut worst = 0.0f64;
    let mut checked = 0;
    for (i, (_, enc, learn)) in variants.iter().enumerate() {
        let mut model = Model::init(enc, learn.temperature, 11 + i as u64).unwrap();
        // A generic point away from the near-uniform attention of the initialization.
        let mut offset = rng_for(11 + i as u64, "grad-check-offset");
        let point: Vec<f64> = model.to_flat().iter().map(|v| v + offset.gen_range(-1.0..1.0)).collect();
        let report = grad_check(
            |p| {
                model.load_flat(p).unwrap();
                let out = total_loss(&batch, &model, learn).unwrap();
                (out.total, out.grad.to_flat())
            },
            &point,
            1e-4,
        );
        worst = worst.max(report.max_rel_error);
        checked += report.checked;
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        worst <= 1e-4 && secs < 60.0,
        format!("{checked} parameters over {} variants: max rel err {worst:.2e} (tol 1e-4), {secs:.1}s (limit 60s)", variants.len()),
    )
}

struct ToyRuns {
    sh3: Vec<ToyStudyResult>,
    nosh: Vec<f64>,
    sh3_secs: f64,
}

fn toy_runs() -> ToyRuns {
    let mut sh3 = Vec::new();
    let mut nosh = Vec::new();
    let mut sh3_secs = 0.0;
    for seed in 0..3 {
        let mut cfg = ToyStudyConfig::default();
        cfg.learn.seed = seed;
        let t = Instant::now();
        sh3.push(run_toy_study(&cfg).unwrap());
        if seed == 0 {
            sh3_secs = t.elapsed().as_secs_f64();
        }
        cfg.learn.sh_loss_weight = 0.0;
        nosh.push(run_toy_study(&cfg).unwrap().trained.average.recall_at(1).unwrap());
    }
    ToyRuns { sh3, nosh, sh3_secs }
}

fn c5_toy_study(runs: &ToyRuns) -> Verdict {
    let r = &runs.sh3[0];
    let steps = r.outcome.log.len();
    let trained = r.trained.average.recall_at(1).unwrap();
    let untrained = r.untrained.average.recall_at(1).unwrap();
    let chance = 100.0 / r.held_out.len() as f64;
    verdict(
        steps <= 2000 && trained >= 90.0 && (untrained - chance).abs() <= 5.0 && runs.sh3_secs < 600.0,
        format!(
            "{steps} steps, {} held out: trained R@1 {trained:.1}% (need >= 90), untrained {untrained:.1}% \
             (chance {chance:.1} +/- 5), {:.0}s (limit 600s)",
            r.held_out.len(),
            runs.sh3_secs
        ),
    )
}

fn c6_rotation_shape(runs: &ToyRuns) -> Verdict {
    let r = &runs.sh3[0];
    let params = &r.outcome.model.encoder;
    let mut ok = 0;
    let mut worst_zero = 0.0f64;
    for light in r.held_out.iter().take(20) {
        let map = toy_envmap(light, ENVMAP_WIDTH).unwrap();
        let curve = rotation_curve(
            |m| {
                let p = Payload::Image(envmap_payload(m, DEFAULT_KEY, DEFAULT_GAMMA, DEFAULT_I_MAX)?);
                encode(params, &p, Modality::Envmap, light.id())
            },
            &map,
        )
        .unwrap();
        let at = |pred: fn(f64) -> bool| {
            let v: Vec<f64> = curve.iter().filter(|(a, _)| pred(a.abs())).map(|(_, s)| *s).collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        let zero = curve.iter().find(|(a, _)| *a == 0.0).unwrap().1;
        worst_zero = worst_zero.max((zero - 1.0).abs());
        if curve.len() == 13 && (zero - 1.0).abs() <= 1e-9 && at(|a| a >= 150.0) < at(|a| a <= 30.0) {
            ok += 1;
        }
    }
    verdict(
        ok >= 18,
        format!("{ok}/20 maps with far-mean < near-mean and sim(0) = 1 (need >= 18), max |sim(0)-1| {worst_zero:.1e}"),
    )
}

fn c7_ablation(runs: &ToyRuns) -> Verdict {
    let sh3: Vec<f64> = runs.sh3.iter().map(|r| r.trained.average.recall_at(1).unwrap()).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (a, b) = (mean(&sh3), mean(&runs.nosh));
    let list = |v: &[f64]| v.iter().map(|x| format!("{x:.1}")).collect::<Vec<_>>().join("/");
    verdict(b < a, format!("mean held-out R@1 SH3 {a:.2} ({}) vs NOSH {b:.2} ({}), need NOSH < SH3", list(&sh3), list(&runs.nosh)))
}

fn c8_retrieval_oracle() -> Verdict {
    let mut rng = rng_for(8, "acceptance-c8");
    let ks = [1, 5, 10];
    let mut mismatches = 0;
    for _ in 0..50 {
        let n = 100;
        // Coarse values force ties, which both sides break by index.
        let values = Array2::from_shape_fn((n, n), |_| (rng.gen_range(-1.0f64..1.0) * 20.0).round() / 20.0);
        let gt: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
        let ids: Vec<String> = (0..n).map(|i| i.to_string()).collect();
        let sim = SimilarityMatrix::new(values.clone(), ids.clone(), ids).unwrap();
        let m = retrieval_metrics(&sim, &gt, &ks).unwrap();
        let ranks: Vec<f64> = (0..n)
            .map(|i| {
                let mut order: Vec<usize> = (0..n).collect();
                order.sort_by(|&a, &b| values[[i, b]].partial_cmp(&values[[i, a]]).unwrap().then(a.cmp(&b)));
                (order.iter().position(|&j| j == gt[i]).unwrap() + 1) as f64
            })
            .collect();
        let mut sorted = ranks.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0;
        let mean = ranks.iter().sum::<f64>() / n as f64;
        let mrr = ranks.iter().map(|r| 1.0 / r).sum::<f64>() / n as f64;
        let recall_ok = ks.iter().all(|&k| {
            let hits = ranks.iter().filter(|&&r| r <= k as f64).count();
            m.recall_at(k) == Some(100.0 * hits as f64 / n as f64)
        });
        if !(recall_ok && m.median_rank == median && m.mean_rank == mean && (m.mrr - mrr).abs() <= 1e-12) {
            mismatches += 1;
        }
    }
    verdict(mismatches == 0, format!("{mismatches}/50 matrices differ from the sort oracle (R@K, median, mean exact; MRR tol 1e-12)"))
}

fn block_map(w: usize, h: usize, blocks: &[(usize, usize, usize, f32)]) -> EquirectMap {
    let mut img = RgbImage::filled(w, h, [0.05; 3]).unwrap();
    for &(u0, v0, size, level) in blocks {
        for dv in 0..size {
            for du in 0..size {
                img.set((u0 + du) % w, v0 + dv, [level; 3]);
            }
        }
    }
    EquirectMap::new(img).unwrap()
}

fn c9_light_detection() -> Verdict {
    let cfg = LightDetectConfig::default();
    let mut notes = Vec::new();
    let mut ok = true;
    // Two discs, each with a single hottest pixel.
    let mut two = block_map(128, 64, &[(20, 20, 5, 10.0), (90, 30, 5, 12.0)]).into_image();
    two.set(22, 22, [40.0; 3]);
    two.set(91, 33, [60.0; 3]);
    let found = detect_lights(&EquirectMap::new(two).unwrap(), &cfg).unwrap();
    let mut peaks: Vec<(usize, usize)> = found.iter().map(|l| l.pixel).collect();
    peaks.sort();
    ok &= found.len() == 2 && peaks == vec![(22, 22), (91, 33)];
    notes.push(format!("two discs -> {} lights at {peaks:?}", found.len()));
    // One disc straddling the seam.
    let mut seam = block_map(128, 64, &[(125, 40, 6, 9.0)]).into_image();
    seam.set(1, 42, [30.0; 3]);
    let found = detect_lights(&EquirectMap::new(seam).unwrap(), &cfg).unwrap();
    ok &= found.len() == 1 && found[0].pixel == (1, 42);
    notes.push(format!("seam disc -> {} light(s)", found.len()));
    let seq = [threshold_at(4.0, 0), threshold_at(4.0, 1), threshold_at(4.0, 2)];
    ok &= seq[0] == 4.0 && seq[1] == 4.0 / 2f64.sqrt() && seq[2] == 2.0 && (seq[1] - 2.8284).abs() < 1e-4;
    // Peaks of 3.0 and 2.5 stop at the second and third thresholds.
    let t3 = find_threshold(&block_map(16, 8, &[(3, 3, 1, 3.0)]), &cfg).unwrap();
    let t25 = find_threshold(&block_map(16, 8, &[(3, 3, 1, 2.5)]), &cfg).unwrap();
    ok &= t3 == seq[1] && t25 == 2.0;
    notes.push(format!("tau {:.4} -> {:.4} -> {:.4}, search stops at {t3:.4} / {t25:.4}", seq[0], seq[1], seq[2]));
    verdict(ok, notes.join("; "))
}

fn c10_codecs() -> Verdict {
    let mut rng = rng_for(10, "acceptance-c10");
    let img = RgbImage::from_fn(64, 32, |_, _| [rng.gen_range(0.0..1000.0), rng.gen_range(0.0..1.0), rng.gen_range(0.0..5.0)]).unwrap();
    let pfm_ok = decode_pfm(&encode_pfm(&img))
        .unwrap()
        .pixels()
        .iter()
        .zip(img.pixels())
        .all(|(a, b)| a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));

    let store = EmbeddingStore {
        modality: Modality::Text,
        tokens: 8,
        dim: 512,
        ids: (0..100).map(|i| format!("s{i}")).collect(),
        data: (0..100 * 8 * 512).map(|_| rng.gen_range(-1.0f32..1.0)).collect(),
    };
    let back = EmbeddingStore::decode(&store.encode().unwrap()).unwrap();
    let store_ok = back.ids == store.ids && back.data.iter().zip(&store.data).all(|(a, b)| a.to_bits() == b.to_bits());

    let hdr = decode_hdr(&encode_hdr(&img).unwrap()).unwrap();
    let rgbe_err = img
        .pixels()
        .iter()
        .zip(hdr.pixels())
        .map(|(p, q)| {
            let m = p[0].max(p[1]).max(p[2]) as f64;
            (0..3).map(|c| (p[c] as f64 - q[c] as f64).abs() / m).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);

    let ldr = LdrImage::new(RgbImage::from_fn(64, 32, |_, _| [rng.gen(), rng.gen(), rng.gen()]).unwrap()).unwrap();
    let png_err = decode_png(&encode_png(&ldr).unwrap())
        .unwrap()
        .image()
        .channel_values()
        .zip(ldr.image().channel_values())
        .map(|(a, b)| (a as f64 - b as f64).abs())
        .fold(0.0, f64::max);
    verdict(
        pfm_ok && store_ok && rgbe_err <= 1.0 / 256.0 && png_err <= 0.5 / 255.0 + 1e-7,
        format!(
            "PFM bit-exact {pfm_ok}, store (100x8x512) bit-exact {store_ok}, RGBE rel err {rgbe_err:.2e} (tol {:.2e}), \
             PNG err {png_err:.2e} (tol {:.2e})",
            1.0 / 256.0,
            0.5 / 255.0
        ),
    )
}

fn c11_metrics() -> Verdict {
    let mut rng = rng_for(11, "acceptance-c11");
    let gt = LdrImage::new(RgbImage::from_fn(48, 32, |_, _| [rng.gen(), rng.gen(), rng.gen()]).unwrap()).unwrap();
    let same = image_metrics(&gt, &gt, SiRmseMode::Linear).unwrap();
    let psnr = psnr_from_mse(0.01);
    let g: Vec<f64> = (0..1000).map(|_| rng.gen_range(0.0..0.5)).collect();
    let p: Vec<f64> = g.iter().map(|v| 2.0 * v).collect();
    let si = si_rmse(&p, &g, SiRmseMode::Linear);
    let rmse = (g.iter().zip(&p).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / g.len() as f64).sqrt();
    let ok = same.rmse.abs() <= 1e-6
        && (same.ssim - 1.0).abs() <= 1e-6
        && same.psnr == f64::INFINITY
        && (psnr - 20.0).abs() <= 1e-6
        && si.abs() <= 1e-6
        && rmse > 0.0;
    verdict(
        ok,
        format!(
            "identity RMSE {:.1e}, SSIM {:.7}, PSNR {}; PSNR(0.01) {psnr:.7} dB; SI-RMSE(2gt, gt) {si:.1e} with RMSE {rmse:.3} (tol 1e-6)",
            same.rmse, same.ssim, same.psnr
        ),
    )
}

fn fixture_panorama(light: Vec3, tint: [f32; 3]) -> RgbImage {
    let l = light.normalize();
    RgbImage::from_fn(256, 128, |u, v| {
        let d = pixel_direction(u, v, 256, 128);
        let s = 80.0 * (80.0 * (d.dot(&l) - 1.0)).exp() + 0.3 * (1.0 + d.y) + 0.05;
        tint.map(|t| t * s as f32)
    })
    .unwrap()
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn c12_cli(suite_start: Instant) -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("panoramas");
    std::fs::create_dir_all(&input).unwrap();
    std::fs::write(input.join("indoor.pfm"), encode_pfm(&fixture_panorama(Vec3::new(0.4, 0.6, 0.7), [1.0, 0.85, 0.7]))).unwrap();
    std::fs::write(input.join("outdoor.hdr"), encode_hdr(&fixture_panorama(Vec3::new(-0.8, 0.3, -0.2), [0.7, 0.85, 1.0])).unwrap()).unwrap();
    let run_dataset = |out: &Path, jobs: &str| {
        unilight_cli::run(["unilight", "dataset", input.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "7", "--jobs", jobs])
    };
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let codes = [run_dataset(&a, "1"), run_dataset(&b, "2")];
    let (sa, sb) = (snapshot(&a), snapshot(&b));
    let count = |suffix: &str| sa.keys().filter(|k| k.ends_with(suffix)).count();
    let crops = sa.keys().filter(|k| k.contains("crop_") && k.ends_with(".png")).count();
    let identical = sa == sb;
    let secs = suite_start.elapsed().as_secs_f64();
    verdict(
        codes == [0, 0] && crops == 18 && count("sh.json") == 2 && count("lights.json") == 2 && identical && secs < 900.0,
        format!(
            "exit codes {codes:?}, {crops} crops, {} SH documents, {} light lists, {} files byte-identical across reruns: {identical}; \
             suite time {secs:.0}s (limit 900s)",
            count("sh.json"),
            count("lights.json"),
            sa.len()
        ),
    )
}

fn main() {
    // libtest flags such as --list ask for a test listing, not a run.
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let start = Instant::now();
    let mut passed = Vec::new();
    passed.push(run(1, "SH analytic suite", c1_sh_analytic));
    passed.push(run(2, "Dominant-direction recovery", c2_dominant_direction));
    passed.push(run(3, "Rotation equivariance", c3_rotation_equivariance));
    passed.push(run(4, "Gradient verification", c4_gradients));
    let t = Instant::now();
    let runs = catch_unwind(toy_runs).ok();
    eprintln!("toy studies: {:?}", Duration::from_secs_f64(t.elapsed().as_secs_f64().round()));
    let runs = runs.as_ref();
    let with_runs = |f: fn(&ToyRuns) -> Verdict| move || runs.map(f).unwrap_or_else(|| verdict(false, "toy study failed to run"));
    passed.push(run(5, "Toy contrastive study", with_runs(c5_toy_study)));
    passed.push(run(6, "Rotation-similarity shape", with_runs(c6_rotation_shape)));
    passed.push(run(7, "Ablation direction (NOSH < SH3)", with_runs(c7_ablation)));
    passed.push(run(8, "Retrieval metric oracle", c8_retrieval_oracle));
    passed.push(run(9, "Light detection", c9_light_detection));
    passed.push(run(10, "Codec/store bit-exactness", c10_codecs));
    passed.push(run(11, "Metric formulas", c11_metrics));
    passed.push(run(12, "End-to-end CLI", || c12_cli(start)));
    let n = passed.iter().filter(|&&p| p).count();
    println!("acceptance: {n}/{} criteria passed in {:.0}s", passed.len(), start.elapsed().as_secs_f64());
    if n != passed.len() {
        std::process::exit(1);
    }
}
