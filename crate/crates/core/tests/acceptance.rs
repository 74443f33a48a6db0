//! End-to-end acceptance criteria. Prints one PASS/FAIL line per criterion
//! and exits nonzero if any fails.

use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use pref::checkpoint::Precision;
use pref::phasor::{FrequencyLayout, InitMode, PhasorVolume};
use pref::selftest;
use pref::tasks::{
    extract_mesh, image_fit, iou, predict_sdf, read_image, sdf_fit, synthetic_image, EncoderKind, Image,
    ImageFitConfig, ImageFitOutcome, ImageTask, MaskKind, SdfFitConfig, SdfSource, Sphere,
};
use pref::train::{LossKind, LrSchedule};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn criterion1() -> Outcome {
    let lattice = selftest::transform_agreement(50, 101).unwrap();
    let errors = selftest::interpolation_errors(102).unwrap();
    let ratios: Vec<f64> = errors.windows(2).map(|w| w[0] / w[1]).collect();
    let order = selftest::interpolation_convergence(102).unwrap();
    outcome(
        lattice.passed && order.passed,
        format!(
            "lattice err {:.2e} (tol 1e-5), off-grid error ratios per doubling {:.2?} (finest within 4x/sqrt2..4x*sqrt2, all > 2)",
            lattice.measured, ratios
        ),
    )
}

fn criterion2() -> Outcome {
    let (e1, e2) = selftest::derivative_errors(200, 201).unwrap();
    outcome(e1 <= 1e-4 && e2 <= 1e-3, format!("first {e1:.2e} (tol 1e-4), second {e2:.2e} (tol 1e-3)"))
}

fn criterion3() -> Outcome {
    let energy = selftest::energy_identity(301).unwrap();
    let axis = selftest::regularizer_axis_terms(302).unwrap();
    outcome(
        energy.passed && axis.passed,
        format!(
            "energy {:.2e} (tol 1e-4), axis terms {:.2e} (tol 1e-3)",
            energy.measured, axis.measured
        ),
    )
}

fn criterion4() -> Outcome {
    let (m, e) = selftest::gradient_errors(401).unwrap();
    let adj = selftest::adjoint_error(402).unwrap();
    outcome(
        m <= 1e-4 && e <= 1e-4 && adj <= 1e-6,
        format!("decoder {m:.2e}, coefficients {e:.2e} (tol 1e-4), adjoint {adj:.2e} (tol 1e-6)"),
    )
}

fn regression_config(iterations: u64) -> ImageFitConfig {
    let mut cfg = ImageFitConfig::default();
    cfg.fit.iterations = iterations;
    cfg.fit.loss = LossKind::L2;
    cfg.fit.lr_encoder = LrSchedule::constant(1e-3);
    cfg.fit.lr_mlp = LrSchedule::constant(3e-3);
    cfg.fit.log_every = iterations;
    cfg.batch_size = Some(4096);
    cfg
}

fn synthetic_target() -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let layout = FrequencyLayout::new(2, 16, 3).unwrap();
    let mut vol = PhasorVolume::new(layout, 1, InitMode::Zero).unwrap();
    for z in vol.coefficients_mut() {
        *z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    }
    synthetic_image(&vol, 128, 128).unwrap()
}

fn synthetic_fit() -> ImageFitOutcome {
    image_fit(&ImageTask::new(synthetic_target(), MaskKind::Full), &regression_config(1000)).unwrap()
}

fn criterion5() -> Outcome {
    let synth = synthetic_fit();
    let constant = Image::from_fn(64, 64, |_, _| 0.5);
    let flat = image_fit(&ImageTask::new(constant, MaskKind::Full), &regression_config(500)).unwrap();
    outcome(
        synth.train_psnr >= 50.0 && flat.train_psnr >= 60.0,
        format!(
            "synthetic {:.2} dB (>= 50), constant {:.2} dB after 500 steps (>= 60)",
            synth.train_psnr, flat.train_psnr
        ),
    )
}

fn asset(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("assets").join(name)
}

fn criterion6() -> Outcome {
    let mut wins = 0;
    let mut within = true;
    let mut parts = Vec::new();
    for name in ["camera", "coins", "text"] {
        let task = ImageTask::new(read_image(&asset(&format!("{name}.png"))).unwrap(), MaskKind::Regular4);
        let pref = image_fit(&task, &ImageFitConfig::completion(EncoderKind::Pref)).unwrap();
        let grid = image_fit(&task, &ImageFitConfig::completion(EncoderKind::DenseGrid)).unwrap();
        use pref::encoder::Encoder;
        let (pp, gp) = (pref.encoder.param_count(), grid.encoder.param_count());
        within &= pref.test_psnr >= grid.test_psnr - 0.1 && (pp as f64 - gp as f64).abs() <= 0.01 * pp as f64;
        wins += usize::from(pref.test_psnr > grid.test_psnr);
        parts.push(format!("{name} {:.2} vs {:.2}", pref.test_psnr, grid.test_psnr));
    }
    outcome(within && wins >= 2, format!("held-out PSNR phasor vs grid: {}; wins {wins}/3", parts.join(", ")))
}

fn criterion7() -> Outcome {
    let (err, mag, dense) = selftest::derivative_contrast(701).unwrap();
    outcome(
        mag > 0.0 && mag.is_finite() && err <= 1e-3 && dense <= 1e-6,
        format!("phasor |d2| {mag:.2e}, vs differences {err:.2e} (tol 1e-3); grid |d2| {dense:.2e} (tol 1e-6)"),
    )
}

fn criterion8() -> Outcome {
    let sphere = Sphere::new(0.5);
    let mut fit = sdf_fit(&sphere, &SdfFitConfig::default()).unwrap();
    let (enc, mlp) = (&mut fit.encoder, &fit.mlp);
    let score = iou(
        |p| predict_sdf(enc, mlp, p),
        |p| Ok(p.iter().map(|&q| sphere.signed_distance(q)).collect()),
        64,
    )
    .unwrap();
    let mesh = extract_mesh(&mut fit.encoder, &fit.mlp, 64).unwrap();
    let radial = mesh
        .vertices
        .iter()
        .map(|v| ((v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt() - 0.5).abs())
        .fold(0.0, f64::max);
    let shrunk = Sphere::new(0.45);
    let analytic = iou(
        |p| Ok(p.iter().map(|&q| sphere.signed_distance(q)).collect()),
        |p| Ok(p.iter().map(|&q| shrunk.signed_distance(q)).collect()),
        64,
    )
    .unwrap();
    let (enc, mlp) = (&mut fit.encoder, &fit.mlp);
    let learned = iou(
        |p| predict_sdf(enc, mlp, p),
        |p| Ok(p.iter().map(|&q| shrunk.signed_distance(q)).collect()),
        64,
    )
    .unwrap();
    let ratio = 0.9f64.powi(3);
    outcome(
        score >= 0.99
            && !mesh.is_empty()
            && radial <= 2.0 / 64.0
            && (analytic - ratio).abs() <= 0.01
            && (learned - ratio).abs() <= 0.01,
        format!(
            "IoU {score:.4} (>= 0.99), radial err {radial:.4} (<= {:.4}), shrunk-sphere IoU analytic {analytic:.4} / learned {learned:.4} (0.729 +- 0.01)",
            2.0 / 64.0
        ),
    )
}

fn criterion9() -> Outcome {
    let checks = selftest::filter_checks(901).unwrap();
    let detail: Vec<String> = checks.iter().map(|c| format!("{} {:.2e}", c.name, c.measured)).collect();
    outcome(checks.iter().all(|c| c.passed), detail.join("; "))
}

fn criterion10() -> Outcome {
    let a = selftest::run_all().unwrap();
    let b = selftest::run_all().unwrap();
    let render = |v: &[selftest::Check]| v.iter().map(|c| format!("{c}\n")).collect::<String>();
    let selftest_same = render(&a) == render(&b);
    let cli = |args: &[&str]| Command::new(env!("CARGO_BIN_EXE_pref")).args(args).output().unwrap().stdout;
    let cli_same = cli(&["selftest"]) == cli(&["selftest"]);
    let bytes = |o: &ImageFitOutcome| o.checkpoint(128, 128).to_bytes(Precision::F64).unwrap();
    let (x, y) = (synthetic_fit(), synthetic_fit());
    let fit_same = bytes(&x) == bytes(&y) && x.report.losses == y.report.losses;
    outcome(
        selftest_same && cli_same && fit_same,
        format!("selftest repeat {selftest_same}, cli selftest repeat {cli_same}, fit checkpoint repeat {fit_same}"),
    )
}

fn main() {
    // libtest-style flags (e.g. --nocapture) are accepted and ignored; a bare
    // argument filters criteria by number.
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [(u32, fn() -> Outcome, u64); 10] = [
        (1, criterion1, 30),
        (2, criterion2, 10),
        (3, criterion3, 30),
        (4, criterion4, 60),
        (5, criterion5, 180),
        (6, criterion6, 900),
        (7, criterion7, 10),
        (8, criterion8, 600),
        (9, criterion9, 10),
        (10, criterion10, 180),
    ];
    let mut failures = 0;
    for (id, run, budget) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| *f == id.to_string()) {
            continue;
        }
        let start = Instant::now();
        let o = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(budget);
        let passed = o.passed && in_time;
        failures += usize::from(!passed);
        println!(
            "criterion {id:>2}: {} {} [{:.1}s, budget {budget}s]",
            if passed { "PASS" } else { "FAIL" },
            o.detail,
            elapsed.as_secs_f64()
        );
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
