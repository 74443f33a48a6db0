//! Fit a 128x128 image that a small phasor volume represents exactly.
//!
//! cargo run --release --example image_regression [iterations]

use pref::phasor::{FrequencyLayout, PhasorVolume};
use pref::tasks::{image_fit, render, synthetic_image, write_png, ImageFitConfig, ImageTask, MaskKind};
use pref::train::{LossKind, LrSchedule};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> pref::Result<()> {
    let iterations = std::env::args().nth(1).map_or(1000, |s| s.parse().expect("iteration count"));
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let source = PhasorVolume::random(FrequencyLayout::new(2, 16, 3)?, 1, 1.0, &mut rng)?;
    let target = synthetic_image(&source, 128, 128)?;

    let mut cfg = ImageFitConfig::default();
    cfg.batch_size = Some(4096);
    cfg.fit.iterations = iterations;
    cfg.fit.loss = LossKind::L2;
    cfg.fit.lr_encoder = LrSchedule::constant(1e-3);
    cfg.fit.lr_mlp = LrSchedule::constant(3e-3);
    cfg.fit.log_every = (iterations / 10).max(1);

    let mut out = image_fit(&ImageTask::new(target.clone(), MaskKind::Full), &cfg)?;
    for r in &out.report.records {
        println!("step {:>5}  loss {:.3e}  psnr {:.2}", r.step, r.loss, r.metric.unwrap_or(f64::NAN));
    }
    println!("final PSNR {:.2} dB", out.train_psnr);

    let dir = std::env::temp_dir();
    write_png(&dir.join("pref_target.png"), &target)?;
    write_png(&dir.join("pref_fit.png"), &render(&mut out.encoder, &out.mlp, 128, 128)?)?;
    println!("wrote {}", dir.join("pref_fit.png").display());
    Ok(())
}
