//! Save a short fit, reload it and confirm the predictions are identical.

use pref::checkpoint::{Checkpoint, Precision};
use pref::tasks::{image_fit, predict_pixels, Image, ImageFitConfig, ImageTask, MaskKind};

fn main() -> pref::Result<()> {
    let image = Image::from_fn(32, 32, |i, j| 0.5 + 0.4 * ((i as f64) * 0.3).sin() * ((j as f64) * 0.2).cos());
    let mut cfg = ImageFitConfig::default();
    cfg.resolution = 32;
    cfg.reduced = 5;
    cfg.fit.iterations = 50;
    let out = image_fit(&ImageTask::new(image, MaskKind::Full), &cfg)?;

    let path = std::env::temp_dir().join("pref_example.ckpt");
    let ck = out.checkpoint(32, 32);
    ck.save(&path)?;
    let f32_len = ck.to_bytes(Precision::F32)?.len();
    println!("saved {} ({} bytes; {} in single precision)", path.display(), std::fs::metadata(&path)?.len(), f32_len);

    let mut back = Checkpoint::load(&path)?;
    let pixels: Vec<usize> = (0..32 * 32).collect();
    let mut enc = out.encoder.clone();
    let before = predict_pixels(&mut enc, &out.mlp, 32, 32, &pixels)?;
    let after = predict_pixels(&mut back.encoder, &back.mlp, 32, 32, &pixels)?;
    let identical = before.data.iter().zip(&after.data).all(|(a, b)| a.to_bits() == b.to_bits());
    println!("step {}  reload identical: {identical}", back.meta.step);
    Ok(())
}
