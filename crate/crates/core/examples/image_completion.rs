//! Reconstruct the bundled test images from a quarter of their pixels and
//! compare against a parameter-matched dense feature grid.
//!
//! cargo run --release --example image_completion

use std::path::Path;

use pref::encoder::Encoder;
use pref::tasks::{image_fit, read_image, EncoderKind, ImageFitConfig, ImageTask, MaskKind};

fn main() -> pref::Result<()> {
    let assets = Path::new(env!("CARGO_MANIFEST_DIR")).join("assets");
    println!("{:<8} {:>10} {:>10} {:>8}", "image", "phasor", "grid", "params");
    for name in ["camera", "coins", "text"] {
        let image = read_image(&assets.join(format!("{name}.png")))?;
        let task = ImageTask::new(image, MaskKind::Regular4);
        let pref = image_fit(&task, &ImageFitConfig::completion(EncoderKind::Pref))?;
        let grid = image_fit(&task, &ImageFitConfig::completion(EncoderKind::DenseGrid))?;
        println!(
            "{name:<8} {:>8.2}dB {:>8.2}dB {:>8}",
            pref.test_psnr,
            grid.test_psnr,
            pref.encoder.param_count()
        );
    }
    Ok(())
}
