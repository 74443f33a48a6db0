use pref::checkpoint::{Checkpoint, Precision};
use pref::encoder::Encoder;
use pref::tasks::{image_fit, predict_pixels, synthetic_image, ImageFitConfig, ImageTask, MaskKind};
use pref::phasor::{FrequencyLayout, PhasorVolume};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn short_fit() -> (pref::tasks::ImageFitOutcome, usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let vol = PhasorVolume::random(FrequencyLayout::new(2, 16, 3).unwrap(), 1, 1.0, &mut rng).unwrap();
    let img = synthetic_image(&vol, 32, 32).unwrap();
    let task = ImageTask::new(img, MaskKind::Regular4);
    let mut cfg = ImageFitConfig::default();
    cfg.resolution = 32;
    cfg.reduced = 5;
    cfg.fit.iterations = 10;
    (image_fit(&task, &cfg).unwrap(), 32, 32)
}

#[test]
fn reload_after_ten_steps_is_bit_exact() {
    let (out, w, h) = short_fit();
    let ck = out.checkpoint(w, h);
    let bytes = ck.to_bytes(Precision::F64).unwrap();
    let mut back = Checkpoint::from_bytes(&bytes).unwrap();
    assert_eq!(back.to_bytes(Precision::F64).unwrap(), bytes);
    assert_eq!(back.meta.step, 10);
    assert_eq!(back.encoder.params(), out.encoder.params());
    assert_eq!(back.mlp.params(), out.mlp.params());

    let pixels: Vec<usize> = (0..w * h).collect();
    let mut enc = out.encoder.clone();
    let a = predict_pixels(&mut enc, &out.mlp, w, h, &pixels).unwrap();
    let b = predict_pixels(&mut back.encoder, &back.mlp, w, h, &pixels).unwrap();
    assert!(a.data.iter().zip(&b.data).all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn file_round_trip_and_single_precision() {
    let (out, w, h) = short_fit();
    let ck = out.checkpoint(w, h);
    let dir = std::env::temp_dir().join(format!("pref-ckpt-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("m.ckpt");
    ck.save(&path).unwrap();
    let back = Checkpoint::load(&path).unwrap();
    assert_eq!(back.encoder.params(), ck.encoder.params());

    let single = Checkpoint::from_bytes(&ck.to_bytes(Precision::F32).unwrap()).unwrap();
    for (a, b) in single.encoder.params().iter().zip(ck.encoder.params()) {
        assert_eq!(*a, *b as f32 as f64);
    }
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn same_seed_same_bytes() {
    let (a, w, h) = short_fit();
    let (b, _, _) = short_fit();
    assert_eq!(
        a.checkpoint(w, h).to_bytes(Precision::F64).unwrap(),
        b.checkpoint(w, h).to_bytes(Precision::F64).unwrap()
    );
    assert_eq!(a.report.losses, b.report.losses);
}
