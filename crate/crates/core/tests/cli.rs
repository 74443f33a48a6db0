use std::path::PathBuf;
use std::process::{Command, Output};

use pref::checkpoint::{Checkpoint, TaskMeta};
use pref::encoder::{AnyEncoder, PrefEncoder};
use pref::mlp::{Activation, MlpParams};
use pref::phasor::{FrequencyLayout, InitMode, PhasorVolume};

fn pref(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pref")).args(args).output().unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("pref-cli-test-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}

#[test]
fn selftest_passes_and_repeats() {
    let a = pref(&["selftest"]);
    let b = pref(&["selftest"]);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stdout));
    assert_eq!(a.stdout, b.stdout);
    assert!(String::from_utf8_lossy(&a.stdout).contains("0 failed"));
}

#[test]
fn extract_zero_checkpoint_writes_empty_mesh() {
    let dir = scratch("zero");
    let vol = PhasorVolume::new(FrequencyLayout::new(3, 8, 3).unwrap(), 4, InitMode::Zero).unwrap();
    let mlp = MlpParams::zeros(&[4, 8, 1], Activation::Relu, Activation::Identity).unwrap();
    let ck = Checkpoint::new(TaskMeta::Sdf { domain_scale: 0.45 }, AnyEncoder::Pref(PrefEncoder::new(vol)), mlp);
    let path = dir.join("zero.ckpt");
    ck.save(&path).unwrap();
    let obj = dir.join("zero.obj");
    let out = pref(&["extract", "--ckpt", path.to_str().unwrap(), "--res", "16", "--out", obj.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    let text = std::fs::read_to_string(&obj).unwrap();
    assert!(!text.lines().any(|l| l.starts_with("v ") || l.starts_with("f ")));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn exit_codes() {
    assert_eq!(pref(&["fit-image", "--input", "x.png"]).status.code(), Some(1));
    assert_eq!(pref(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(pref(&["--help"]).status.code(), Some(0));
    let missing = pref(&["filter", "--ckpt", "/nonexistent.ckpt", "--sigma", "1", "--out", "/tmp/x"]);
    assert_eq!(missing.status.code(), Some(2));
    let dir = scratch("garbage");
    let bad = dir.join("bad.ckpt");
    std::fs::write(&bad, b"not a checkpoint").unwrap();
    let out = pref(&["filter", "--ckpt", bad.to_str().unwrap(), "--sigma", "1", "--out", "/tmp/x"]);
    assert_eq!(out.status.code(), Some(2));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn fixed_seed_fit_is_byte_identical() {
    let dir = scratch("det");
    let img = dir.join("img.pgm");
    let mut pgm = String::from("P2\n16 16\n255\n");
    for i in 0..16 {
        for j in 0..16 {
            pgm.push_str(&format!("{} ", (i * 13 + j * 7) % 256));
        }
        pgm.push('\n');
    }
    std::fs::write(&img, pgm).unwrap();
    let run = |name: &str| {
        let ck = dir.join(name);
        let out = pref(&[
            "fit-image", "--input", img.to_str().unwrap(), "--out", ck.to_str().unwrap(),
            "--res", "16", "--reduced", "4", "--iters", "30", "--mask", "regular4", "--seed", "5",
            "--log-every", "10",
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        (std::fs::read(ck).unwrap(), out.stdout)
    };
    let (a, ma) = run("a.ckpt");
    let (b, mb) = run("b.ckpt");
    assert_eq!(a, b);
    assert_eq!(ma, mb);
    let (c, _) = {
        let ck = dir.join("c.ckpt");
        let out = pref(&[
            "fit-image", "--input", img.to_str().unwrap(), "--out", ck.to_str().unwrap(),
            "--res", "16", "--reduced", "4", "--iters", "30", "--mask", "regular4", "--seed", "6",
        ]);
        (std::fs::read(ck).unwrap(), out)
    };
    assert_ne!(a, c);

    let filtered = dir.join("f.ckpt");
    let out = pref(&["filter", "--ckpt", dir.join("a.ckpt").to_str().unwrap(), "--sigma", "0", "--out", filtered.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(std::fs::read(filtered).unwrap(), a);
    let out = pref(&["eval", "--ckpt", dir.join("a.ckpt").to_str().unwrap(), "--image", img.to_str().unwrap(), "--mask", "regular4"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("test_psnr"));
    std::fs::remove_dir_all(&dir).unwrap();
}
