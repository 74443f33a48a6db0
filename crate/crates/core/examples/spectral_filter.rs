//! Low-pass a phasor volume directly in the frequency domain.

use pref::phasor::{coefficient_energy, gaussian_filter, high_band_energy, FrequencyLayout, PhasorVolume};
use pref::tasks::{synthetic_image, write_png};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> pref::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let vol = PhasorVolume::random(FrequencyLayout::new(2, 64, 6)?, 1, 1.0, &mut rng)?;
    println!("{:>6} {:>12} {:>12}", "sigma", "energy", "high band");
    for sigma in [0.0, 0.5, 1.0, 2.0, 4.0, 8.0] {
        let smooth = gaussian_filter(&vol, sigma)?;
        println!(
            "{sigma:>6.1} {:>12.4} {:>12.4}",
            coefficient_energy(&smooth),
            high_band_energy(&smooth, 8)
        );
        let path = std::env::temp_dir().join(format!("pref_filter_{sigma}.png"));
        write_png(&path, &synthetic_image(&smooth, 128, 128)?)?;
    }
    Ok(())
}
