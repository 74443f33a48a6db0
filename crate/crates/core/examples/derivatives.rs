//! Analytic field derivatives compared with a trilinear grid's.
//!
//! The phasor field is smooth, so its second derivative is finite and matches
//! finite differences; a piecewise-linear grid has zero curvature inside
//! every cell.

use pref::encoder::{DenseGridEncoder, Encoder};
use pref::phasor::{FrequencyLayout, PhasorVolume};
use pref::transform::{eval_exact, eval_exact_derivative, Derivative};
use pref::Matrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn line(x0: f64, y: f64) -> Matrix {
    Matrix::from_rows(&[vec![x0 - 1e-3, y], vec![x0, y], vec![x0 + 1e-3, y]]).unwrap()
}

fn main() -> pref::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let vol = PhasorVolume::random(FrequencyLayout::new(2, 16, 4)?, 1, 1.0, &mut rng)?;
    let mut grid = DenseGridEncoder::random(2, 16, 1, 1.0, &mut rng)?;

    println!("{:>6} {:>14} {:>14} {:>14}", "x", "phasor d2", "phasor fd", "grid fd");
    for i in 0..8 {
        // cell centers of the 16-vertex grid
        let x = (2 * i + 1) as f64 / 30.0;
        let pts = line(x, 0.4);
        let f = eval_exact(&vol, &pts)?;
        let fd = (f.data[0] - 2.0 * f.data[1] + f.data[2]) / 1e-6;
        let exact = eval_exact_derivative(&vol, &pts.slice_rows(1, 2), Derivative::new(0, 2)?)?;
        let g = grid.encode(&pts)?;
        let gfd = (g.data[0] - 2.0 * g.data[1] + g.data[2]) / 1e-6;
        println!("{x:>6.3} {:>14.4} {fd:>14.4} {gfd:>14.2e}", exact.data[0]);
    }
    Ok(())
}
