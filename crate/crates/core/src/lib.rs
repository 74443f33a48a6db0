//! Phasorial embedding fields.
//!
//! A phasor volume stores complex Fourier coefficients of a multi-channel
//! feature field. Features at arbitrary coordinates come from an FFT over
//! each factor's full axes, linear interpolation of the resulting map, and a
//! short sum of exponentials along the log-sampled axis. A small MLP decodes
//! the features into task outputs, and the whole stack trains end to end.

pub mod checkpoint;
pub mod cli;
pub mod diff;
pub mod encoder;
pub mod error;
pub mod linalg;
pub mod mlp;
pub mod phasor;
pub mod selftest;
pub mod tasks;
pub mod train;
pub mod transform;

mod fft;

pub use error::{PrefError, Result};
pub use linalg::Matrix;
