//! Factorized phasor volumes: layout, storage, initialization and filtering.

mod filter;
mod layout;
mod volume;

pub use filter::{
    apply_gaussian_filter, coefficient_energy, gaussian_filter, gaussian_gain, high_band_energy,
};
pub use layout::{FreqVec, FrequencyLayout, MAX_DIMS};
pub use volume::{FieldGrid, InitMode, PhasorVolume};
