//! Losses, the spectral regularizer, Adam, schedules and the training loop.

mod adam;
mod fit;
mod loss;
mod parseval;
mod schedule;

pub use adam::{Adam, AdamConfig};
pub use fit::{fit, BatchSource, FitConfig, FitReport, MetricRecord, Probe, TrainState};
pub use loss::{loss, psnr, LossKind, MAPE_EPS};
pub use parseval::{parseval_axis_term, parseval_reg};
pub use schedule::{LrSchedule, UnlockSchedule};
