//! Causal streaming signal processing.

mod band;
mod butterworth;
mod cwt;
mod epoch;
mod filter;

pub use band::{band_power, mean_square, BAND_POWER_ORDER, SETTLE_S};
pub use butterworth::{design, design_bandpass, design_notch, Biquad, FilterKind, FilterSpec, Sos};
pub use cwt::{cwt_chunk, cwt_morlet, freq_grid, Scalogram, MORLET_W0};
pub use epoch::{epoch_extract, epoch_features, Epoch, EpochFeatures, FEATURE_BANDS};
pub use filter::{filter_process, filter_signal, FilterState};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DspError {
    #[error("invalid filter spec: {0}")]
    Design(String),
    #[error("expected {expected} channels, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("filter designed for {expected} Hz, chunk is {got} Hz")]
    SampleRate { expected: f64, got: f64 },
    #[error("window too short: need {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("{0}")]
    Range(String),
}
