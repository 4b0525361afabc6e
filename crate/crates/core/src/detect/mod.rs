//! Online detectors for eye-blink/chewing artifacts and alpha eyes-open/closed state.

mod alpha;
mod artifact;

pub use alpha::{
    band_power_series, baseline_power, classify_alpha, AlphaConfig, AlphaMonitor, AlphaStateWindow,
    EyeState, PowerWindow,
};
pub use artifact::{
    classify_artifacts, detect_artifacts, frontal_channels, group_bursts, ArtifactConfig,
    ArtifactEvent, ArtifactKind, ArtifactTracker, Crossing, ThresholdDetector,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectError {
    #[error("calibration failed: {0}")]
    Calibration(String),
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Dsp(#[from] crate::dsp::DspError),
}
