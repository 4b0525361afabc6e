//! Electrode impedance from AC lead-off current injection.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::{design_bandpass, mean_square, DspError, FilterSpec, FilterState};
use crate::protocol::DeviceConfig;
use crate::signal::SignalChunk;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImpedanceError {
    #[error("invalid drive: {0}")]
    Config(String),
    #[error("lead-off injection is not active on channel {0}")]
    NotInjecting(usize),
    #[error("window too short: need {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error(transparent)]
    Dsp(#[from] DspError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quality {
    Good,
    Acceptable,
    Poor,
    Open,
}

impl Quality {
    pub fn as_str(self) -> &'static str {
        match self {
            Quality::Good => "good",
            Quality::Acceptable => "acceptable",
            Quality::Poor => "poor",
            Quality::Open => "open",
        }
    }
}

/// Inclusive upper bounds in ohms for each tier; above `poor_max` is open.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityTiers {
    pub good_max: f64,
    pub acceptable_max: f64,
    pub poor_max: f64,
}

impl Default for QualityTiers {
    fn default() -> Self {
        QualityTiers {
            good_max: 10e3,
            acceptable_max: 50e3,
            poor_max: 200e3,
        }
    }
}

impl QualityTiers {
    pub fn classify(&self, ohms: f64) -> Quality {
        if ohms <= self.good_max {
            Quality::Good
        } else if ohms <= self.acceptable_max {
            Quality::Acceptable
        } else if ohms <= self.poor_max {
            Quality::Poor
        } else {
            Quality::Open
        }
    }
}

pub fn classify_quality(ohms: f64) -> Quality {
    QualityTiers::default().classify(ohms)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpedanceReading {
    pub channel: usize,
    pub label: String,
    pub ohms: f64,
    pub drive_hz: f64,
    pub quality: Quality,
}

/// Width of the extraction band around the drive frequency.
pub const EXTRACTION_BANDWIDTH_HZ: f64 = 1.0;
/// Longest span discarded at the start of a window while the narrow filter settles.
pub const MAX_SETTLE_S: f64 = 2.0;

/// Drive amplitude at `drive_hz` as peak-to-peak µV: `2√2 · RMS` of the
/// narrowband-filtered window after its settle span, corrected for the
/// filter's gain at the drive frequency.
pub fn narrowband_peak_to_peak(x: &[f64], fs: f64, drive_hz: f64) -> Result<f64, ImpedanceError> {
    let half = EXTRACTION_BANDWIDTH_HZ / 2.0;
    let spec = FilterSpec::bandpass(drive_hz - half, drive_hz + half, 4, fs);
    let sos = design_bandpass(&spec)?;
    let gain = sos.magnitude(drive_hz);
    let mut st = FilterState::new(sos, 1);
    let mut y = x.to_vec();
    st.process_channel(0, &mut y);
    let skip = ((MAX_SETTLE_S * fs).round() as usize).min(y.len() / 2);
    Ok(2.0 * 2f64.sqrt() * mean_square(&y[skip..]).sqrt() / gain)
}

/// Estimate the contact impedance of `channel` from a window captured with
/// lead-off injection enabled in `config`: `Z = A_pp / I`.
pub fn measure_impedance(
    window: &SignalChunk,
    channel: usize,
    config: &DeviceConfig,
    tiers: &QualityTiers,
    label: &str,
) -> Result<ImpedanceReading, ImpedanceError> {
    if !config.leadoff.is_enabled(channel) {
        return Err(ImpedanceError::NotInjecting(channel));
    }
    let fs = window.fs;
    let drive_hz = config
        .leadoff
        .frequency
        .hz()
        .ok_or_else(|| ImpedanceError::Config("an AC lead-off frequency is required".into()))?;
    if drive_hz + EXTRACTION_BANDWIDTH_HZ / 2.0 >= fs / 2.0 {
        return Err(ImpedanceError::Config(format!(
            "drive {drive_hz} Hz too close to Nyquist ({} Hz)",
            fs / 2.0
        )));
    }
    let needed = fs.round() as usize;
    if window.len() < needed {
        return Err(ImpedanceError::TooShort {
            needed,
            got: window.len(),
        });
    }
    let x = window
        .data
        .get(channel)
        .ok_or_else(|| ImpedanceError::Config(format!("channel {channel} not in window")))?;
    let app_uv = narrowband_peak_to_peak(x, fs, drive_hz)?;
    let ohms = app_uv * 1e-6 / config.leadoff.current.amps();
    Ok(ImpedanceReading {
        channel,
        label: label.to_string(),
        ohms,
        drive_hz,
        quality: tiers.classify(ohms),
    })
}
