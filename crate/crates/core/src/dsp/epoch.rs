use serde::Serialize;

use super::{band_power, mean_square, DspError};
use crate::signal::{Marker, SignalChunk};

/// Fixed-length analysis window.
#[derive(Debug, Clone, PartialEq)]
pub struct Epoch {
    pub start: u64,
    pub fs: f64,
    /// Channel-major µV.
    pub data: Vec<Vec<f64>>,
    /// Markers whose sample index falls inside the window.
    pub markers: Vec<Marker>,
}

impl Epoch {
    pub fn len(&self) -> usize {
        self.data.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn label(&self) -> Option<&Marker> {
        self.markers.first()
    }
}

/// Sliding windows of `round(window_s * fs)` samples advancing by
/// `round(hop_s * fs)`.
pub fn epoch_extract(
    stream: &SignalChunk,
    markers: &[Marker],
    window_s: f64,
    hop_s: f64,
) -> Result<Vec<Epoch>, DspError> {
    if !(hop_s > 0.0 && window_s >= hop_s) {
        return Err(DspError::Range(format!(
            "need window_s >= hop_s > 0, got window {window_s} hop {hop_s}"
        )));
    }
    let w = (window_s * stream.fs).round() as usize;
    let hop = ((hop_s * stream.fs).round() as usize).max(1);
    if w == 0 || stream.len() < w {
        return Ok(Vec::new());
    }
    let count = (stream.len() - w) / hop + 1;
    Ok((0..count)
        .map(|i| {
            let from = i * hop;
            let start = stream.start + from as u64;
            Epoch {
                start,
                fs: stream.fs,
                data: stream
                    .data
                    .iter()
                    .map(|c| c[from..from + w].to_vec())
                    .collect(),
                markers: markers
                    .iter()
                    .filter(|m| m.sample >= start && m.sample < start + w as u64)
                    .cloned()
                    .collect(),
            }
        })
        .collect())
}

/// Conventional EEG bands used for exported features.
pub const FEATURE_BANDS: [(&str, f64, f64); 5] = [
    ("delta", 1.0, 4.0),
    ("theta", 4.0, 8.0),
    ("alpha", 8.0, 12.0),
    ("beta", 12.0, 30.0),
    ("gamma", 30.0, 40.0),
];

/// Per-channel summary of one epoch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochFeatures {
    pub start: u64,
    pub label: Option<String>,
    pub mean: Vec<f64>,
    pub rms: Vec<f64>,
    /// `FEATURE_BANDS` order, each a per-channel µV² vector.
    pub band_power: Vec<Vec<f64>>,
}

pub fn epoch_features(epoch: &Epoch) -> Result<EpochFeatures, DspError> {
    let chunk = SignalChunk::from_channels(epoch.start, epoch.fs, epoch.data.clone());
    let band_power = FEATURE_BANDS
        .iter()
        .map(|&(_, lo, hi)| band_power(&chunk, (lo, hi)))
        .collect::<Result<_, _>>()?;
    Ok(EpochFeatures {
        start: epoch.start,
        label: epoch.label().map(|m| m.kind.as_str().to_string()),
        mean: epoch
            .data
            .iter()
            .map(|c| c.iter().sum::<f64>() / c.len().max(1) as f64)
            .collect(),
        rms: epoch.data.iter().map(|c| mean_square(c).sqrt()).collect(),
        band_power,
    })
}
