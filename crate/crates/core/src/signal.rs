//! Value types shared across the pipeline.

use std::time::Instant;

use serde::{Deserialize, Serialize};

/// A block of calibrated samples, channel-major, in microvolts.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalChunk {
    /// Sample index of the first sample in the chunk.
    pub start: u64,
    /// Samples per second.
    pub fs: f64,
    /// `data[channel][sample]`
    pub data: Vec<Vec<f64>>,
    /// OR of the positive lead-off status bits seen while acquiring the chunk.
    pub leadoff: u8,
    /// When the last sample of the chunk became available from the device.
    pub acquired_at: Option<Instant>,
}

impl SignalChunk {
    pub fn zeros(start: u64, fs: f64, channels: usize, len: usize) -> Self {
        Self::from_channels(start, fs, vec![vec![0.0; len]; channels])
    }

    pub fn from_channels(start: u64, fs: f64, data: Vec<Vec<f64>>) -> Self {
        debug_assert!(data.windows(2).all(|w| w[0].len() == w[1].len()));
        SignalChunk {
            start,
            fs,
            data,
            leadoff: 0,
            acquired_at: None,
        }
    }

    pub fn n_channels(&self) -> usize {
        self.data.len()
    }

    pub fn len(&self) -> usize {
        self.data.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// One past the index of the last sample.
    pub fn end(&self) -> u64 {
        self.start + self.len() as u64
    }

    pub fn channel(&self, ch: usize) -> &[f64] {
        &self.data[ch]
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / self.fs
    }

    /// Keep only the first `len` samples.
    pub fn truncate(&mut self, len: usize) {
        for ch in &mut self.data {
            ch.truncate(len);
        }
    }

    /// Copy of samples `[from, to)` (relative to the chunk start).
    pub fn slice(&self, from: usize, to: usize) -> SignalChunk {
        SignalChunk {
            start: self.start + from as u64,
            fs: self.fs,
            data: self.data.iter().map(|c| c[from..to].to_vec()).collect(),
            leadoff: self.leadoff,
            acquired_at: self.acquired_at,
        }
    }

    /// Concatenate chunks that follow one another without gaps.
    pub fn concat(chunks: &[SignalChunk]) -> Option<SignalChunk> {
        let first = chunks.first()?;
        let mut out =
            SignalChunk::from_channels(first.start, first.fs, vec![Vec::new(); first.n_channels()]);
        for c in chunks {
            if c.start != out.end() || c.n_channels() != out.n_channels() {
                return None;
            }
            for (dst, src) in out.data.iter_mut().zip(&c.data) {
                dst.extend_from_slice(src);
            }
            out.leadoff |= c.leadoff;
        }
        Some(out)
    }
}

/// What produced a marker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MarkerKind {
    User,
    Blink,
    Chew,
    StateChange,
    Protocol,
}

impl MarkerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MarkerKind::User => "user",
            MarkerKind::Blink => "blink",
            MarkerKind::Chew => "chew",
            MarkerKind::StateChange => "state-change",
            MarkerKind::Protocol => "protocol",
        }
    }
}

/// A timestamped annotation on the sample timeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Marker {
    pub sample: u64,
    pub kind: MarkerKind,
    #[serde(default)]
    pub text: String,
}

impl Marker {
    pub fn new(sample: u64, kind: MarkerKind, text: impl Into<String>) -> Self {
        Marker {
            sample,
            kind,
            text: text.into(),
        }
    }
}
