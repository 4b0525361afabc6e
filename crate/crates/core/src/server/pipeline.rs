//! Per-chunk processing shared by the live rig and offline tools.

use serde::{Deserialize, Serialize};

use super::control::AlphaStatus;
use crate::detect::{
    AlphaConfig, AlphaMonitor, AlphaStateWindow, ArtifactConfig, ArtifactEvent, ArtifactTracker,
    DetectError, EyeState,
};
use crate::dsp::{design_bandpass, FilterSpec, FilterState};
use crate::montage::Montage;
use crate::signal::{Marker, MarkerKind, SignalChunk};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineOptions {
    /// Display and detection band.
    pub band_hz: (f64, f64),
    pub order: usize,
    pub artifact: ArtifactConfig,
    pub alpha: AlphaConfig,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            band_hz: (1.0, 40.0),
            order: 4,
            artifact: ArtifactConfig::default(),
            alpha: AlphaConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub filtered: SignalChunk,
    pub events: Vec<ArtifactEvent>,
    pub alpha: Vec<AlphaStateWindow>,
    /// Eyes-open/closed transitions as markers.
    pub state_changes: Vec<Marker>,
}

/// Bandpass filter, artifact tracker and alpha monitor over a live stream.
#[derive(Debug, Clone)]
pub struct Pipeline {
    filter: FilterState,
    tracker: ArtifactTracker,
    alpha: Option<AlphaMonitor>,
    alpha_label: String,
    last_state: Option<EyeState>,
}

impl Pipeline {
    pub fn new(fs: f64, montage: &Montage, opts: &PipelineOptions) -> Result<Self, DetectError> {
        let n = montage.labels().len();
        let sos = design_bandpass(&FilterSpec::bandpass(
            opts.band_hz.0,
            opts.band_hz.1,
            opts.order,
            fs,
        ))?;
        let alpha = match montage.index_of(&opts.alpha.channel) {
            Ok(ch) => Some(AlphaMonitor::new(opts.alpha.clone(), ch, fs)?),
            Err(_) => None,
        };
        Ok(Pipeline {
            filter: FilterState::new(sos, n),
            tracker: ArtifactTracker::new(opts.artifact.clone(), fs, montage),
            alpha,
            alpha_label: opts.alpha.channel.clone(),
            last_state: None,
        })
    }

    pub fn process(&mut self, raw: &SignalChunk) -> Result<PipelineOutput, DetectError> {
        let mut filtered = raw.clone();
        self.filter.process_in_place(&mut filtered)?;
        let events = self.tracker.push(&filtered);
        let alpha = self.alpha.as_mut().map(|m| m.push(raw)).unwrap_or_default();
        let mut state_changes = Vec::new();
        for w in &alpha {
            if self.last_state.is_some_and(|s| s != w.state) {
                state_changes.push(Marker::new(
                    w.start,
                    MarkerKind::StateChange,
                    w.state.as_str(),
                ));
            }
            self.last_state = Some(w.state);
        }
        Ok(PipelineOutput {
            filtered,
            events,
            alpha,
            state_changes,
        })
    }

    /// Events still held back at end of stream.
    pub fn finish(&mut self) -> Vec<ArtifactEvent> {
        self.tracker.finish()
    }

    pub fn alpha_status(&self) -> Option<AlphaStatus> {
        self.alpha.as_ref().map(|m| AlphaStatus {
            channel: self.alpha_label.clone(),
            baseline_uv2: m.baseline(),
            latest: m.latest().copied(),
        })
    }
}
