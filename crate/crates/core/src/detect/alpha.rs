use serde::{Deserialize, Serialize};

use super::DetectError;
use crate::dsp::{
    design_bandpass, mean_square, FilterSpec, FilterState, BAND_POWER_ORDER, SETTLE_S,
};
use crate::signal::SignalChunk;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EyeState {
    #[serde(rename = "eyes-open")]
    Open,
    #[serde(rename = "eyes-closed")]
    Closed,
}

impl EyeState {
    pub fn as_str(self) -> &'static str {
        match self {
            EyeState::Open => "eyes-open",
            EyeState::Closed => "eyes-closed",
        }
    }
}

/// Band power over `[start, end)` sample indices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerWindow {
    pub start: u64,
    pub end: u64,
    pub band_power_uv2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaStateWindow {
    pub start: u64,
    pub end: u64,
    pub band_power_uv2: f64,
    pub state: EyeState,
}

/// Contiguous `window_s` windows of one channel's band power. The channel is
/// filtered causally as one stream; the first [`SETTLE_S`] of the stream is
/// left out of the first window's mean.
pub fn band_power_series(
    stream: &SignalChunk,
    channel: usize,
    band: (f64, f64),
    window_s: f64,
) -> Result<Vec<PowerWindow>, DetectError> {
    let x = stream
        .data
        .get(channel)
        .ok_or_else(|| DetectError::Config(format!("channel {channel} not in stream")))?;
    let sos = design_bandpass(&FilterSpec::bandpass(
        band.0,
        band.1,
        BAND_POWER_ORDER,
        stream.fs,
    ))?;
    let mut st = FilterState::new(sos, 1);
    let mut y = x.clone();
    st.process_channel(0, &mut y);
    let w = (window_s * stream.fs).round() as usize;
    if w == 0 {
        return Err(DetectError::Config(
            "window must hold at least one sample".into(),
        ));
    }
    let settle = (SETTLE_S * stream.fs).round() as usize;
    Ok((0..y.len() / w)
        .map(|i| {
            let from = (i * w).max(settle.min(w - 1));
            PowerWindow {
                start: stream.start + (i * w) as u64,
                end: stream.start + ((i + 1) * w) as u64,
                band_power_uv2: mean_square(&y[from..(i + 1) * w]),
            }
        })
        .collect())
}

/// Mean band power of the windows lying entirely inside `[from, to)`.
pub fn baseline_power(windows: &[PowerWindow], from: u64, to: u64) -> Result<f64, DetectError> {
    let sel: Vec<f64> = windows
        .iter()
        .filter(|w| w.start >= from && w.end <= to)
        .map(|w| w.band_power_uv2)
        .collect();
    if sel.is_empty() {
        return Err(DetectError::Calibration(
            "no windows inside the calibration span".into(),
        ));
    }
    Ok(sel.iter().sum::<f64>() / sel.len() as f64)
}

/// Eyes-closed iff band power exceeds `ratio_threshold × baseline`.
pub fn classify_alpha(
    windows: &[PowerWindow],
    baseline_uv2: f64,
    ratio_threshold: f64,
) -> Result<Vec<AlphaStateWindow>, DetectError> {
    if baseline_uv2.is_nan() || baseline_uv2 <= 0.0 {
        return Err(DetectError::Calibration(format!(
            "baseline power {baseline_uv2} must be positive"
        )));
    }
    if ratio_threshold.is_nan() || ratio_threshold <= 1.0 {
        return Err(DetectError::Config(format!(
            "ratio threshold {ratio_threshold} must exceed 1"
        )));
    }
    Ok(windows
        .iter()
        .map(|w| AlphaStateWindow {
            start: w.start,
            end: w.end,
            band_power_uv2: w.band_power_uv2,
            state: if w.band_power_uv2 > ratio_threshold * baseline_uv2 {
                EyeState::Closed
            } else {
                EyeState::Open
            },
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlphaConfig {
    pub channel: String,
    pub band_hz: (f64, f64),
    pub window_s: f64,
    pub ratio_threshold: f64,
    /// Windows skipped before calibration starts.
    pub settle_windows: usize,
    /// Eyes-open windows averaged into the baseline.
    pub baseline_windows: usize,
    /// Lower bound on the baseline so a noiseless source stays usable.
    pub min_baseline_uv2: f64,
}

impl Default for AlphaConfig {
    fn default() -> Self {
        AlphaConfig {
            channel: "Pz".into(),
            band_hz: (8.0, 12.0),
            window_s: 1.0,
            ratio_threshold: 2.0,
            settle_windows: 1,
            baseline_windows: 5,
            min_baseline_uv2: 0.01,
        }
    }
}

/// Streaming alpha classifier for one channel, self-calibrating on the first
/// windows after start (the subject is assumed to have eyes open).
#[derive(Debug, Clone)]
pub struct AlphaMonitor {
    cfg: AlphaConfig,
    channel: usize,
    filter: FilterState,
    window: usize,
    acc: f64,
    count: usize,
    window_start: Option<u64>,
    seen: usize,
    calibration: Vec<f64>,
    baseline: Option<f64>,
    latest: Option<AlphaStateWindow>,
}

impl AlphaMonitor {
    pub fn new(cfg: AlphaConfig, channel: usize, fs: f64) -> Result<Self, DetectError> {
        let sos = design_bandpass(&FilterSpec::bandpass(
            cfg.band_hz.0,
            cfg.band_hz.1,
            BAND_POWER_ORDER,
            fs,
        ))?;
        let window = ((cfg.window_s * fs).round() as usize).max(1);
        Ok(AlphaMonitor {
            cfg,
            channel,
            filter: FilterState::new(sos, 1),
            window,
            acc: 0.0,
            count: 0,
            window_start: None,
            seen: 0,
            calibration: Vec::new(),
            baseline: None,
            latest: None,
        })
    }

    pub fn channel(&self) -> usize {
        self.channel
    }

    pub fn baseline(&self) -> Option<f64> {
        self.baseline
    }

    pub fn latest(&self) -> Option<&AlphaStateWindow> {
        self.latest.as_ref()
    }

    /// Feed raw (unfiltered) µV; returns each window classified in this chunk.
    pub fn push(&mut self, chunk: &SignalChunk) -> Vec<AlphaStateWindow> {
        let mut out = Vec::new();
        let Some(x) = chunk.data.get(self.channel) else {
            return out;
        };
        for (i, &v) in x.iter().enumerate() {
            let y = self.filter.process_sample(0, v);
            let idx = chunk.start + i as u64;
            let start = *self.window_start.get_or_insert(idx);
            self.acc += y * y;
            self.count += 1;
            if self.count == self.window {
                let p = PowerWindow {
                    start,
                    end: idx + 1,
                    band_power_uv2: self.acc / self.count as f64,
                };
                self.acc = 0.0;
                self.count = 0;
                self.window_start = None;
                if let Some(w) = self.finish_window(p) {
                    out.push(w);
                }
            }
        }
        out
    }

    fn finish_window(&mut self, p: PowerWindow) -> Option<AlphaStateWindow> {
        self.seen += 1;
        if self.seen <= self.cfg.settle_windows {
            return None;
        }
        if self.baseline.is_none() {
            self.calibration.push(p.band_power_uv2);
            if self.calibration.len() < self.cfg.baseline_windows {
                return None;
            }
            let mean = self.calibration.iter().sum::<f64>() / self.calibration.len() as f64;
            self.baseline = Some(mean.max(self.cfg.min_baseline_uv2));
        }
        let baseline = self.baseline?;
        let w = classify_alpha(&[p], baseline, self.cfg.ratio_threshold)
            .ok()?
            .pop()?;
        self.latest = Some(w);
        Some(w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn alpha_stream(amp: f64) -> SignalChunk {
        let x = (0..4000)
            .map(|i| {
                let t = i as f64 / 250.0;
                let a = if t >= 8.0 {
                    amp * (2.0 * PI * 10.0 * t).sin()
                } else {
                    0.0
                };
                a + 3.0 * (2.0 * PI * 2.0 * t).sin() + 2.0 * (2.0 * PI * 10.5 * t).cos()
            })
            .collect();
        SignalChunk::from_channels(0, 250.0, vec![x])
    }

    #[test]
    fn series_and_classification() {
        for amp in [35.0, 65.0] {
            let s = alpha_stream(amp);
            let w = band_power_series(&s, 0, (8.0, 12.0), 1.0).unwrap();
            assert_eq!(w.len(), 16);
            let base = baseline_power(&w, 250, 2000).unwrap();
            let states = classify_alpha(&w, base, 2.0).unwrap();
            for st in &states {
                let want = if st.start >= 2250 {
                    EyeState::Closed
                } else {
                    EyeState::Open
                };
                if st.start != 2000 {
                    assert_eq!(st.state, want, "{amp} {st:?}");
                }
            }
        }
    }

    #[test]
    fn zero_baseline_is_error() {
        assert!(matches!(
            classify_alpha(&[], 0.0, 2.0),
            Err(DetectError::Calibration(_))
        ));
    }

    #[test]
    fn constant_signal_all_open() {
        let s = SignalChunk::from_channels(0, 250.0, vec![vec![10.0; 2500]]);
        let w = band_power_series(&s, 0, (8.0, 12.0), 1.0).unwrap();
        let states = classify_alpha(&w, 1.0, 2.0).unwrap();
        assert!(states.iter().all(|s| s.state == EyeState::Open));
    }

    #[test]
    fn monotone_in_ratio() {
        let s = alpha_stream(50.0);
        let w = band_power_series(&s, 0, (8.0, 12.0), 1.0).unwrap();
        let base = baseline_power(&w, 250, 2000).unwrap();
        let mut prev = classify_alpha(&w, base, 1.5).unwrap();
        for r in [2.0, 5.0, 50.0, 500.0] {
            let next = classify_alpha(&w, base, r).unwrap();
            for (a, b) in prev.iter().zip(&next) {
                assert!(!(a.state == EyeState::Open && b.state == EyeState::Closed));
            }
            prev = next;
        }
    }

    #[test]
    fn live_monitor_follows_state() {
        let s = alpha_stream(50.0);
        let mut m = AlphaMonitor::new(AlphaConfig::default(), 0, 250.0).unwrap();
        let mut out = Vec::new();
        for i in (0..4000).step_by(25) {
            out.extend(m.push(&s.slice(i, i + 25)));
        }
        assert!(m.baseline().is_some());
        assert_eq!(out.len(), 11);
        assert_eq!(out.last().unwrap().state, EyeState::Closed);
        assert_eq!(out[0].state, EyeState::Open);
    }
}
