use serde::{Deserialize, Serialize};

use crate::montage::Montage;
use crate::signal::{Marker, MarkerKind, SignalChunk};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArtifactKind {
    Blink,
    Chew,
    Generic,
}

impl ArtifactKind {
    pub fn marker_kind(self) -> MarkerKind {
        match self {
            ArtifactKind::Blink => MarkerKind::Blink,
            ArtifactKind::Chew => MarkerKind::Chew,
            ArtifactKind::Generic => MarkerKind::Protocol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactEvent {
    pub kind: ArtifactKind,
    pub channels: Vec<usize>,
    pub onset: u64,
    pub peak_uv: f64,
}

impl ArtifactEvent {
    pub fn to_marker(&self, montage: &Montage) -> Marker {
        let sites: Vec<&str> = self.channels.iter().map(|&c| montage.label(c)).collect();
        Marker::new(
            self.onset,
            self.kind.marker_kind(),
            format!(
                "{} {:.0} uV [{}]",
                self.kind_str(),
                self.peak_uv,
                sites.join(",")
            ),
        )
    }

    pub fn kind_str(&self) -> &'static str {
        match self.kind {
            ArtifactKind::Blink => "blink",
            ArtifactKind::Chew => "chew",
            ArtifactKind::Generic => "generic",
        }
    }
}

/// Detector and clustering parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArtifactConfig {
    pub threshold_uv: f64,
    pub refractory_s: f64,
    /// Crossings closer than this chain into one event.
    pub merge_s: f64,
    pub chew_window_s: f64,
    pub chew_min_crossings: usize,
    pub chew_min_channels: usize,
    /// Inter-onset gap that still counts as the same burst group.
    pub group_gap_s: f64,
}

impl Default for ArtifactConfig {
    fn default() -> Self {
        ArtifactConfig {
            threshold_uv: 75.0,
            refractory_s: 0.5,
            merge_s: 0.25,
            chew_window_s: 1.5,
            chew_min_crossings: 3,
            chew_min_channels: 4,
            group_gap_s: 2.0,
        }
    }
}

/// One threshold crossing on one channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub channel: usize,
    pub onset: u64,
    pub peak_uv: f64,
}

/// Upward |x| threshold crossings with a refractory span; the peak is taken
/// over the refractory span and the crossing is reported when it closes.
#[derive(Debug, Clone)]
pub struct ThresholdDetector {
    channel: usize,
    threshold: f64,
    refractory: u64,
    above: bool,
    open: Option<Crossing>,
}

impl ThresholdDetector {
    pub fn new(channel: usize, threshold_uv: f64, refractory_s: f64, fs: f64) -> Self {
        ThresholdDetector {
            channel,
            threshold: threshold_uv,
            refractory: ((refractory_s * fs).round() as u64).max(1),
            above: false,
            open: None,
        }
    }

    pub fn push(&mut self, index: u64, x: f64) -> Option<Crossing> {
        let mag = x.abs();
        let mut done = None;
        if let Some(c) = &mut self.open {
            if index >= c.onset + self.refractory {
                done = self.open.take();
            } else {
                c.peak_uv = c.peak_uv.max(mag);
            }
        }
        let above = mag > self.threshold;
        if above && !self.above && self.open.is_none() {
            self.open = Some(Crossing {
                channel: self.channel,
                onset: index,
                peak_uv: mag,
            });
        }
        self.above = above;
        done
    }

    /// Close any open refractory span (end of stream).
    pub fn flush(&mut self) -> Option<Crossing> {
        self.open.take()
    }
}

/// Single-channel detection over a filtered stream.
pub fn detect_artifacts(
    x: &[f64],
    start: u64,
    fs: f64,
    channel: usize,
    threshold_uv: f64,
    refractory_s: f64,
) -> Vec<ArtifactEvent> {
    let mut det = ThresholdDetector::new(channel, threshold_uv, refractory_s, fs);
    let mut crossings: Vec<Crossing> = Vec::new();
    for (i, &v) in x.iter().enumerate() {
        crossings.extend(det.push(start + i as u64, v));
    }
    crossings.extend(det.flush());
    let mut out: Vec<ArtifactEvent> = crossings
        .into_iter()
        .map(|c| ArtifactEvent {
            kind: ArtifactKind::Generic,
            channels: vec![c.channel],
            onset: c.onset,
            peak_uv: c.peak_uv,
        })
        .collect();
    out.sort_by_key(|e| e.onset);
    out
}

/// Montage indices of frontal sites (labels starting with `F` but not `FC`/`FT`/`Fp`).
pub fn frontal_channels(montage: &Montage) -> Vec<usize> {
    montage
        .labels()
        .iter()
        .enumerate()
        .filter(|(_, l)| {
            let u = l.to_ascii_uppercase();
            u.starts_with('F')
                && !u.starts_with("FC")
                && !u.starts_with("FT")
                && !u.starts_with("FP")
        })
        .map(|(i, _)| i)
        .collect()
}

fn next_cluster(
    cr: &[Crossing],
    fs: f64,
    frontal: &[usize],
    cfg: &ArtifactConfig,
    horizon: Option<u64>,
) -> Option<(ArtifactEvent, usize)> {
    let first = cr.first()?;
    let merge = (cfg.merge_s * fs).round() as u64;
    let chew_end = first.onset + (cfg.chew_window_s * fs).round() as u64;
    if horizon.is_some_and(|h| h < chew_end) {
        return None;
    }
    let in_window = cr.iter().take_while(|c| c.onset < chew_end).count();
    let mut channels: Vec<usize> = cr[..in_window].iter().map(|c| c.channel).collect();
    channels.sort_unstable();
    channels.dedup();
    let chew = in_window >= cfg.chew_min_crossings && channels.len() >= cfg.chew_min_channels;
    let mut n = if chew { in_window } else { 1 };
    while n < cr.len() && cr[n].onset <= cr[n - 1].onset + merge {
        n += 1;
    }
    if horizon.is_some_and(|h| h <= cr[n - 1].onset + merge) {
        return None;
    }
    let members = &cr[..n];
    let mut channels: Vec<usize> = members.iter().map(|c| c.channel).collect();
    channels.sort_unstable();
    channels.dedup();
    let kind = if chew {
        ArtifactKind::Chew
    } else if channels.iter().any(|c| frontal.contains(c)) {
        ArtifactKind::Blink
    } else {
        ArtifactKind::Generic
    };
    let peak_uv = members.iter().map(|c| c.peak_uv).fold(0.0, f64::max);
    Some((
        ArtifactEvent {
            kind,
            channels,
            onset: first.onset,
            peak_uv,
        },
        n,
    ))
}

/// Cluster multi-channel crossings into events.
///
/// A chew is at least `chew_min_crossings` crossings within `chew_window_s`
/// spanning at least `chew_min_channels` channels. Otherwise crossings that
/// chain within `merge_s` form one event: a blink when a frontal channel is
/// involved, generic if not.
pub fn classify_artifacts(
    crossings: &[Crossing],
    fs: f64,
    frontal: &[usize],
    cfg: &ArtifactConfig,
) -> Vec<ArtifactEvent> {
    let mut cr = crossings.to_vec();
    cr.sort_by_key(|c| (c.onset, c.channel));
    let mut out = Vec::new();
    let mut rest = &cr[..];
    while let Some((ev, n)) = next_cluster(rest, fs, frontal, cfg, None) {
        out.push(ev);
        rest = &rest[n..];
    }
    out
}

/// Counts of consecutive events whose inter-onset gap is at most `gap_s`.
pub fn group_bursts(events: &[ArtifactEvent], fs: f64, gap_s: f64) -> Vec<usize> {
    let gap = gap_s * fs;
    let mut groups: Vec<usize> = Vec::new();
    let mut last: Option<u64> = None;
    for e in events {
        match last {
            Some(prev) if (e.onset - prev) as f64 <= gap => *groups.last_mut().unwrap() += 1,
            _ => groups.push(1),
        }
        last = Some(e.onset);
    }
    groups
}

/// Streaming multi-channel detector over filtered chunks.
#[derive(Debug, Clone)]
pub struct ArtifactTracker {
    cfg: ArtifactConfig,
    fs: f64,
    frontal: Vec<usize>,
    detectors: Vec<ThresholdDetector>,
    pending: Vec<Crossing>,
}

impl ArtifactTracker {
    pub fn new(cfg: ArtifactConfig, fs: f64, montage: &Montage) -> Self {
        let detectors = (0..montage.labels().len())
            .map(|ch| ThresholdDetector::new(ch, cfg.threshold_uv, cfg.refractory_s, fs))
            .collect();
        ArtifactTracker {
            frontal: frontal_channels(montage),
            cfg,
            fs,
            detectors,
            pending: Vec::new(),
        }
    }

    pub fn config(&self) -> &ArtifactConfig {
        &self.cfg
    }

    /// Exclude (or re-include) a channel, e.g. while it carries an injected tone.
    pub fn set_channel_enabled(&mut self, ch: usize, enabled: bool) {
        if let Some(d) = self.detectors.get_mut(ch) {
            let threshold = if enabled {
                self.cfg.threshold_uv
            } else {
                f64::INFINITY
            };
            *d = ThresholdDetector::new(ch, threshold, self.cfg.refractory_s, self.fs);
        }
    }

    /// Feed a filtered chunk; returns events whose clusters are now closed.
    pub fn push(&mut self, chunk: &SignalChunk) -> Vec<ArtifactEvent> {
        for (ch, det) in self.detectors.iter_mut().enumerate() {
            if let Some(x) = chunk.data.get(ch) {
                for (i, &v) in x.iter().enumerate() {
                    if let Some(c) = det.push(chunk.start + i as u64, v) {
                        self.pending.push(c);
                    }
                }
            }
        }
        let refractory = (self.cfg.refractory_s * self.fs).round() as u64;
        self.drain(Some(chunk.end().saturating_sub(refractory)))
    }

    /// Close all open spans and clusters.
    pub fn finish(&mut self) -> Vec<ArtifactEvent> {
        for det in &mut self.detectors {
            self.pending.extend(det.flush());
        }
        self.drain(None)
    }

    fn drain(&mut self, horizon: Option<u64>) -> Vec<ArtifactEvent> {
        self.pending.sort_by_key(|c| (c.onset, c.channel));
        let mut out = Vec::new();
        let mut used = 0;
        while let Some((ev, n)) = next_cluster(
            &self.pending[used..],
            self.fs,
            &self.frontal,
            &self.cfg,
            horizon,
        ) {
            out.push(ev);
            used += n;
        }
        self.pending.drain(..used);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pulse_train(onsets: &[usize], n: usize, amp: f64) -> Vec<f64> {
        let mut x = vec![0.0; n];
        for &o in onsets {
            for k in 0..50 {
                x[o + k] = amp * (std::f64::consts::PI * k as f64 / 50.0).sin();
            }
        }
        x
    }

    #[test]
    fn zero_signal() {
        assert!(detect_artifacts(&[0.0; 1000], 0, 250.0, 1, 75.0, 0.5).is_empty());
    }

    #[test]
    fn refractory_suppresses_second_lobe() {
        let mut x = pulse_train(&[100], 1000, 150.0);
        for k in 0..40 {
            x[160 + k] = -100.0 * (std::f64::consts::PI * k as f64 / 40.0).sin();
        }
        let ev = detect_artifacts(&x, 0, 250.0, 1, 75.0, 0.5);
        assert_eq!(ev.len(), 1);
        assert!((ev[0].peak_uv - 150.0).abs() < 0.5);
    }

    #[test]
    fn groups() {
        let ev = |o: u64| ArtifactEvent {
            kind: ArtifactKind::Blink,
            channels: vec![1],
            onset: o,
            peak_uv: 100.0,
        };
        let onsets = [0, 250, 500, 750, 1700, 1950, 2200, 3100, 3350, 4300];
        let events: Vec<_> = onsets.iter().map(|&o| ev(o)).collect();
        assert_eq!(group_bursts(&events, 250.0, 2.0), vec![4, 3, 2, 1]);
        assert!(group_bursts(&[], 250.0, 2.0).is_empty());
        assert_eq!(group_bursts(&events[..3], 250.0, 100.0), vec![3]);
    }

    #[test]
    fn chew_versus_blink() {
        let cfg = ArtifactConfig::default();
        let frontal = [0, 1, 2];
        let mut cr = Vec::new();
        for ch in 0..8 {
            cr.push(Crossing {
                channel: ch,
                onset: 1000 + ch as u64,
                peak_uv: 200.0,
            });
            cr.push(Crossing {
                channel: ch,
                onset: 1125 + ch as u64,
                peak_uv: 220.0,
            });
        }
        for ch in 0..3 {
            cr.push(Crossing {
                channel: ch,
                onset: 2000 + ch as u64,
                peak_uv: 150.0,
            });
        }
        cr.push(Crossing {
            channel: 6,
            onset: 3000,
            peak_uv: 90.0,
        });
        let ev = classify_artifacts(&cr, 250.0, &frontal, &cfg);
        let kinds: Vec<_> = ev.iter().map(|e| e.kind).collect();
        assert_eq!(
            kinds,
            vec![
                ArtifactKind::Chew,
                ArtifactKind::Blink,
                ArtifactKind::Generic
            ]
        );
        assert_eq!(ev[0].channels.len(), 8);
        assert_eq!(ev[0].peak_uv, 220.0);
    }

    #[test]
    fn tracker_matches_batch() {
        let montage = Montage::default();
        let fs = 250.0;
        let n = 5000;
        let blink = pulse_train(&[500, 2500], n, 150.0);
        let mut data = vec![vec![0.0; n]; 8];
        for ch in data.iter_mut().take(3) {
            *ch = blink.clone();
        }
        let chunk = SignalChunk::from_channels(0, fs, data);
        let mut tracker = ArtifactTracker::new(ArtifactConfig::default(), fs, &montage);
        let mut live = Vec::new();
        for i in (0..n).step_by(25) {
            live.extend(tracker.push(&chunk.slice(i, i + 25)));
        }
        live.extend(tracker.finish());
        assert_eq!(live.len(), 2);
        assert!(live
            .iter()
            .all(|e| e.kind == ArtifactKind::Blink && e.channels == vec![0, 1, 2]));
        assert_eq!(live[0].onset, 509);
    }

    proptest! {
        #[test]
        fn scale_equivariance(
            x in prop::collection::vec(-300.0f64..300.0, 10..600),
            k in 0.01f64..100.0,
        ) {
            let a: Vec<u64> = detect_artifacts(&x, 0, 250.0, 0, 75.0, 0.5).iter().map(|e| e.onset).collect();
            let y: Vec<f64> = x.iter().map(|v| v * k).collect();
            let b: Vec<u64> = detect_artifacts(&y, 0, 250.0, 0, 75.0 * k, 0.5).iter().map(|e| e.onset).collect();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn refractory_guarantee(x in prop::collection::vec(-300.0f64..300.0, 10..1000)) {
            let ev = detect_artifacts(&x, 0, 250.0, 0, 75.0, 0.5);
            for w in ev.windows(2) {
                prop_assert!(w[1].onset - w[0].onset >= 125);
            }
        }
    }
}
