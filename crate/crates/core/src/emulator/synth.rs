use std::f64::consts::PI;

use super::noise::{pink_noise, white_noise};
use super::scenario::{ArtifactScript, Scenario, ScriptedArtifact};
use crate::CHANNELS;

/// Alpha weighting per montage slot: 1.0 on the posterior sites (T5, Pz, T6).
pub(crate) const ALPHA_WEIGHT: [f64; CHANNELS] = [0.3, 0.3, 0.3, 0.3, 0.3, 1.0, 1.0, 1.0];
/// Chewing is strongest on temporal and anterior-temporal sites.
pub(crate) const CHEW_WEIGHT: [f64; CHANNELS] = [1.0, 0.6, 1.0, 0.6, 0.6, 1.0, 0.6, 1.0];

const LIVE_ALPHA_UV: f64 = 50.0;
const LIVE_ALPHA_HZ: f64 = 10.0;
const MAX_NOISE_PERIOD: usize = 1 << 16;

/// Biphasic blink: a positive half-sine over the first 62.5 % of the span,
/// then a negative lobe of 35 % amplitude.
pub(crate) fn blink_template(dt: f64, duration: f64, amplitude: f64) -> f64 {
    if !(0.0..duration).contains(&dt) {
        return 0.0;
    }
    let u = dt / duration;
    const SPLIT: f64 = 0.625;
    if u < SPLIT {
        amplitude * (PI * u / SPLIT).sin()
    } else {
        -0.35 * amplitude * (PI * (u - SPLIT) / (1.0 - SPLIT)).sin()
    }
}

/// 4 Hz train of Hann-windowed 20 Hz bursts, each 120 ms long.
pub(crate) fn chew_template(dt: f64, duration: f64, amplitude: f64) -> f64 {
    if !(0.0..duration).contains(&dt) {
        return 0.0;
    }
    const PERIOD: f64 = 0.25;
    const BURST: f64 = 0.12;
    const CARRIER_HZ: f64 = 20.0;
    let local = dt % PERIOD;
    if local >= BURST {
        return 0.0;
    }
    let window = 0.5 - 0.5 * (2.0 * PI * local / BURST).cos();
    amplitude * window * (2.0 * PI * CARRIER_HZ * local).sin()
}

fn mix_seed(seed: u64, salt: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ salt.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Renders a [`Scenario`] sample by sample.
///
/// Background noise is precomputed per channel and repeats after
/// `min(duration, 2^16 samples)`, so a live emulator can run indefinitely.
#[derive(Debug, Clone)]
pub struct Synthesizer {
    scenario: Scenario,
    fs: f64,
    background: Vec<Vec<f64>>,
    eyes_closed: Option<bool>,
    live_artifacts: Vec<ArtifactScript>,
}

impl Synthesizer {
    pub fn new(scenario: &Scenario, fs: f64) -> Self {
        let period =
            ((scenario.duration_s * fs).round() as usize).clamp(fs as usize, MAX_NOISE_PERIOD);
        let noise = &scenario.noise;
        let background = (0..CHANNELS as u64)
            .map(|ch| {
                if noise.pink_rms_uv == 0.0 && noise.white_rms_uv == 0.0 {
                    return Vec::new();
                }
                let pink = pink_noise(
                    mix_seed(scenario.seed, 2 * ch),
                    period,
                    fs,
                    noise.pink_rms_uv,
                );
                let white = white_noise(
                    mix_seed(scenario.seed, 2 * ch + 1),
                    period,
                    noise.white_rms_uv,
                );
                pink.iter().zip(&white).map(|(p, w)| p + w).collect()
            })
            .collect();
        Synthesizer {
            scenario: scenario.clone(),
            fs,
            background,
            eyes_closed: None,
            live_artifacts: Vec::new(),
        }
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    /// `Some(true)` forces a 50 uV 10 Hz alpha rhythm, `Some(false)` suppresses
    /// scripted alpha, `None` follows the timeline.
    pub fn set_eyes_closed(&mut self, closed: Option<bool>) {
        self.eyes_closed = closed;
    }

    /// Fire an artifact starting at `sample`.
    pub fn trigger(&mut self, kind: ScriptedArtifact, sample: u64) {
        self.live_artifacts
            .push(ArtifactScript::new(kind, sample as f64 / self.fs));
        let horizon = sample as f64 / self.fs - 5.0;
        self.live_artifacts
            .retain(|a| a.time_s + a.duration() > horizon);
    }

    pub fn microvolts(&self, ch: usize, sample: u64) -> f64 {
        let t = sample as f64 / self.fs;
        let mut v = match self.background.get(ch) {
            Some(bg) if !bg.is_empty() => bg[(sample % bg.len() as u64) as usize],
            _ => 0.0,
        };
        let noise = &self.scenario.noise;
        if noise.mains_hz > 0 && noise.mains_amplitude_uv > 0.0 {
            v += noise.mains_amplitude_uv * (2.0 * PI * noise.mains_hz as f64 * t).sin();
        }
        match self.eyes_closed {
            Some(true) => {
                v += ALPHA_WEIGHT[ch] * LIVE_ALPHA_UV * (2.0 * PI * LIVE_ALPHA_HZ * t).sin()
            }
            Some(false) => {}
            None => {
                for a in &self.scenario.alpha_timeline {
                    if a.contains(t) {
                        v += ALPHA_WEIGHT[ch] * a.amplitude_uv * (2.0 * PI * a.freq_hz * t).sin();
                    }
                }
            }
        }
        for a in self.scenario.artifacts.iter().chain(&self.live_artifacts) {
            let dt = t - a.time_s;
            if dt < 0.0 || dt >= a.duration() {
                continue;
            }
            let chans = a.channel_set();
            if !chans.contains(&ch) {
                continue;
            }
            v += match a.kind {
                ScriptedArtifact::Blink => blink_template(dt, a.duration(), a.amplitude()),
                ScriptedArtifact::Chew => {
                    CHEW_WEIGHT[ch] * chew_template(dt, a.duration(), a.amplitude())
                }
            };
        }
        v
    }
}

/// One-off evaluation; builds a [`Synthesizer`] each call, so prefer reusing one.
pub fn synthesize_microvolts(scenario: &Scenario, ch: usize, sample: u64, fs: f64) -> f64 {
    Synthesizer::new(scenario, fs).microvolts(ch, sample)
}
