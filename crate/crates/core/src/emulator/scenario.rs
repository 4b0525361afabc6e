use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::CHANNELS;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed scenario: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseModel {
    pub pink_rms_uv: f64,
    pub white_rms_uv: f64,
    /// 0 disables mains interference.
    pub mains_hz: u32,
    pub mains_amplitude_uv: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            pink_rms_uv: 0.0,
            white_rms_uv: 0.0,
            mains_hz: 0,
            mains_amplitude_uv: 0.0,
        }
    }
}

/// An eyes-closed segment with an alpha rhythm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaInterval {
    pub start_s: f64,
    pub end_s: f64,
    pub amplitude_uv: f64,
    pub freq_hz: f64,
}

impl AlphaInterval {
    pub fn contains(&self, t: f64) -> bool {
        t >= self.start_s && t < self.end_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScriptedArtifact {
    Blink,
    Chew,
}

impl ScriptedArtifact {
    pub fn default_amplitude_uv(self) -> f64 {
        match self {
            ScriptedArtifact::Blink => 150.0,
            ScriptedArtifact::Chew => 300.0,
        }
    }

    pub fn default_duration_s(self) -> f64 {
        match self {
            ScriptedArtifact::Blink => 0.4,
            ScriptedArtifact::Chew => 1.0,
        }
    }

    /// Channels affected when a script does not list any: frontal sites for
    /// blinks, every site for chewing.
    pub fn default_channels(self) -> Vec<usize> {
        match self {
            ScriptedArtifact::Blink => vec![0, 1, 2],
            ScriptedArtifact::Chew => (0..CHANNELS).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactScript {
    pub kind: ScriptedArtifact,
    pub time_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude_uv: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
    /// Channel indices (0..8); empty means the kind's default set.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub channels: Vec<usize>,
}

impl ArtifactScript {
    pub fn new(kind: ScriptedArtifact, time_s: f64) -> Self {
        ArtifactScript {
            kind,
            time_s,
            amplitude_uv: None,
            duration_s: None,
            channels: Vec::new(),
        }
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude_uv
            .unwrap_or(self.kind.default_amplitude_uv())
    }

    pub fn duration(&self) -> f64 {
        self.duration_s.unwrap_or(self.kind.default_duration_s())
    }

    pub fn channel_set(&self) -> Vec<usize> {
        if self.channels.is_empty() {
            self.kind.default_channels()
        } else {
            self.channels.clone()
        }
    }
}

/// Everything the emulator renders, deterministic for a given seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Scenario {
    pub name: String,
    pub duration_s: f64,
    pub noise: NoiseModel,
    pub alpha_timeline: Vec<AlphaInterval>,
    pub artifacts: Vec<ArtifactScript>,
    pub impedance_ohms: [f64; CHANNELS],
    pub seed: u64,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            name: String::new(),
            duration_s: 10.0,
            noise: NoiseModel::default(),
            alpha_timeline: Vec::new(),
            artifacts: Vec::new(),
            impedance_ohms: [5e3; CHANNELS],
            seed: 0,
        }
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Invalid(m));
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return bad(format!(
                "duration_s must be positive, got {}",
                self.duration_s
            ));
        }
        let n = &self.noise;
        for (name, v) in [
            ("pink_rms_uv", n.pink_rms_uv),
            ("white_rms_uv", n.white_rms_uv),
            ("mains_amplitude_uv", n.mains_amplitude_uv),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("noise.{name} must be >= 0"));
            }
        }
        if ![0, 50, 60].contains(&n.mains_hz) {
            return bad(format!("mains_hz must be 0, 50 or 60, got {}", n.mains_hz));
        }
        for a in &self.alpha_timeline {
            if !(0.0 <= a.start_s && a.start_s < a.end_s && a.end_s <= self.duration_s) {
                return bad(format!(
                    "alpha interval [{}, {}) outside [0, {}]",
                    a.start_s, a.end_s, self.duration_s
                ));
            }
            if a.amplitude_uv.is_nan() || a.amplitude_uv < 0.0 {
                return bad("alpha amplitude must be >= 0".into());
            }
            if !(8.0..=12.0).contains(&a.freq_hz) {
                return bad(format!("alpha frequency {} Hz outside 8-12 Hz", a.freq_hz));
            }
        }
        for a in &self.artifacts {
            if !(0.0 <= a.time_s && a.time_s <= self.duration_s) {
                return bad(format!("artifact at {} s outside scenario", a.time_s));
            }
            if !(a.amplitude() >= 0.0 && a.duration() > 0.0) {
                return bad("artifact amplitude must be >= 0 and duration > 0".into());
            }
            if a.channels.iter().any(|&c| c >= CHANNELS) {
                return bad(format!("artifact channel out of range: {:?}", a.channels));
            }
        }
        if self
            .impedance_ohms
            .iter()
            .any(|z| !(z.is_finite() && *z >= 0.0))
        {
            return bad("impedance_ohms must be finite and >= 0".into());
        }
        Ok(())
    }
}

/// Live overrides applied to a running emulator.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Steering {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eyes_closed: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trigger: Option<ScriptedArtifact>,
}

pub const BUILTIN_SCENARIOS: [&str; 4] =
    ["alpha-test", "blink-4321", "chew-4321", "impedance-sweep"];

/// Scenario files shipped in `scenarios/`.
pub fn builtin_scenario(name: &str) -> Option<Scenario> {
    let name = name.strip_suffix(".json").unwrap_or(name);
    let text = match name {
        "alpha-test" => include_str!("../../../../scenarios/alpha-test.json"),
        "blink-4321" => include_str!("../../../../scenarios/blink-4321.json"),
        "chew-4321" => include_str!("../../../../scenarios/chew-4321.json"),
        "impedance-sweep" => include_str!("../../../../scenarios/impedance-sweep.json"),
        _ => return None,
    };
    Some(Scenario::from_json(text).expect("built-in scenario is valid"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_load() {
        for name in BUILTIN_SCENARIOS {
            let s = builtin_scenario(name).unwrap();
            assert_eq!(s.name, name);
        }
        assert!(builtin_scenario("nope").is_none());
    }

    #[test]
    fn blink_4321_has_ten_blinks() {
        let s = builtin_scenario("blink-4321").unwrap();
        assert_eq!(s.artifacts.len(), 10);
        assert!(s
            .artifacts
            .iter()
            .all(|a| a.kind == ScriptedArtifact::Blink));
    }

    #[test]
    fn validation_errors() {
        let mut s = Scenario::default();
        s.alpha_timeline.push(AlphaInterval {
            start_s: 0.0,
            end_s: 5.0,
            amplitude_uv: 50.0,
            freq_hz: 14.0,
        });
        assert!(s.validate().is_err());
        let mut s = Scenario::default();
        s.noise.mains_hz = 55;
        assert!(s.validate().is_err());
        let mut s = Scenario::default();
        s.artifacts
            .push(ArtifactScript::new(ScriptedArtifact::Blink, 20.0));
        assert!(s.validate().is_err());
        assert!(Scenario::from_json("{\"duration_s\": -1}").is_err());
    }
}
