//! Scriptable virtual front end.
//!
//! [`EmulatedDevice`] implements the command/frame protocol of
//! [`crate::protocol`] on top of a [`Synthesizer`] that renders a
//! [`Scenario`]: background noise, eyes-closed alpha segments, blink and chew
//! artifacts, and per-electrode impedance for lead-off injection.

mod device;
mod noise;
mod scenario;
mod synth;

pub use device::{trace_to_text, EmulatedDevice, TraceEntry, LEADOFF_DETECT_OHMS};
pub use noise::{pink_noise, white_noise};
pub use scenario::{
    builtin_scenario, AlphaInterval, ArtifactScript, NoiseModel, Scenario, ScenarioError,
    ScriptedArtifact, Steering, BUILTIN_SCENARIOS,
};
pub use synth::{synthesize_microvolts, Synthesizer};
