//! Acquisition stack for an 8-channel ADS1299-class EEG front end.
//!
//! The crate is organised bottom-up:
//!
//! * [`protocol`]: command encoding, register map, frame codec and calibration
//! * [`emulator`]: a scriptable virtual device that speaks the same protocol
//! * [`source`]: sample sources (device transport or recording replay)
//! * [`dsp`]: causal Butterworth filters, band power, Morlet CWT, epoching
//! * [`detect`]: blink/chew artifact and alpha eyes-open/closed detectors
//! * [`impedance`]: electrode impedance from lead-off current injection
//! * [`session`]: `.neurec` recordings, CSV export and replay
//! * [`server`]: the acquisition loop, control API and subscriber fan-out

pub mod detect;
pub mod dsp;
pub mod emulator;
pub mod impedance;
pub mod montage;
pub mod protocol;
pub mod server;
pub mod session;
pub mod signal;
pub mod source;

pub use montage::Montage;
pub use protocol::{DeviceConfig, SampleFrame};
pub use signal::{Marker, MarkerKind, SignalChunk};

/// Number of analog channels on the front end.
pub const CHANNELS: usize = 8;
