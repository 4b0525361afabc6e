//! Byte-level contract of the ADS1299 front end.
//!
//! Everything here is a pure function over value types. Wire frames are
//! big-endian as clocked out of the part; host-side formats elsewhere in the
//! crate are little-endian.

mod calibrate;
mod command;
mod config;
mod frame;
mod registers;

pub use calibrate::{
    full_scale_microvolts, microvolts_to_raw, raw_to_microvolts, Calibration, MAX_CODE, MIN_CODE,
};
pub use command::{encode_command, Command};
pub use config::{
    ChannelConfig, DeviceConfig, InputMux, LeadOffConfig, LeadOffCurrent, LeadOffFrequency,
    ReferenceScheme, SUPPORTED_GAINS, SUPPORTED_SAMPLE_RATES,
};
pub use frame::{decode_frame, encode_frame, FrameDecoder, SampleFrame, FRAME_LEN, SYNC_NIBBLE};
pub use registers::{addr, RegisterMap, RegisterSpec, REGISTER_COUNT, REGISTER_TABLE};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("register range 0x{addr:02x}+{count} exceeds the register map")]
    Range { addr: u8, count: usize },
    #[error("register access with zero count")]
    Count,
    #[error("frame must be {FRAME_LEN} bytes, got {0}")]
    Framing(usize),
    #[error("lost frame sync (status word 0x{0:06x})")]
    Desync(u32),
    #[error("raw sample {0} outside the signed 24-bit range")]
    RawRange(i64),
    #[error("unknown opcode 0x{0:02x}")]
    UnknownOpcode(u8),
    #[error("truncated command")]
    Truncated,
    #[error("invalid device configuration: {0}")]
    InvalidConfig(String),
    #[error("command not allowed in current device state: {0}")]
    State(String),
    #[error("operation not supported by this transport: {0}")]
    Unsupported(String),
}
