//! Session persistence: `.neurec` recordings, CSV export and replay.
//!
//! `.neurec` layout, all integers little-endian:
//!
//! ```text
//! header  "NREC" | u16 version | u32 len | len bytes metadata JSON | u32 crc32(header so far)
//! samples u64 first_index | u32 n | n x 8 x f32 uV (sample-major) | u32 crc32(block so far)
//! marker  u64 sample | u32 0xFFFFFFFF | u32 len | len bytes marker JSON | u32 crc32(block so far)
//! ```
//!
//! Sample blocks hold one second of data and are flushed as they are written.
//! A marker is written, in sample order, ahead of the first sample block that
//! starts at least [`MARKER_HOLDBACK_S`] seconds after it (or at close). Any
//! marker that arrives within that holdback lands in the same place however
//! late it was produced, so a recording's bytes depend only on its samples
//! and markers.

mod export;
mod format;
mod replay;

pub use export::{export_csv, write_csv};
pub use format::{
    latest_session, open_session, read_session, Block, ReadMode, Recording, SessionReader,
    SessionSummary, SessionWriter, MAGIC, MARKER_HOLDBACK_S, MARKER_SENTINEL, VERSION,
};
pub use replay::ReplaySource;

use std::path::PathBuf;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::emulator::Scenario;
use crate::montage::Montage;
use crate::protocol::DeviceConfig;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("write to {path} failed: {source}; blocks flushed before the failure remain readable in lossy mode")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("not a .neurec file (bad magic)")]
    BadMagic,
    #[error("unsupported .neurec version {0}")]
    Version(u16),
    #[error("header checksum mismatch")]
    HeaderChecksum,
    #[error("metadata: {0}")]
    Metadata(#[from] serde_json::Error),
    #[error("block at byte {offset}: checksum mismatch")]
    BlockChecksum { offset: u64 },
    #[error("block at byte {offset}: truncated")]
    Truncated { offset: u64 },
    #[error("sample index jumps from {expected} to {got}")]
    Gap { expected: u64, got: u64 },
    #[error("expected {expected} channels, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("no .neurec recording found in {0}")]
    NotFound(PathBuf),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Self-describing header of a recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMetadata {
    pub session_id: String,
    pub started_at: DateTime<Utc>,
    pub config: DeviceConfig,
    pub montage: Montage,
    pub electrode_type: String,
    #[serde(default)]
    pub operator_note: String,
    /// `emulator`, `device` or `replay:<file>`.
    #[serde(default)]
    pub source: String,
    /// The emulator script, when the source was the emulator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
}

impl SessionMetadata {
    pub fn new(config: DeviceConfig) -> Self {
        SessionMetadata {
            session_id: uuid::Uuid::new_v4().to_string(),
            started_at: Utc::now(),
            config,
            montage: Montage::default(),
            electrode_type: "dry Ag/AgCl".into(),
            operator_note: String::new(),
            source: String::new(),
            scenario: None,
        }
    }

    pub fn fs(&self) -> f64 {
        self.config.fs()
    }
}
