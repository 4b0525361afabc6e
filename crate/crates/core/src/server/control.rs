//! Control-plane JSON messages.

use serde::{Deserialize, Serialize};

use crate::detect::AlphaStateWindow;
use crate::emulator::ScriptedArtifact;
use crate::impedance::ImpedanceReading;
use crate::protocol::DeviceConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Idle,
    Streaming,
    Impedance,
    Replay,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Idle => "idle",
            Mode::Streaming => "streaming",
            Mode::Impedance => "impedance",
            Mode::Replay => "replay",
        }
    }
}

/// Requests accepted on the control plane, tagged by `type`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ControlMessage {
    Configure {
        config: DeviceConfig,
    },
    Start,
    Stop,
    /// Montage labels, or `["all"]`; empty also means every channel.
    Impedance {
        #[serde(default)]
        channels: Vec<String>,
    },
    Mark {
        text: String,
    },
    ScenarioSet {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eyes_closed: Option<bool>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        trigger: Option<ScriptedArtifact>,
    },
    Status,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorKind {
    /// Illegal in the current mode.
    State,
    /// Not a valid control message.
    Parse,
    /// Rejected configuration or arguments.
    Config,
    /// Source or device failure.
    Device,
    /// The rig has shut down.
    Closed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlError {
    pub kind: ErrorKind,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlResponse {
    pub ok: bool,
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ControlError>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<Box<StatusReport>>,
}

impl ControlResponse {
    pub fn ok(mode: Mode) -> Self {
        ControlResponse {
            ok: true,
            mode,
            error: None,
            status: None,
        }
    }

    pub fn error(mode: Mode, kind: ErrorKind, message: impl Into<String>) -> Self {
        ControlResponse {
            ok: false,
            mode,
            error: Some(ControlError {
                kind,
                message: message.into(),
            }),
            status: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("response serializes")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SubscriberStats {
    pub id: u64,
    pub queued: usize,
    pub sent: u64,
    pub dropped: u64,
}

/// Enqueue latency, frame availability to subscriber queues, in milliseconds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LatencySummary {
    pub count: usize,
    pub p50_ms: f64,
    pub p99_ms: f64,
    pub max_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaStatus {
    pub channel: String,
    pub baseline_uv2: Option<f64>,
    pub latest: Option<AlphaStateWindow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusReport {
    pub mode: Mode,
    pub config: DeviceConfig,
    pub montage: Vec<String>,
    pub source: String,
    pub uptime_s: f64,
    /// Sample index of the next sample from the source.
    pub position: u64,
    pub samples_processed: u64,
    pub samples_recorded: u64,
    /// Throughput of the current or last run.
    pub samples_per_second: f64,
    pub recording: Option<String>,
    pub subscribers: Vec<SubscriberStats>,
    pub dropped_total: u64,
    pub impedance: Vec<ImpedanceReading>,
    pub alpha: Option<AlphaStatus>,
    pub latency: LatencySummary,
    pub events: u64,
    pub last_error: Option<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_wire_shapes() {
        let cases = [
            (r#"{"type":"start"}"#, ControlMessage::Start),
            (r#"{"type":"stop"}"#, ControlMessage::Stop),
            (r#"{"type":"status"}"#, ControlMessage::Status),
            (
                r#"{"type":"mark","text":"go"}"#,
                ControlMessage::Mark { text: "go".into() },
            ),
            (
                r#"{"type":"impedance","channels":["Fz","all"]}"#,
                ControlMessage::Impedance {
                    channels: vec!["Fz".into(), "all".into()],
                },
            ),
            (
                r#"{"type":"scenario_set","eyes_closed":true}"#,
                ControlMessage::ScenarioSet {
                    eyes_closed: Some(true),
                    trigger: None,
                },
            ),
            (
                r#"{"type":"scenario_set","trigger":"chew"}"#,
                ControlMessage::ScenarioSet {
                    eyes_closed: None,
                    trigger: Some(ScriptedArtifact::Chew),
                },
            ),
        ];
        for (text, want) in cases {
            assert_eq!(
                serde_json::from_str::<ControlMessage>(text).unwrap(),
                want,
                "{text}"
            );
        }
        let cfg: ControlMessage =
            serde_json::from_str(r#"{"type":"configure","config":{"sample_rate":500}}"#).unwrap();
        match cfg {
            ControlMessage::Configure { config } => {
                assert_eq!((config.sample_rate, config.gain), (500, 24))
            }
            other => panic!("{other:?}"),
        }
        assert!(serde_json::from_str::<ControlMessage>(r#"{"type":"launch"}"#).is_err());
    }

    #[test]
    fn error_response_shape() {
        let r = ControlResponse::error(Mode::Streaming, ErrorKind::State, "no");
        assert_eq!(
            r.to_json(),
            r#"{"ok":false,"mode":"streaming","error":{"kind":"state","message":"no"}}"#
        );
    }
}
