//! Live acquisition service: worker loop, control protocol, subscriber
//! fan-out and the WebSocket transport.

pub mod control;
pub mod hub;
pub mod net;
pub mod pipeline;
pub mod rig;
pub mod wire;

pub use control::{
    AlphaStatus, ControlError, ControlMessage, ControlResponse, ErrorKind, LatencySummary, Mode,
    StatusReport, SubscriberStats,
};
pub use hub::{Frame, Hub, Subscription};
pub use net::{default_port, serve, Server, DEFAULT_PORT, PORT_ENV};
pub use pipeline::{Pipeline, PipelineOptions, PipelineOutput};
pub use rig::{Rig, RigOptions};
pub use wire::{
    MessageKind, Payload, WireError, WireMessage, HEADER_LEN, WIRE_MAGIC, WIRE_VERSION,
};
