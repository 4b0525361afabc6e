//! Binary data-plane messages, little-endian.
//!
//! ```text
//! "NR" | u8 version=1 | u8 kind | u32 seq | u64 first_sample | u16 n_samples | u8 n_channels
//! kind 1: n_samples x n_channels f32 uV, sample-major
//! kind 2-4: u32 len | len bytes JSON (n_samples = n_channels = 0)
//! ```

use thiserror::Error;

use crate::signal::SignalChunk;

pub const WIRE_MAGIC: [u8; 2] = *b"NR";
pub const WIRE_VERSION: u8 = 1;
pub const HEADER_LEN: usize = 19;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum MessageKind {
    Samples = 1,
    Event = 2,
    Impedance = 3,
    Status = 4,
}

impl MessageKind {
    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            1 => Some(MessageKind::Samples),
            2 => Some(MessageKind::Event),
            3 => Some(MessageKind::Impedance),
            4 => Some(MessageKind::Status),
            _ => None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WireError {
    #[error("message shorter than its header")]
    Short,
    #[error("bad magic")]
    Magic,
    #[error("unsupported wire version {0}")]
    Version(u8),
    #[error("unknown message kind {0}")]
    Kind(u8),
    #[error("payload length {got} does not match header ({expected})")]
    Length { expected: usize, got: usize },
    #[error("payload is not UTF-8 JSON")]
    Utf8,
    #[error("chunk of {0} samples exceeds one message")]
    TooLarge(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    /// Sample-major f32 values.
    Samples(Vec<f32>),
    Json(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct WireMessage {
    pub kind: MessageKind,
    pub seq: u32,
    pub first_sample: u64,
    pub n_samples: u16,
    pub n_channels: u8,
    pub payload: Payload,
}

impl WireMessage {
    pub fn samples(seq: u32, chunk: &SignalChunk) -> Result<Self, WireError> {
        let n = chunk.len();
        if n > u16::MAX as usize {
            return Err(WireError::TooLarge(n));
        }
        let mut values = Vec::with_capacity(n * chunk.n_channels());
        for i in 0..n {
            for ch in &chunk.data {
                values.push(ch[i] as f32);
            }
        }
        Ok(WireMessage {
            kind: MessageKind::Samples,
            seq,
            first_sample: chunk.start,
            n_samples: n as u16,
            n_channels: chunk.n_channels() as u8,
            payload: Payload::Samples(values),
        })
    }

    pub fn json(kind: MessageKind, seq: u32, first_sample: u64, json: impl Into<String>) -> Self {
        WireMessage {
            kind,
            seq,
            first_sample,
            n_samples: 0,
            n_channels: 0,
            payload: Payload::Json(json.into()),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let body = match &self.payload {
            Payload::Samples(v) => v.len() * 4,
            Payload::Json(s) => 4 + s.len(),
        };
        let mut out = Vec::with_capacity(HEADER_LEN + body);
        out.extend_from_slice(&WIRE_MAGIC);
        out.push(WIRE_VERSION);
        out.push(self.kind as u8);
        out.extend_from_slice(&self.seq.to_le_bytes());
        out.extend_from_slice(&self.first_sample.to_le_bytes());
        out.extend_from_slice(&self.n_samples.to_le_bytes());
        out.push(self.n_channels);
        match &self.payload {
            Payload::Samples(v) => {
                for x in v {
                    out.extend_from_slice(&x.to_le_bytes());
                }
            }
            Payload::Json(s) => {
                out.extend_from_slice(&(s.len() as u32).to_le_bytes());
                out.extend_from_slice(s.as_bytes());
            }
        }
        out
    }

    pub fn decode(b: &[u8]) -> Result<Self, WireError> {
        if b.len() < HEADER_LEN {
            return Err(WireError::Short);
        }
        if b[..2] != WIRE_MAGIC {
            return Err(WireError::Magic);
        }
        if b[2] != WIRE_VERSION {
            return Err(WireError::Version(b[2]));
        }
        let kind = MessageKind::from_u8(b[3]).ok_or(WireError::Kind(b[3]))?;
        let seq = u32::from_le_bytes(b[4..8].try_into().unwrap());
        let first_sample = u64::from_le_bytes(b[8..16].try_into().unwrap());
        let n_samples = u16::from_le_bytes([b[16], b[17]]);
        let n_channels = b[18];
        let body = &b[HEADER_LEN..];
        let payload = if kind == MessageKind::Samples {
            let expected = n_samples as usize * n_channels as usize * 4;
            if body.len() != expected {
                return Err(WireError::Length {
                    expected,
                    got: body.len(),
                });
            }
            Payload::Samples(
                body.chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            )
        } else {
            if body.len() < 4 {
                return Err(WireError::Short);
            }
            let len = u32::from_le_bytes(body[..4].try_into().unwrap()) as usize;
            if body.len() - 4 != len {
                return Err(WireError::Length {
                    expected: len,
                    got: body.len() - 4,
                });
            }
            Payload::Json(String::from_utf8(body[4..].to_vec()).map_err(|_| WireError::Utf8)?)
        };
        Ok(WireMessage {
            kind,
            seq,
            first_sample,
            n_samples,
            n_channels,
            payload,
        })
    }

    /// Channel-major samples, for kind 1.
    pub fn to_chunk(&self, fs: f64) -> Option<SignalChunk> {
        let Payload::Samples(v) = &self.payload else {
            return None;
        };
        let nch = self.n_channels as usize;
        let data = (0..nch)
            .map(|ch| {
                v.iter()
                    .skip(ch)
                    .step_by(nch.max(1))
                    .map(|&x| x as f64)
                    .collect()
            })
            .collect();
        Some(SignalChunk::from_channels(self.first_sample, fs, data))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_damage() {
        let m = WireMessage::json(MessageKind::Status, 1, 2, "{}").encode();
        assert_eq!(WireMessage::decode(&m[..10]), Err(WireError::Short));
        let mut bad = m.clone();
        bad[0] = b'X';
        assert_eq!(WireMessage::decode(&bad), Err(WireError::Magic));
        let mut bad = m.clone();
        bad[3] = 9;
        assert_eq!(WireMessage::decode(&bad), Err(WireError::Kind(9)));
        assert!(matches!(
            WireMessage::decode(&m[..m.len() - 1]),
            Err(WireError::Length { .. })
        ));
    }

    proptest! {
        #[test]
        fn samples_round_trip(
            start in 0u64..1 << 40,
            seq in any::<u32>(),
            n in 0usize..60,
            seed in prop::collection::vec(-1e5f32..1e5, 8),
        ) {
            let data = (0..8).map(|ch| (0..n).map(|i| (seed[ch] + i as f32) as f64).collect()).collect();
            let chunk = SignalChunk::from_channels(start, 250.0, data);
            let m = WireMessage::samples(seq, &chunk).unwrap();
            let back = WireMessage::decode(&m.encode()).unwrap();
            prop_assert_eq!(&back, &m);
            prop_assert_eq!(back.to_chunk(250.0).unwrap().data, chunk.data);
        }
    }
}
