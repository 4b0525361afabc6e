//! Sample sources feeding the acquisition loop.

use std::time::{Duration, Instant};

use thiserror::Error;

use crate::emulator::{Scenario, Steering};
use crate::protocol::{addr, Calibration, Command, DeviceConfig, FrameDecoder, ProtocolError};
use crate::session::SessionMetadata;
use crate::signal::{Marker, SignalChunk};
use crate::CHANNELS;

#[derive(Debug, Error)]
pub enum SourceError {
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("device reported unexpected ID 0x{0:02x}")]
    UnexpectedId(u8),
    #[error("{0}")]
    Unsupported(String),
    #[error("{0}")]
    State(String),
    #[error("recording error: {0}")]
    Recording(String),
}

/// Byte-level link to an ADS1299 (emulated, or SPI on real hardware).
pub trait Transport: Send {
    /// Clock one encoded command out and return the bytes clocked back.
    fn command(&mut self, bytes: &[u8]) -> Result<Vec<u8>, ProtocolError>;
    /// Append up to `frames` frames of continuous-mode data to `out`.
    /// Returns the number of bytes appended; zero means the stream ended.
    fn read_data(&mut self, frames: usize, out: &mut Vec<u8>) -> Result<usize, ProtocolError>;
    fn steer(&mut self, _steering: &Steering) -> Result<(), ProtocolError> {
        Err(ProtocolError::Unsupported(
            "steering needs the emulator".into(),
        ))
    }
    fn scenario(&self) -> Option<&Scenario> {
        None
    }
}

/// Anything that yields calibrated sample chunks: a device or a recording.
pub trait SampleSource: Send {
    fn config(&self) -> &DeviceConfig;
    fn start(&mut self) -> Result<(), SourceError>;
    fn stop(&mut self) -> Result<(), SourceError>;
    /// Up to `max` samples; `Ok(None)` once the source is exhausted.
    fn read_chunk(&mut self, max: usize) -> Result<Option<SignalChunk>, SourceError>;
    fn reconfigure(&mut self, config: &DeviceConfig) -> Result<(), SourceError>;
    /// Index of the next sample this source will produce.
    fn position(&self) -> u64;
    fn steer(&mut self, _steering: &Steering) -> Result<(), SourceError> {
        Err(SourceError::Unsupported(
            "scenario steering needs the emulator".into(),
        ))
    }
    /// Markers carried by the source itself (recorded markers during replay).
    fn drain_markers(&mut self) -> Vec<Marker> {
        Vec::new()
    }
    fn is_replay(&self) -> bool {
        false
    }
    fn scenario(&self) -> Option<Scenario> {
        None
    }
    /// Metadata of the recording being replayed.
    fn recorded_metadata(&self) -> Option<SessionMetadata> {
        None
    }
}

/// Pacing of chunk delivery.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pacing {
    /// As fast as the pipeline can consume.
    Fast,
    /// Wall-clock paced; the value is a speed multiplier (1.0 = real time).
    Realtime(f64),
}

impl Pacing {
    /// `0` selects [`Pacing::Fast`].
    pub fn from_speed(speed: f64) -> Pacing {
        if speed > 0.0 {
            Pacing::Realtime(speed)
        } else {
            Pacing::Fast
        }
    }
}

/// Paces a sample clock against wall time.
#[derive(Debug, Clone)]
pub(crate) struct Clock {
    pacing: Pacing,
    origin: Instant,
    origin_sample: u64,
}

impl Clock {
    pub(crate) fn new(pacing: Pacing) -> Self {
        Clock {
            pacing,
            origin: Instant::now(),
            origin_sample: 0,
        }
    }

    pub(crate) fn restart(&mut self, sample: u64) {
        self.origin = Instant::now();
        self.origin_sample = sample;
    }

    /// Block until `sample` is due and return the instant it became available.
    pub(crate) fn wait_for(&self, sample: u64, fs: f64) -> Instant {
        match self.pacing {
            Pacing::Fast => Instant::now(),
            Pacing::Realtime(speed) => {
                let ahead = sample.saturating_sub(self.origin_sample) as f64 / (fs * speed);
                let due = self.origin + Duration::from_secs_f64(ahead);
                let now = Instant::now();
                if due > now {
                    std::thread::sleep(due - now);
                    due
                } else {
                    now
                }
            }
        }
    }
}

/// Drives a [`Transport`] through the ADS1299 start-up sequence and decodes
/// its continuous-mode stream into microvolts.
pub struct DeviceSource<T: Transport> {
    transport: T,
    config: DeviceConfig,
    decoder: FrameDecoder,
    calibration: Calibration,
    clock: Clock,
    next: u64,
    running: bool,
    buf: Vec<u8>,
}

impl<T: Transport> DeviceSource<T> {
    /// Reset the device, verify its ID and load `config`.
    pub fn open(
        mut transport: T,
        config: DeviceConfig,
        pacing: Pacing,
    ) -> Result<Self, SourceError> {
        config.validate()?;
        transport.command(&Command::Reset.encode()?)?;
        transport.command(&Command::Sdatac.encode()?)?;
        let id = transport.command(
            &Command::Rreg {
                addr: addr::ID,
                count: 1,
            }
            .encode()?,
        )?;
        match id.first() {
            Some(&id) if id & 0x1F == 0x1E => {}
            other => return Err(SourceError::UnexpectedId(other.copied().unwrap_or(0))),
        }
        let mut src = DeviceSource {
            transport,
            calibration: Calibration::new(config.gain as f64, config.vref),
            config,
            decoder: FrameDecoder::new(),
            clock: Clock::new(pacing),
            next: 0,
            running: false,
            buf: Vec::with_capacity(64 * crate::protocol::FRAME_LEN),
        };
        src.write_config()?;
        Ok(src)
    }

    fn write_config(&mut self) -> Result<(), SourceError> {
        let regs = self.config.to_registers()?;
        let data = regs.read_range(addr::CONFIG1, 23)?;
        let wreg = Command::Wreg {
            addr: addr::CONFIG1,
            data: data.clone(),
        };
        self.transport.command(&wreg.encode()?)?;
        let back = self.transport.command(
            &Command::Rreg {
                addr: addr::CONFIG1,
                count: 23,
            }
            .encode()?,
        )?;
        for (i, (want, got)) in data.iter().zip(&back).enumerate() {
            let spec = crate::protocol::RegisterMap::spec(addr::CONFIG1 + i as u8)?;
            if (want ^ got) & !spec.read_only != 0 {
                return Err(SourceError::State(format!(
                    "register {} reads back 0x{got:02x}, wrote 0x{want:02x}",
                    spec.name
                )));
            }
        }
        self.calibration = Calibration::new(self.config.gain as f64, self.config.vref);
        Ok(())
    }

    pub fn transport(&self) -> &T {
        &self.transport
    }

    pub fn transport_mut(&mut self) -> &mut T {
        &mut self.transport
    }

    /// Bytes discarded while hunting for frame sync.
    pub fn discarded_bytes(&self) -> u64 {
        self.decoder.discarded_bytes()
    }
}

impl<T: Transport> SampleSource for DeviceSource<T> {
    fn config(&self) -> &DeviceConfig {
        &self.config
    }

    fn start(&mut self) -> Result<(), SourceError> {
        if self.running {
            return Ok(());
        }
        self.transport.command(&Command::Start.encode()?)?;
        self.transport.command(&Command::Rdatac.encode()?)?;
        self.clock.restart(self.next);
        self.running = true;
        Ok(())
    }

    fn stop(&mut self) -> Result<(), SourceError> {
        if !self.running {
            return Ok(());
        }
        self.transport.command(&Command::Sdatac.encode()?)?;
        self.transport.command(&Command::Stop.encode()?)?;
        self.decoder = FrameDecoder::new();
        self.running = false;
        Ok(())
    }

    fn read_chunk(&mut self, max: usize) -> Result<Option<SignalChunk>, SourceError> {
        if !self.running {
            return Err(SourceError::State("source is not started".into()));
        }
        let fs = self.config.fs();
        let acquired = self.clock.wait_for(self.next + max as u64, fs);
        let mut chunk = SignalChunk::zeros(self.next, fs, CHANNELS, 0);
        for d in chunk.data.iter_mut() {
            d.reserve(max);
        }
        while chunk.len() < max {
            let want = max - chunk.len();
            self.buf.clear();
            if self.transport.read_data(want, &mut self.buf)? == 0 {
                break;
            }
            self.decoder.push(&self.buf);
            for frame in self.decoder.by_ref() {
                for (ch, &raw) in frame.raw.iter().enumerate() {
                    chunk.data[ch].push(self.calibration.to_microvolts(raw));
                }
                chunk.leadoff |= frame.leadoff_positive();
            }
        }
        if chunk.is_empty() {
            return Ok(None);
        }
        self.next += chunk.len() as u64;
        chunk.acquired_at = Some(acquired);
        Ok(Some(chunk))
    }

    fn reconfigure(&mut self, config: &DeviceConfig) -> Result<(), SourceError> {
        if self.running {
            return Err(SourceError::State(
                "stop the device before reconfiguring".into(),
            ));
        }
        let previous = std::mem::replace(&mut self.config, config.clone());
        if let Err(e) = self.write_config() {
            self.config = previous;
            return Err(e);
        }
        Ok(())
    }

    fn position(&self) -> u64 {
        self.next
    }

    fn steer(&mut self, steering: &Steering) -> Result<(), SourceError> {
        Ok(self.transport.steer(steering)?)
    }

    fn scenario(&self) -> Option<Scenario> {
        self.transport.scenario().cloned()
    }
}
