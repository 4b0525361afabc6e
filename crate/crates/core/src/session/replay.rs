use std::path::Path;

use super::{read_session, ReadMode, Recording, SessionError, SessionMetadata};
use crate::emulator::Scenario;
use crate::protocol::DeviceConfig;
use crate::signal::{Marker, SignalChunk};
use crate::source::{Clock, Pacing, SampleSource, SourceError};

/// Re-emits a recording through the [`SampleSource`] interface.
pub struct ReplaySource {
    rec: Recording,
    clock: Clock,
    pos: usize,
    markers_sent: usize,
    running: bool,
    damage_reported: bool,
}

impl ReplaySource {
    /// `speed` is a wall-clock multiplier; 0 replays as fast as possible.
    pub fn open(path: impl AsRef<Path>, speed: f64) -> Result<Self, SessionError> {
        Ok(Self::from_recording(
            read_session(path, ReadMode::Lossy)?,
            speed,
        ))
    }

    pub fn from_recording(rec: Recording, speed: f64) -> Self {
        ReplaySource {
            rec,
            clock: Clock::new(Pacing::from_speed(speed)),
            pos: 0,
            markers_sent: 0,
            running: false,
            damage_reported: false,
        }
    }

    pub fn metadata(&self) -> &SessionMetadata {
        &self.rec.metadata
    }

    pub fn remaining(&self) -> usize {
        self.rec.len() - self.pos
    }
}

impl SampleSource for ReplaySource {
    fn config(&self) -> &DeviceConfig {
        &self.rec.metadata.config
    }

    fn start(&mut self) -> Result<(), SourceError> {
        if !self.running {
            self.clock.restart(self.position());
            self.running = true;
        }
        Ok(())
    }

    fn stop(&mut self) -> Result<(), SourceError> {
        self.running = false;
        Ok(())
    }

    fn read_chunk(&mut self, max: usize) -> Result<Option<SignalChunk>, SourceError> {
        if !self.running {
            return Err(SourceError::State("replay is not started".into()));
        }
        let n = max.min(self.remaining());
        if n == 0 {
            return match &self.rec.damage {
                Some(d) if !self.damage_reported => {
                    self.damage_reported = true;
                    Err(SourceError::Recording(format!(
                        "replay halted at last valid block: {d}"
                    )))
                }
                _ => Ok(None),
            };
        }
        let acquired = self
            .clock
            .wait_for(self.position() + n as u64, self.rec.samples.fs);
        let mut chunk = self.rec.samples.slice(self.pos, self.pos + n);
        chunk.acquired_at = Some(acquired);
        self.pos += n;
        Ok(Some(chunk))
    }

    fn reconfigure(&mut self, config: &DeviceConfig) -> Result<(), SourceError> {
        if config == self.config() {
            return Ok(());
        }
        Err(SourceError::Unsupported(
            "a replayed recording cannot be reconfigured".into(),
        ))
    }

    fn position(&self) -> u64 {
        self.rec.samples.start + self.pos as u64
    }

    fn drain_markers(&mut self) -> Vec<Marker> {
        let end = self.position();
        let due = self.rec.markers[self.markers_sent..].partition_point(|m| m.sample < end);
        let out = self.rec.markers[self.markers_sent..self.markers_sent + due].to_vec();
        self.markers_sent += due;
        out
    }

    fn is_replay(&self) -> bool {
        true
    }

    fn scenario(&self) -> Option<Scenario> {
        self.rec.metadata.scenario.clone()
    }

    fn recorded_metadata(&self) -> Option<SessionMetadata> {
        Some(self.rec.metadata.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::session::open_session;
    use crate::signal::MarkerKind;
    use std::time::Instant;

    fn recorded(dir: &Path, n: usize) -> std::path::PathBuf {
        let mut w = open_session(dir, &SessionMetadata::new(DeviceConfig::default())).unwrap();
        let data = (0..8)
            .map(|ch| (0..n).map(|i| (i * ch) as f64).collect())
            .collect();
        w.append(&SignalChunk::from_channels(0, 250.0, data))
            .unwrap();
        w.add_marker(Marker::new(60, MarkerKind::User, "m"));
        w.close().unwrap().path
    }

    #[test]
    fn emits_everything_once() {
        let dir = tempfile::tempdir().unwrap();
        let mut src = ReplaySource::open(recorded(dir.path(), 130), 0.0).unwrap();
        src.start().unwrap();
        let mut total = 0;
        let mut markers = Vec::new();
        while let Some(c) = src.read_chunk(25).unwrap() {
            assert_eq!(c.start, total as u64);
            total += c.len();
            markers.extend(src.drain_markers());
        }
        assert_eq!(total, 130);
        assert_eq!(markers.len(), 1);
    }

    #[test]
    fn truncated_replay_reports_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = recorded(dir.path(), 600);
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 1000]).unwrap();
        let mut src = ReplaySource::open(&path, 0.0).unwrap();
        src.start().unwrap();
        let mut total = 0;
        let err = loop {
            match src.read_chunk(100) {
                Ok(Some(c)) => total += c.len(),
                Ok(None) => panic!("expected an error"),
                Err(e) => break e,
            }
        };
        assert_eq!(total, 500);
        assert!(err.to_string().contains("halted"));
        assert!(src.read_chunk(100).unwrap().is_none());
    }

    #[test]
    fn speed_multiplier() {
        let dir = tempfile::tempdir().unwrap();
        let mut src = ReplaySource::open(recorded(dir.path(), 250), 2.0).unwrap();
        src.start().unwrap();
        let t = Instant::now();
        while src.read_chunk(25).unwrap().is_some() {}
        let s = t.elapsed().as_secs_f64();
        assert!((s - 0.5).abs() < 0.05, "{s}");
    }
}
