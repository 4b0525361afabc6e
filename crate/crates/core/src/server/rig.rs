//! The acquisition loop: one worker thread owns the source, pipeline and
//! recorder; control requests reach it through a command queue.

use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use crossbeam::channel::{bounded, unbounded, Receiver, Sender, TryRecvError};
use serde_json::json;

use super::control::{
    ControlMessage, ControlResponse, ErrorKind, LatencySummary, Mode, StatusReport,
};
use super::hub::{Hub, Subscription};
use super::pipeline::{Pipeline, PipelineOptions};
use super::wire::{MessageKind, WireMessage};
use crate::detect::ArtifactEvent;
use crate::emulator::Steering;
use crate::impedance::{measure_impedance, ImpedanceReading, QualityTiers};
use crate::montage::Montage;
use crate::protocol::DeviceConfig;
use crate::session::{open_session, SessionMetadata, SessionWriter};
use crate::signal::{Marker, MarkerKind, SignalChunk};
use crate::source::SampleSource;

#[derive(Debug, Clone)]
pub struct RigOptions {
    /// Samples per pipeline step.
    pub chunk_samples: usize,
    /// Where each run's `.neurec` goes; `None` disables recording.
    pub out_dir: Option<PathBuf>,
    /// End a run after this many samples.
    pub stop_after_samples: Option<u64>,
    pub subscriber_capacity: usize,
    pub impedance_window_s: f64,
    pub tiers: QualityTiers,
    pub pipeline: PipelineOptions,
    pub montage: Montage,
    /// Status broadcast interval in seconds of signal.
    pub status_interval_s: f64,
    pub operator_note: String,
    pub source_label: Option<String>,
}

impl Default for RigOptions {
    fn default() -> Self {
        RigOptions {
            chunk_samples: 25,
            out_dir: None,
            stop_after_samples: None,
            subscriber_capacity: 256,
            impedance_window_s: 4.0,
            tiers: QualityTiers::default(),
            pipeline: PipelineOptions::default(),
            montage: Montage::default(),
            status_interval_s: 1.0,
            operator_note: String::new(),
            source_label: None,
        }
    }
}

enum Request {
    Control(ControlMessage, Sender<ControlResponse>),
    Shutdown,
}

const LATENCY_WINDOW: usize = 1 << 16;

struct Impedance {
    channels: Vec<usize>,
    restore: DeviceConfig,
    capture: Vec<SignalChunk>,
    needed: usize,
    captured: usize,
}

struct Worker {
    source: Box<dyn SampleSource>,
    opts: RigOptions,
    hub: Arc<Hub>,
    mode: Mode,
    spawned: Instant,
    source_label: String,
    seq: u32,
    recorder: Option<SessionWriter>,
    recording: Option<PathBuf>,
    pipeline: Option<Pipeline>,
    processed: u64,
    recorded: u64,
    run_samples: u64,
    run_started: Option<Instant>,
    rate: f64,
    latency: Vec<f64>,
    latency_at: usize,
    impedance: Option<Impedance>,
    readings: Vec<ImpedanceReading>,
    events: u64,
    last_error: Option<String>,
    next_status: u64,
}

impl Worker {
    fn run(mut self, rx: Receiver<Request>) {
        loop {
            let req = if self.mode == Mode::Idle {
                match rx.recv() {
                    Ok(r) => Some(r),
                    Err(_) => break,
                }
            } else {
                match rx.try_recv() {
                    Ok(r) => Some(r),
                    Err(TryRecvError::Empty) => None,
                    Err(TryRecvError::Disconnected) => break,
                }
            };
            match req {
                Some(Request::Shutdown) => break,
                Some(Request::Control(msg, reply)) => {
                    let r = self.handle(msg);
                    let _ = reply.send(r);
                }
                None => self.step(),
            }
        }
        self.halt(None);
    }

    fn publish(&mut self, kind: MessageKind, first_sample: u64, payload: serde_json::Value) {
        let m = WireMessage::json(kind, self.seq, first_sample, payload.to_string());
        self.seq = self.seq.wrapping_add(1);
        self.hub.publish(Arc::new(m.encode()));
    }

    fn err(&self, kind: ErrorKind, msg: impl Into<String>) -> ControlResponse {
        ControlResponse::error(self.mode, kind, msg)
    }

    fn handle(&mut self, msg: ControlMessage) -> ControlResponse {
        let idle_only = |w: &Self, what: &str| {
            (w.mode != Mode::Idle).then(|| {
                w.err(
                    ErrorKind::State,
                    format!(
                        "{what} is only allowed while idle (mode is {})",
                        w.mode.as_str()
                    ),
                )
            })
        };
        match msg {
            ControlMessage::Status => {
                let mut r = ControlResponse::ok(self.mode);
                r.status = Some(Box::new(self.status()));
                r
            }
            ControlMessage::Configure { config } => {
                if let Some(e) = idle_only(self, "configure") {
                    return e;
                }
                if let Err(e) = config.validate() {
                    return self.err(ErrorKind::Config, e.to_string());
                }
                match self.source.reconfigure(&config) {
                    Ok(()) => ControlResponse::ok(self.mode),
                    Err(e) => self.err(ErrorKind::Device, e.to_string()),
                }
            }
            ControlMessage::Start => {
                if let Some(e) = idle_only(self, "start") {
                    return e;
                }
                match self.begin_run() {
                    Ok(()) => ControlResponse::ok(self.mode),
                    Err(e) => {
                        self.last_error = Some(e.clone());
                        self.err(ErrorKind::Device, e)
                    }
                }
            }
            ControlMessage::Stop => {
                if self.mode == Mode::Idle {
                    return self.err(ErrorKind::State, "nothing to stop");
                }
                self.halt(None);
                ControlResponse::ok(self.mode)
            }
            ControlMessage::Impedance { channels } => {
                if let Some(e) = idle_only(self, "impedance") {
                    return e;
                }
                match self.begin_impedance(&channels) {
                    Ok(()) => ControlResponse::ok(self.mode),
                    Err((kind, e)) => self.err(kind, e),
                }
            }
            ControlMessage::Mark { text } => {
                if !matches!(self.mode, Mode::Streaming | Mode::Replay) {
                    return self.err(ErrorKind::State, "markers need a running stream");
                }
                let m = Marker::new(self.source.position(), MarkerKind::User, text);
                self.record_marker(&m);
                ControlResponse::ok(self.mode)
            }
            ControlMessage::ScenarioSet {
                eyes_closed,
                trigger,
            } => {
                match self.source.steer(&Steering {
                    eyes_closed,
                    trigger,
                }) {
                    Ok(()) => {
                        let at = self.source.position();
                        self.publish(
                            MessageKind::Event,
                            at,
                            json!({"kind": "protocol", "sample": at, "text": "scenario_set", "eyes_closed": eyes_closed, "trigger": trigger}),
                        );
                        ControlResponse::ok(self.mode)
                    }
                    Err(e) => self.err(ErrorKind::Config, e.to_string()),
                }
            }
        }
    }

    fn begin_run(&mut self) -> Result<(), String> {
        let fs = self.source.config().fs();
        let pipeline = Pipeline::new(fs, &self.opts.montage, &self.opts.pipeline)
            .map_err(|e| e.to_string())?;
        self.source.start().map_err(|e| e.to_string())?;
        if let Some(dir) = &self.opts.out_dir {
            let meta = self.source.recorded_metadata().unwrap_or_else(|| {
                let mut m = SessionMetadata::new(self.source.config().clone());
                m.montage = self.opts.montage.clone();
                m.operator_note = self.opts.operator_note.clone();
                m.source = self.source_label.clone();
                m.scenario = self.source.scenario();
                m
            });
            match open_session(dir, &meta) {
                Ok(w) => {
                    self.recording = Some(w.path().to_path_buf());
                    self.recorder = Some(w);
                }
                Err(e) => {
                    let _ = self.source.stop();
                    return Err(e.to_string());
                }
            }
        }
        self.pipeline = Some(pipeline);
        self.run_samples = 0;
        self.rate = 0.0;
        self.run_started = Some(Instant::now());
        self.next_status = self.processed;
        self.last_error = None;
        self.mode = if self.source.is_replay() {
            Mode::Replay
        } else {
            Mode::Streaming
        };
        Ok(())
    }

    fn begin_impedance(&mut self, labels: &[String]) -> Result<(), (ErrorKind, String)> {
        if self.source.is_replay() {
            return Err((ErrorKind::State, "impedance needs a live device".into()));
        }
        let channels = self
            .opts
            .montage
            .select(labels)
            .map_err(|e| (ErrorKind::Config, e.to_string()))?;
        let restore = self.source.config().clone();
        if restore.leadoff.frequency.hz().is_none() {
            return Err((
                ErrorKind::Config,
                "impedance needs an AC lead-off frequency".into(),
            ));
        }
        let mask = channels.iter().fold(0u8, |m, &c| m | (1 << c));
        let cfg = restore.with_leadoff_channels(mask);
        let device = |e: crate::source::SourceError| (ErrorKind::Device, e.to_string());
        self.source.reconfigure(&cfg).map_err(device)?;
        if let Err(e) = self.source.start() {
            let _ = self.source.reconfigure(&restore);
            return Err(device(e));
        }
        let needed = (self.opts.impedance_window_s * cfg.fs()).round() as usize;
        self.impedance = Some(Impedance {
            channels,
            restore,
            capture: Vec::new(),
            needed,
            captured: 0,
        });
        self.mode = Mode::Impedance;
        Ok(())
    }

    fn step(&mut self) {
        match self.mode {
            Mode::Idle => {}
            Mode::Impedance => self.impedance_step(),
            Mode::Streaming | Mode::Replay => self.stream_step(),
        }
    }

    fn impedance_step(&mut self) {
        let Some(imp) = &self.impedance else {
            self.mode = Mode::Idle;
            return;
        };
        let want = self.opts.chunk_samples.min(imp.needed - imp.captured);
        match self.source.read_chunk(want) {
            Ok(Some(c)) => {
                let imp = self.impedance.as_mut().expect("checked above");
                imp.captured += c.len();
                imp.capture.push(c);
                if imp.captured >= imp.needed {
                    self.finish_impedance();
                }
            }
            Ok(None) => self.halt(Some("device stream ended during impedance check".into())),
            Err(e) => self.halt(Some(e.to_string())),
        }
    }

    fn finish_impedance(&mut self) {
        let Some(imp) = self.impedance.take() else {
            return;
        };
        let _ = self.source.stop();
        let cfg = self.source.config().clone();
        let mut readings = Vec::new();
        if let Some(window) = SignalChunk::concat(&imp.capture) {
            for &ch in &imp.channels {
                match measure_impedance(
                    &window,
                    ch,
                    &cfg,
                    &self.opts.tiers,
                    self.opts.montage.label(ch),
                ) {
                    Ok(r) => readings.push(r),
                    Err(e) => self.last_error = Some(e.to_string()),
                }
            }
        }
        if let Err(e) = self.source.reconfigure(&imp.restore) {
            self.last_error = Some(e.to_string());
        }
        self.mode = Mode::Idle;
        for r in &readings {
            self.readings.retain(|old| old.channel != r.channel);
            self.readings.push(r.clone());
        }
        self.readings.sort_by_key(|r| r.channel);
        let at = self.source.position();
        self.publish(MessageKind::Impedance, at, json!({ "readings": readings }));
    }

    fn stream_step(&mut self) {
        let mut want = self.opts.chunk_samples;
        if let Some(limit) = self.opts.stop_after_samples {
            let left = limit.saturating_sub(self.run_samples);
            if left == 0 {
                self.halt(None);
                return;
            }
            want = want.min(left as usize);
        }
        match self.source.read_chunk(want) {
            Ok(Some(c)) => self.process(c),
            Ok(None) if self.source.is_replay() => self.halt(None),
            Ok(None) => self.halt(Some("device stream ended unexpectedly".into())),
            Err(e) => self.halt(Some(e.to_string())),
        }
    }

    fn record_marker(&mut self, m: &Marker) {
        if let Some(rec) = &mut self.recorder {
            rec.add_marker(m.clone());
        }
        self.publish(
            MessageKind::Event,
            m.sample,
            json!({"kind": m.kind.as_str(), "sample": m.sample, "text": m.text}),
        );
    }

    fn publish_artifact(&mut self, ev: &ArtifactEvent) {
        self.events += 1;
        let labels: Vec<&str> = ev
            .channels
            .iter()
            .map(|&c| self.opts.montage.label(c))
            .collect();
        let payload = json!({
            "kind": ev.kind_str(),
            "channels": ev.channels,
            "labels": labels,
            "onset": ev.onset,
            "peak_uv": ev.peak_uv,
        });
        self.publish(MessageKind::Event, ev.onset, payload);
        if !self.source.is_replay() {
            if let Some(rec) = &mut self.recorder {
                rec.add_marker(ev.to_marker(&self.opts.montage));
            }
        }
    }

    fn process(&mut self, chunk: SignalChunk) {
        if let Some(rec) = &mut self.recorder {
            if let Err(e) = rec.append(&chunk) {
                self.halt(Some(e.to_string()));
                return;
            }
            self.recorded += chunk.len() as u64;
        }
        for m in self.source.drain_markers() {
            self.record_marker(&m);
        }
        let n = chunk.len() as u64;
        self.processed += n;
        self.run_samples += n;
        let Some(pipeline) = self.pipeline.as_mut() else {
            return;
        };
        let out = match pipeline.process(&chunk) {
            Ok(o) => o,
            Err(e) => {
                self.halt(Some(e.to_string()));
                return;
            }
        };
        match WireMessage::samples(self.seq, &out.filtered) {
            Ok(m) => {
                self.seq = self.seq.wrapping_add(1);
                self.hub.publish(Arc::new(m.encode()));
            }
            Err(e) => self.last_error = Some(e.to_string()),
        }
        if let Some(t) = chunk.acquired_at {
            let ms = t.elapsed().as_secs_f64() * 1e3;
            if self.latency.len() < LATENCY_WINDOW {
                self.latency.push(ms);
            } else {
                self.latency[self.latency_at] = ms;
            }
            self.latency_at = (self.latency_at + 1) % LATENCY_WINDOW;
        }
        for ev in &out.events {
            self.publish_artifact(ev);
        }
        if !self.source.is_replay() {
            for m in &out.state_changes {
                if let Some(rec) = &mut self.recorder {
                    rec.add_marker(m.clone());
                }
            }
        }
        for m in &out.state_changes {
            self.publish(
                MessageKind::Event,
                m.sample,
                json!({"kind": m.kind.as_str(), "sample": m.sample, "text": m.text}),
            );
        }
        if let Some(started) = self.run_started {
            self.rate = self.run_samples as f64 / started.elapsed().as_secs_f64().max(1e-9);
        }
        if self.processed >= self.next_status {
            self.next_status =
                self.processed + (self.opts.status_interval_s * chunk.fs).round().max(1.0) as u64;
            let status = serde_json::to_value(self.status()).unwrap_or_default();
            self.publish(MessageKind::Status, chunk.end(), status);
        }
    }

    /// Leave the current mode for idle, closing any recording.
    fn halt(&mut self, error: Option<String>) {
        match self.mode {
            Mode::Idle => {}
            Mode::Impedance => {
                let _ = self.source.stop();
                if let Some(imp) = self.impedance.take() {
                    let _ = self.source.reconfigure(&imp.restore);
                }
            }
            Mode::Streaming | Mode::Replay => {
                let _ = self.source.stop();
                if let Some(mut p) = self.pipeline.take() {
                    for ev in p.finish() {
                        self.publish_artifact(&ev);
                    }
                }
                if let Some(rec) = self.recorder.take() {
                    if let Err(e) = rec.close() {
                        self.last_error = Some(e.to_string());
                    }
                }
                if let Some(started) = self.run_started.take() {
                    self.rate = self.run_samples as f64 / started.elapsed().as_secs_f64().max(1e-9);
                }
            }
        }
        if error.is_some() {
            self.last_error = error;
        }
        self.mode = Mode::Idle;
        let status = serde_json::to_value(self.status()).unwrap_or_default();
        let at = self.source.position();
        self.publish(MessageKind::Status, at, status);
    }

    fn latency_summary(&self) -> LatencySummary {
        if self.latency.is_empty() {
            return LatencySummary::default();
        }
        let mut v = self.latency.clone();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| v[((p * (v.len() - 1) as f64).round() as usize).min(v.len() - 1)];
        LatencySummary {
            count: v.len(),
            p50_ms: q(0.5),
            p99_ms: q(0.99),
            max_ms: v[v.len() - 1],
        }
    }

    fn status(&self) -> StatusReport {
        let subscribers = self.hub.stats();
        StatusReport {
            mode: self.mode,
            config: self.source.config().clone(),
            montage: self.opts.montage.labels().to_vec(),
            source: self.source_label.clone(),
            uptime_s: self.spawned.elapsed().as_secs_f64(),
            position: self.source.position(),
            samples_processed: self.processed,
            samples_recorded: self.recorded,
            samples_per_second: self.rate,
            recording: self.recording.as_ref().map(|p| p.display().to_string()),
            dropped_total: subscribers.iter().map(|s| s.dropped).sum(),
            subscribers,
            impedance: self.readings.clone(),
            alpha: self.pipeline.as_ref().and_then(|p| p.alpha_status()),
            latency: self.latency_summary(),
            events: self.events,
            last_error: self.last_error.clone(),
        }
    }
}

/// Handle to a running acquisition worker.
pub struct Rig {
    tx: Sender<Request>,
    hub: Arc<Hub>,
    capacity: usize,
    worker: Mutex<Option<JoinHandle<()>>>,
}

impl Rig {
    pub fn spawn(source: Box<dyn SampleSource>, opts: RigOptions) -> Rig {
        let (tx, rx) = unbounded();
        let hub = Arc::new(Hub::new());
        let source_label = opts.source_label.clone().unwrap_or_else(|| {
            if source.is_replay() {
                "replay".into()
            } else if source.scenario().is_some() {
                "emulator".into()
            } else {
                "device".into()
            }
        });
        let capacity = opts.subscriber_capacity;
        let worker = Worker {
            source,
            opts,
            hub: hub.clone(),
            mode: Mode::Idle,
            spawned: Instant::now(),
            source_label,
            seq: 0,
            recorder: None,
            recording: None,
            pipeline: None,
            processed: 0,
            recorded: 0,
            run_samples: 0,
            run_started: None,
            rate: 0.0,
            latency: Vec::new(),
            latency_at: 0,
            impedance: None,
            readings: Vec::new(),
            events: 0,
            last_error: None,
            next_status: 0,
        };
        let handle = std::thread::Builder::new()
            .name("neurig-rig".into())
            .spawn(move || worker.run(rx))
            .expect("spawn rig worker");
        Rig {
            tx,
            hub,
            capacity,
            worker: Mutex::new(Some(handle)),
        }
    }

    pub fn control(&self, msg: ControlMessage) -> ControlResponse {
        let closed = || ControlResponse::error(Mode::Idle, ErrorKind::Closed, "rig has shut down");
        let (rtx, rrx) = bounded(1);
        if self.tx.send(Request::Control(msg, rtx)).is_err() {
            return closed();
        }
        rrx.recv().unwrap_or_else(|_| closed())
    }

    /// Parse and execute one JSON control message, returning the JSON reply.
    pub fn control_text(&self, text: &str) -> String {
        match serde_json::from_str::<ControlMessage>(text) {
            Ok(msg) => self.control(msg).to_json(),
            Err(e) => {
                let mode = self.status().map_or(Mode::Idle, |s| s.mode);
                ControlResponse::error(mode, ErrorKind::Parse, e.to_string()).to_json()
            }
        }
    }

    pub fn status(&self) -> Option<StatusReport> {
        self.control(ControlMessage::Status).status.map(|s| *s)
    }

    pub fn subscribe(&self) -> Subscription {
        self.hub.subscribe(self.capacity)
    }

    pub fn subscribe_with_capacity(&self, capacity: usize) -> Subscription {
        self.hub.subscribe(capacity)
    }

    pub fn hub(&self) -> &Arc<Hub> {
        &self.hub
    }

    /// Poll until the rig is idle; `None` on timeout or shutdown.
    pub fn wait_until_idle(&self, timeout: Option<Duration>) -> Option<StatusReport> {
        let deadline = timeout.map(|t| Instant::now() + t);
        loop {
            let s = self.status()?;
            if s.mode == Mode::Idle {
                return Some(s);
            }
            if deadline.is_some_and(|d| Instant::now() >= d) {
                return None;
            }
            std::thread::sleep(Duration::from_millis(5));
        }
    }

    /// Stop any run, close its recording and join the worker.
    pub fn shutdown(&self) {
        let _ = self.tx.send(Request::Shutdown);
        let handle = self.worker.lock().unwrap_or_else(|e| e.into_inner()).take();
        if let Some(h) = handle {
            let _ = h.join();
        }
    }
}

impl Drop for Rig {
    fn drop(&mut self) {
        self.shutdown();
    }
}
