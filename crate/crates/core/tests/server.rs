use std::io::{Read, Write};
use std::net::TcpStream;
use std::time::{Duration, Instant};

use neurig_core::emulator::{builtin_scenario, EmulatedDevice};
use neurig_core::impedance::Quality;
use neurig_core::server::{
    serve, ControlMessage, ErrorKind, MessageKind, Mode, Payload, Rig, RigOptions, WireMessage,
};
use neurig_core::session::{read_session, ReadMode, ReplaySource};
use neurig_core::source::{DeviceSource, Pacing};
use neurig_core::DeviceConfig;

fn emulator(name: &str, pacing: Pacing) -> Box<DeviceSource<EmulatedDevice>> {
    let dev = EmulatedDevice::new(&builtin_scenario(name).unwrap()).unwrap();
    Box::new(DeviceSource::open(dev, DeviceConfig::default(), pacing).unwrap())
}

fn drain(sub: &neurig_core::server::Subscription) -> Vec<WireMessage> {
    let mut out = Vec::new();
    while let Some(f) = sub.try_recv() {
        out.push(WireMessage::decode(&f).unwrap());
    }
    out
}

#[test]
fn streaming_run_records_and_broadcasts() {
    let dir = tempfile::tempdir().unwrap();
    let opts = RigOptions {
        out_dir: Some(dir.path().to_path_buf()),
        stop_after_samples: Some(2500),
        ..RigOptions::default()
    };
    let rig = Rig::spawn(emulator("blink-4321", Pacing::Fast), opts);
    let sub = rig.subscribe_with_capacity(10_000);
    assert!(rig.control(ControlMessage::Start).ok);
    let status = rig.wait_until_idle(Some(Duration::from_secs(30))).unwrap();
    assert_eq!(status.samples_processed, 2500);
    assert_eq!(status.samples_recorded, 2500);
    assert!(status.last_error.is_none(), "{:?}", status.last_error);

    let msgs = drain(&sub);
    let mut next = 0;
    let mut blinks = 0;
    for m in &msgs {
        match m.kind {
            MessageKind::Samples => {
                assert_eq!(m.first_sample, next);
                next += m.n_samples as u64;
            }
            MessageKind::Event => {
                let Payload::Json(j) = &m.payload else {
                    panic!()
                };
                if j.contains("\"blink\"") {
                    blinks += 1;
                }
            }
            _ => {}
        }
    }
    assert_eq!(next, 2500);
    assert!(blinks >= 4, "blinks {blinks}");
    let seqs: Vec<u32> = msgs.iter().map(|m| m.seq).collect();
    assert!(seqs.windows(2).all(|w| w[1] == w[0] + 1));

    let rec = read_session(status.recording.unwrap(), ReadMode::Strict).unwrap();
    assert_eq!(rec.samples.len(), 2500);
    assert!(rec.markers.iter().any(|m| m.kind.as_str() == "blink"));
}

#[test]
fn illegal_transitions_are_state_errors() {
    let rig = Rig::spawn(
        emulator("alpha-test", Pacing::Realtime(1.0)),
        RigOptions::default(),
    );
    let r = rig.control(ControlMessage::Stop);
    assert_eq!(r.error.unwrap().kind, ErrorKind::State);
    let r = rig.control(ControlMessage::Mark { text: "x".into() });
    assert_eq!(r.error.unwrap().kind, ErrorKind::State);
    assert!(rig.control(ControlMessage::Start).ok);
    let r = rig.control(ControlMessage::Start);
    assert_eq!(r.mode, Mode::Streaming);
    assert_eq!(r.error.unwrap().kind, ErrorKind::State);
    let r = rig.control(ControlMessage::Configure {
        config: DeviceConfig::default(),
    });
    assert_eq!(r.error.unwrap().kind, ErrorKind::State);
    let r = rig.control(ControlMessage::Impedance { channels: vec![] });
    assert_eq!(r.error.unwrap().kind, ErrorKind::State);
    assert!(
        rig.control(ControlMessage::Mark {
            text: "hello".into()
        })
        .ok
    );
    assert!(rig.control(ControlMessage::Stop).ok);
    assert_eq!(rig.status().unwrap().mode, Mode::Idle);

    let reply: serde_json::Value =
        serde_json::from_str(&rig.control_text("{\"type\":\"warp\"}")).unwrap();
    assert_eq!(reply["ok"], false);
    assert_eq!(reply["error"]["kind"], "parse");

    let bad = DeviceConfig {
        sample_rate: 300,
        ..DeviceConfig::default()
    };
    let r = rig.control(ControlMessage::Configure { config: bad });
    assert_eq!(r.error.unwrap().kind, ErrorKind::Config);
}

#[test]
fn impedance_check_publishes_readings_and_restores_config() {
    let rig = Rig::spawn(
        emulator("impedance-sweep", Pacing::Fast),
        RigOptions::default(),
    );
    let sub = rig.subscribe();
    assert!(
        rig.control(ControlMessage::Impedance { channels: vec![] })
            .ok
    );
    let status = rig.wait_until_idle(Some(Duration::from_secs(30))).unwrap();
    assert_eq!(status.config, DeviceConfig::default());
    assert_eq!(status.impedance.len(), 8);
    let expected = [5e3, 10e3, 50e3, 200e3, 20e3, 100e3, 1e6, 2e3];
    for r in &status.impedance {
        let e = expected[r.channel];
        assert!(
            (r.ohms - e).abs() / e < 0.05,
            "ch{} {} vs {}",
            r.channel,
            r.ohms,
            e
        );
    }
    assert_eq!(status.impedance[6].quality, Quality::Open);
    assert_eq!(status.impedance[0].quality, Quality::Good);
    let kinds: Vec<MessageKind> = drain(&sub).iter().map(|m| m.kind).collect();
    assert!(kinds.contains(&MessageKind::Impedance));
    assert!(!kinds.contains(&MessageKind::Samples));
}

#[test]
fn replay_reproduces_recording() {
    let dir = tempfile::tempdir().unwrap();
    let opts = RigOptions {
        out_dir: Some(dir.path().join("a")),
        stop_after_samples: Some(5000),
        ..RigOptions::default()
    };
    let rig = Rig::spawn(emulator("blink-4321", Pacing::Fast), opts);
    rig.control(ControlMessage::Start);
    let first = rig
        .wait_until_idle(Some(Duration::from_secs(30)))
        .unwrap()
        .recording
        .unwrap();
    drop(rig);

    let opts = RigOptions {
        out_dir: Some(dir.path().join("b")),
        ..RigOptions::default()
    };
    let rig = Rig::spawn(Box::new(ReplaySource::open(&first, 0.0).unwrap()), opts);
    assert_eq!(rig.control(ControlMessage::Start).mode, Mode::Replay);
    let second = rig.wait_until_idle(Some(Duration::from_secs(30))).unwrap();
    assert!(second.last_error.is_none());
    let a = std::fs::read(first).unwrap();
    let b = std::fs::read(second.recording.unwrap()).unwrap();
    let diff = a.iter().zip(&b).position(|(x, y)| x != y);
    assert!(
        diff.is_none() && a.len() == b.len(),
        "differ at {diff:?}, lengths {} {}",
        a.len(),
        b.len()
    );
}

#[test]
fn scenario_steering_reaches_emulator_only() {
    let rig = Rig::spawn(emulator("alpha-test", Pacing::Fast), RigOptions::default());
    let r = rig.control_text(r#"{"type":"scenario_set","eyes_closed":true}"#);
    assert!(r.contains("\"ok\":true"), "{r}");
}

fn http_get(addr: std::net::SocketAddr, path: &str) -> String {
    let mut s = TcpStream::connect(addr).unwrap();
    write!(s, "GET {path} HTTP/1.1\r\nHost: x\r\n\r\n").unwrap();
    let mut out = String::new();
    s.read_to_string(&mut out).unwrap();
    out
}

#[test]
fn websocket_control_and_stream() {
    let rig = std::sync::Arc::new(Rig::spawn(
        emulator("alpha-test", Pacing::Realtime(4.0)),
        RigOptions::default(),
    ));
    let mut server = serve(rig.clone(), "127.0.0.1:0").unwrap();
    let addr = server.local_addr();

    let status = http_get(addr, "/status");
    assert!(status.starts_with("HTTP/1.1 200"), "{status}");
    assert!(status.contains("\"mode\":\"idle\""));
    assert!(http_get(addr, "/nope").starts_with("HTTP/1.1 404"));

    let stream = TcpStream::connect(addr).unwrap();
    let (mut ws, _) = tungstenite::client(format!("ws://{addr}/"), stream).unwrap();
    ws.send(tungstenite::Message::text(r#"{"type":"start"}"#))
        .unwrap();
    let deadline = Instant::now() + Duration::from_secs(10);
    let mut got_reply = false;
    let mut samples = 0usize;
    while Instant::now() < deadline && !(got_reply && samples >= 250) {
        match ws.read().unwrap() {
            tungstenite::Message::Text(t) => {
                assert!(t.as_str().contains("\"ok\":true"), "{}", t.as_str());
                got_reply = true;
            }
            tungstenite::Message::Binary(b) => {
                let m = WireMessage::decode(&b).unwrap();
                if m.kind == MessageKind::Samples {
                    assert_eq!(m.n_channels, 8);
                    samples += m.n_samples as usize;
                }
            }
            _ => {}
        }
    }
    assert!(got_reply);
    assert!(samples >= 250);
    ws.send(tungstenite::Message::text(r#"{"type":"stop"}"#))
        .unwrap();
    let _ = ws.close(None);
    server.shutdown();
}
