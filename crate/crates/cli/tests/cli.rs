use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use neurig_core::session::{read_session, ReadMode};
use serde_json::Value;

fn neurig(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_neurig"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = neurig(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn schema(name: &str) -> jsonschema::Validator {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../schemas")
        .join(name);
    let s: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::validator_for(&s).unwrap()
}

fn assert_valid(schema_name: &str, doc: &Value) {
    let v = schema(schema_name);
    let errors: Vec<String> = v.iter_errors(doc).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{schema_name}: {errors:?}");
}

fn read_json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn record(dir: &Path, scenario: &str, out: &str) -> PathBuf {
    ok(
        dir,
        &[
            "acquire",
            "--source",
            "emu",
            "--scenario",
            scenario,
            "--out",
            out,
        ],
    );
    dir.join(out).join("session-001.neurec")
}

#[test]
fn acquire_records_requested_duration() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(
        dir.path(),
        &[
            "acquire",
            "--source",
            "emu",
            "--scenario",
            "alpha-test.json",
            "--duration",
            "16",
            "--out",
            "s1",
            "--json",
        ],
    );
    let status: Value = serde_json::from_str(&stdout).unwrap();
    assert_valid("status.schema.json", &status);
    let rec = read_session(dir.path().join("s1/session-001.neurec"), ReadMode::Strict).unwrap();
    assert_eq!(rec.samples.len(), 4000);
}

#[test]
fn missing_scenario_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = neurig(
        dir.path(),
        &["acquire", "--scenario", "no-such-scenario.json"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no-such-scenario.json"));
    assert!(out.stdout.is_empty());

    let out = neurig(dir.path(), &["acquire", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    let out = neurig(dir.path(), &["analyze", "nowhere"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn runs_are_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = record(dir.path(), "blink-4321", "a");
    let b = record(dir.path(), "blink-4321", "b");
    let (a, b) = (
        read_session(a, ReadMode::Strict).unwrap(),
        read_session(b, ReadMode::Strict).unwrap(),
    );
    assert_eq!(a.samples, b.samples);
    assert_eq!(a.markers, b.markers);

    ok(
        dir.path(),
        &[
            "acquire",
            "--scenario",
            "blink-4321",
            "--seed",
            "5",
            "--duration",
            "2",
            "--out",
            "c",
        ],
    );
    let c = read_session(dir.path().join("c/session-001.neurec"), ReadMode::Strict).unwrap();
    assert_ne!(c.samples.data, a.samples.slice(0, 500).data);
}

#[test]
fn replay_source_reproduces_recording() {
    let dir = tempfile::tempdir().unwrap();
    let first = record(dir.path(), "blink-4321", "a");
    let spec = format!("replay:{}", first.display());
    ok(dir.path(), &["acquire", "--source", &spec, "--out", "b"]);
    let second = dir.path().join("b/session-001.neurec");
    assert_eq!(
        std::fs::read(first).unwrap(),
        std::fs::read(second).unwrap()
    );
}

#[test]
fn blink_and_chew_group_pattern() {
    let dir = tempfile::tempdir().unwrap();
    for (scenario, detect) in [("blink-4321", "blinks"), ("chew-4321", "chews")] {
        let session = record(dir.path(), scenario, scenario);
        let emit = format!("{scenario}-out");
        ok(
            dir.path(),
            &[
                "analyze",
                session.to_str().unwrap(),
                "--detect",
                detect,
                "--emit",
                &emit,
            ],
        );
        let events = read_json(dir.path().join(&emit).join("events.json"));
        assert_valid("events.schema.json", &events);
        let groups: Vec<u64> = events["group_counts"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_u64().unwrap())
            .collect();
        assert_eq!(groups, [4, 3, 2, 1], "{scenario}");
    }
}

#[test]
fn alpha_band_power_scalogram_and_classifier() {
    let dir = tempfile::tempdir().unwrap();
    record(dir.path(), "alpha-test", "s_alpha");
    let stdout = ok(
        dir.path(),
        &[
            "analyze", "s_alpha", "--band", "8:12", "--cwt", "--detect", "alpha", "--epochs",
            "2:1", "--emit", "out", "--json",
        ],
    );
    let summary: Value = serde_json::from_str(&stdout).unwrap();
    assert_valid("analysis-summary.schema.json", &summary);
    assert!(summary["band"]["closed_open_ratio"].as_f64().unwrap() >= 2.0);

    let alpha = read_json(dir.path().join("out/alpha.json"));
    assert_valid("alpha.schema.json", &alpha);
    assert!(alpha["accuracy"].as_f64().unwrap() >= 0.95);

    let mut rdr = csv::Reader::from_path(dir.path().join("out/scalogram.csv")).unwrap();
    let times: Vec<f64> = rdr
        .headers()
        .unwrap()
        .iter()
        .skip(1)
        .map(|t| t.parse().unwrap())
        .collect();
    let rows: Vec<(f64, Vec<f64>)> = rdr
        .records()
        .map(|r| {
            let r = r.unwrap();
            (
                r[0].parse().unwrap(),
                r.iter().skip(1).map(|v| v.parse().unwrap()).collect(),
            )
        })
        .collect();
    // Closed span 8-16 s, away from the edges.
    let cols: Vec<usize> = (0..times.len())
        .filter(|&i| times[i] >= 9.0 && times[i] <= 14.0)
        .collect();
    assert!(!cols.is_empty());
    for &c in &cols {
        let (peak, _) = rows
            .iter()
            .map(|(f, m)| (*f, m[c]))
            .fold(
                (0.0, f64::MIN),
                |best, x| if x.1 > best.1 { x } else { best },
            );
        assert!((peak - 10.0).abs() <= 0.5, "t={} peak {peak}", times[c]);
    }

    let mut rdr = csv::Reader::from_path(dir.path().join("out/band_power.csv")).unwrap();
    assert_eq!(rdr.records().count(), 16);
    let mut rdr = csv::Reader::from_path(dir.path().join("out/filtered.csv")).unwrap();
    assert_eq!(rdr.records().count(), 4000);
    let mut rdr = csv::Reader::from_path(dir.path().join("out/epochs.csv")).unwrap();
    assert_eq!(rdr.records().count(), 15);
}

#[test]
fn impedance_json_matches_schema_and_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let doc: Value = serde_json::from_str(&ok(dir.path(), &["impedance", "--json"])).unwrap();
    assert_valid("impedance.schema.json", &doc);
    let readings = doc["readings"].as_array().unwrap();
    assert_eq!(readings.len(), 8);
    let expected = [5e3, 10e3, 50e3, 200e3, 20e3, 100e3, 1e6, 2e3];
    for r in readings {
        let ch = r["channel"].as_u64().unwrap() as usize;
        let ohms = r["ohms"].as_f64().unwrap();
        assert!((ohms - expected[ch]).abs() / expected[ch] < 0.05);
    }

    let doc: Value = serde_json::from_str(&ok(
        dir.path(),
        &["impedance", "--json", "--channel", "Fz,Pz"],
    ))
    .unwrap();
    let labels: Vec<&str> = doc["readings"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["label"].as_str().unwrap())
        .collect();
    assert_eq!(labels, ["Fz", "Pz"]);
    let table = ok(dir.path(), &["impedance", "--channel", "all"]);
    assert_eq!(table.lines().count(), 9);

    let out = neurig(dir.path(), &["impedance", "--channel", "Oz"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn scenarios_and_export() {
    let dir = tempfile::tempdir().unwrap();
    let doc: Value = serde_json::from_str(&ok(dir.path(), &["scenarios", "--json"])).unwrap();
    assert_valid("scenarios.schema.json", &doc);
    assert_eq!(doc["scenarios"].as_array().unwrap().len(), 4);

    ok(
        dir.path(),
        &[
            "acquire",
            "--scenario",
            "blink-4321",
            "--duration",
            "4",
            "--out",
            "s",
        ],
    );
    ok(dir.path(), &["export", "s", "--out", "s.csv"]);
    let text = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert!(data[0].starts_with("index,t_s,F7,Fz,F8,C3,C4,T5,Pz,T6,marker"));
    assert_eq!(data.len(), 1001);
}

#[test]
fn control_messages_match_schema() {
    let v = schema("control.schema.json");
    for msg in [
        r#"{"type":"start"}"#,
        r#"{"type":"stop"}"#,
        r#"{"type":"status"}"#,
        r#"{"type":"impedance","channels":["Fz"]}"#,
        r#"{"type":"mark","text":"eyes closed now"}"#,
        r#"{"type":"scenario_set","eyes_closed":true,"trigger":"blink"}"#,
        r#"{"type":"configure","config":{"sample_rate":500}}"#,
    ] {
        let doc: Value = serde_json::from_str(msg).unwrap();
        assert!(v.is_valid(&doc), "{msg}");
        serde_json::from_str::<neurig_core::server::ControlMessage>(msg).unwrap();
    }
    assert!(!v.is_valid(&serde_json::json!({"type": "warp"})));
}
