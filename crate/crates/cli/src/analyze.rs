use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use neurig_core::detect::{
    band_power_series, group_bursts, AlphaStateWindow, ArtifactEvent, ArtifactKind, EyeState,
};
use neurig_core::dsp::{cwt_chunk, epoch_extract, epoch_features, freq_grid, FEATURE_BANDS};
use neurig_core::emulator::Scenario;
use neurig_core::server::{Pipeline, PipelineOptions};
use neurig_core::session::{read_session, ReadMode, Recording};
use neurig_core::{Montage, SignalChunk};
use serde::Serialize;
use serde_json::{json, Value};

use crate::{sources, usage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Detect {
    Blinks,
    Chews,
    Artifacts,
    Alpha,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Session file, or a directory holding sessions (the latest is used).
    session: PathBuf,
    /// Band-power series for `lo:hi` Hz in 1 s windows.
    #[arg(long, value_parser = parse_pair)]
    band: Option<(f64, f64)>,
    /// Morlet scalogram of the alpha channel.
    #[arg(long)]
    cwt: bool,
    /// Electrode for the scalogram and the alpha detector.
    #[arg(long, default_value = "Pz")]
    channel: String,
    #[arg(long, value_enum)]
    detect: Vec<Detect>,
    /// Per-epoch features for `window:hop` seconds.
    #[arg(long, value_parser = parse_epochs)]
    epochs: Option<(f64, f64)>,
    /// Output directory; defaults to `<session>.analysis` beside the session.
    #[arg(long)]
    emit: Option<PathBuf>,
    /// Print the summary to stdout as JSON.
    #[arg(long)]
    json: bool,
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("expected `a:b`, got `{s}`"))?;
    let a: f64 = a.trim().parse().map_err(|e| format!("{a}: {e}"))?;
    let b: f64 = b.trim().parse().map_err(|e| format!("{b}: {e}"))?;
    if !(a > 0.0 && b > a) {
        return Err(format!("expected 0 < a < b, got {s}"));
    }
    Ok((a, b))
}

fn parse_epochs(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("expected `window:hop`, got `{s}`"))?;
    let a: f64 = a.trim().parse().map_err(|e| format!("{a}: {e}"))?;
    let b: f64 = b.trim().parse().map_err(|e| format!("{b}: {e}"))?;
    if !(b > 0.0 && a >= b) {
        return Err(format!("expected window >= hop > 0, got {s}"));
    }
    Ok((a, b))
}

/// CWT output time step in samples.
const SCALOGRAM_STEP: usize = 25;
const SCALOGRAM_GRID: (f64, f64, f64) = (1.0, 40.0, 0.25);

pub fn run(args: AnalyzeArgs) -> Result<()> {
    let path = sources::session_path(&args.session)?;
    let rec = read_session(&path, ReadMode::Lossy)
        .with_context(|| format!("reading {}", path.display()))?;
    if let Some(d) = &rec.damage {
        log::warn!("{}: {d}", path.display());
    }
    if rec.samples.is_empty() {
        anyhow::bail!("{} holds no samples", path.display());
    }
    let montage = rec.metadata.montage.clone();
    let channel = montage
        .index_of(&args.channel)
        .map_err(|e| usage(e.to_string()))?;
    let out = args
        .emit
        .clone()
        .unwrap_or_else(|| path.with_extension("analysis"));
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;

    let mut summary = Summary::new(&path, &rec);
    let fs = rec.samples.fs;
    let truth = rec.metadata.scenario.as_ref();

    let mut opts = PipelineOptions::default();
    opts.alpha.channel = montage.label(channel).to_string();
    let run = run_pipeline(&rec.samples, &montage, &opts)?;
    write_signal_csv(&out.join("filtered.csv"), &run.filtered, &montage)?;
    summary.outputs.push("filtered.csv".into());

    if let Some(band) = args.band {
        let mut per_channel = Vec::new();
        for ch in 0..montage.labels().len() {
            per_channel.push(band_power_series(&rec.samples, ch, band, 1.0)?);
        }
        let mut w = csv::Writer::from_path(out.join("band_power.csv"))?;
        let mut header = vec!["start".to_string(), "end".into(), "t_s".into()];
        header.extend(montage.labels().iter().cloned());
        header.push("eyes".into());
        w.write_record(&header)?;
        let mut closed = Vec::new();
        let mut open = Vec::new();
        for (i, win) in per_channel[0].iter().enumerate() {
            let state = truth.and_then(|s| truth_state(s, win.start, win.end, fs));
            let mut row = vec![
                win.start.to_string(),
                win.end.to_string(),
                format!("{:.3}", win.start as f64 / fs),
            ];
            row.extend(per_channel.iter().map(|c| c[i].band_power_uv2.to_string()));
            row.push(state.map_or("", EyeState::as_str).to_string());
            w.write_record(&row)?;
            match state {
                Some(EyeState::Closed) => closed.push(per_channel[channel][i].band_power_uv2),
                Some(EyeState::Open) => open.push(per_channel[channel][i].band_power_uv2),
                None => {}
            }
        }
        w.flush()?;
        let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
        let (c, o) = (mean(&closed), mean(&open));
        summary.band = Some(json!({
            "band_hz": [band.0, band.1],
            "channel": montage.label(channel),
            "windows": per_channel[0].len(),
            "closed_mean_uv2": c,
            "open_mean_uv2": o,
            "closed_open_ratio": c.zip(o).map(|(c, o)| c / o),
        }));
        summary.outputs.push("band_power.csv".into());
    }

    if args.cwt {
        let (lo, hi, step) = SCALOGRAM_GRID;
        let freqs = freq_grid(lo, hi.min(fs / 2.0 - 1.0), step);
        let sc = cwt_chunk(&rec.samples, channel, &freqs)?;
        let cols: Vec<usize> = (0..sc.n_times()).step_by(SCALOGRAM_STEP).collect();
        let mut f = BufWriter::new(File::create(out.join("scalogram.csv"))?);
        write!(f, "freq_hz")?;
        for &ti in &cols {
            write!(f, ",{:.3}", sc.times[ti] as f64 / fs)?;
        }
        writeln!(f)?;
        for (fi, hz) in sc.freqs_hz.iter().enumerate() {
            write!(f, "{hz}")?;
            for &ti in &cols {
                write!(f, ",{:.6}", sc.magnitude[fi][ti])?;
            }
            writeln!(f)?;
        }
        f.flush()?;
        let closed_peak = truth.and_then(|s| {
            let iv = s.alpha_timeline.first()?;
            let from = ((iv.start_s * fs) as u64).saturating_sub(rec.samples.start) as usize;
            let to = (((iv.end_s * fs) as u64).saturating_sub(rec.samples.start) as usize)
                .min(sc.n_times());
            sc.peak_frequency(from, to)
        });
        summary.cwt = Some(json!({
            "channel": montage.label(channel),
            "freqs_hz": [sc.freqs_hz.first(), sc.freqs_hz.last()],
            "step_hz": step,
            "time_step_s": SCALOGRAM_STEP as f64 / fs,
            "closed_peak_hz": closed_peak,
        }));
        summary.outputs.push("scalogram.csv".into());
    }

    let artifact_kinds: Vec<ArtifactKind> = args
        .detect
        .iter()
        .flat_map(|d| match d {
            Detect::Blinks => vec![ArtifactKind::Blink],
            Detect::Chews => vec![ArtifactKind::Chew],
            Detect::Artifacts => vec![
                ArtifactKind::Blink,
                ArtifactKind::Chew,
                ArtifactKind::Generic,
            ],
            Detect::Alpha => vec![],
        })
        .collect();
    if args.detect.iter().any(|d| *d != Detect::Alpha) {
        let events: Vec<&ArtifactEvent> = run
            .events
            .iter()
            .filter(|e| artifact_kinds.contains(&e.kind))
            .collect();
        let owned: Vec<ArtifactEvent> = events.iter().map(|e| (*e).clone()).collect();
        let groups = group_bursts(&owned, fs, opts.artifact.group_gap_s);
        let items: Vec<Value> = events
            .iter()
            .map(|e| {
                json!({
                    "kind": e.kind,
                    "channels": e.channels,
                    "labels": e.channels.iter().map(|&c| montage.label(c)).collect::<Vec<_>>(),
                    "onset": e.onset,
                    "t_s": e.onset as f64 / fs,
                    "peak_uv": e.peak_uv,
                })
            })
            .collect();
        let doc = json!({
            "kinds": artifact_kinds,
            "threshold_uv": opts.artifact.threshold_uv,
            "events": items,
            "group_counts": groups,
        });
        write_json(&out.join("events.json"), &doc)?;
        summary.events = Some(json!({ "count": events.len(), "group_counts": groups }));
        summary.outputs.push("events.json".into());
    }

    if args.detect.contains(&Detect::Alpha) {
        let scored: Vec<(AlphaStateWindow, Option<EyeState>)> = run
            .alpha
            .iter()
            .map(|w| (*w, truth.and_then(|s| truth_state(s, w.start, w.end, fs))))
            .collect();
        let judged: Vec<bool> = scored
            .iter()
            .filter_map(|(w, t)| t.map(|t| t == w.state))
            .collect();
        let accuracy = (!judged.is_empty())
            .then(|| judged.iter().filter(|&&ok| ok).count() as f64 / judged.len() as f64);
        let windows: Vec<Value> = scored
            .iter()
            .map(|(w, t)| {
                json!({
                    "start": w.start,
                    "end": w.end,
                    "t_s": w.start as f64 / fs,
                    "band_power_uv2": w.band_power_uv2,
                    "state": w.state.as_str(),
                    "truth": t.map(EyeState::as_str),
                })
            })
            .collect();
        let doc = json!({
            "channel": montage.label(channel),
            "band_hz": [opts.alpha.band_hz.0, opts.alpha.band_hz.1],
            "ratio_threshold": opts.alpha.ratio_threshold,
            "baseline_uv2": run.baseline,
            "windows": windows,
            "accuracy": accuracy,
        });
        write_json(&out.join("alpha.json"), &doc)?;
        summary.alpha = Some(
            json!({ "windows": windows.len(), "accuracy": accuracy, "baseline_uv2": run.baseline }),
        );
        summary.outputs.push("alpha.json".into());
    }

    if let Some((window_s, hop_s)) = args.epochs {
        let epochs = epoch_extract(&rec.samples, &rec.markers, window_s, hop_s)?;
        let mut w = csv::Writer::from_path(out.join("epochs.csv"))?;
        let mut header = vec!["start".to_string(), "t_s".into(), "label".into()];
        for l in montage.labels() {
            header.push(format!("rms_{l}"));
        }
        for (band, _, _) in FEATURE_BANDS {
            for l in montage.labels() {
                header.push(format!("{band}_{l}"));
            }
        }
        w.write_record(&header)?;
        for e in &epochs {
            let f = epoch_features(e)?;
            let mut row = vec![
                f.start.to_string(),
                format!("{:.3}", f.start as f64 / fs),
                f.label.unwrap_or_default(),
            ];
            row.extend(f.rms.iter().map(f64::to_string));
            for band in &f.band_power {
                row.extend(band.iter().map(f64::to_string));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        summary.epochs =
            Some(json!({ "count": epochs.len(), "window_s": window_s, "hop_s": hop_s }));
        summary.outputs.push("epochs.csv".into());
    }

    summary.outputs.push("summary.json".into());
    summary.output_dir = out.display().to_string();
    write_json(&out.join("summary.json"), &summary)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&summary)?);
    } else {
        println!("{}", out.display());
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct Summary {
    session: String,
    session_id: String,
    source: String,
    sample_rate: f64,
    first_sample: u64,
    samples: usize,
    duration_s: f64,
    markers: usize,
    damage: Option<String>,
    output_dir: String,
    outputs: Vec<String>,
    band: Option<Value>,
    cwt: Option<Value>,
    events: Option<Value>,
    alpha: Option<Value>,
    epochs: Option<Value>,
}

impl Summary {
    fn new(path: &Path, rec: &Recording) -> Self {
        Summary {
            session: path.display().to_string(),
            session_id: rec.metadata.session_id.to_string(),
            source: rec.metadata.source.clone(),
            sample_rate: rec.samples.fs,
            first_sample: rec.samples.start,
            samples: rec.samples.len(),
            duration_s: rec.samples.duration_s(),
            markers: rec.markers.len(),
            damage: rec.damage.clone(),
            output_dir: String::new(),
            outputs: Vec::new(),
            band: None,
            cwt: None,
            events: None,
            alpha: None,
            epochs: None,
        }
    }
}

struct PipelineRun {
    filtered: SignalChunk,
    events: Vec<ArtifactEvent>,
    alpha: Vec<AlphaStateWindow>,
    baseline: Option<f64>,
}

/// Replays the recording through the live pipeline in acquisition-sized chunks.
fn run_pipeline(
    samples: &SignalChunk,
    montage: &Montage,
    opts: &PipelineOptions,
) -> Result<PipelineRun> {
    let mut p = Pipeline::new(samples.fs, montage, opts)?;
    let mut parts = Vec::new();
    let mut events = Vec::new();
    let mut alpha = Vec::new();
    let step = 25;
    for from in (0..samples.len()).step_by(step) {
        let chunk = samples.slice(from, (from + step).min(samples.len()));
        let o = p.process(&chunk)?;
        parts.push(o.filtered);
        events.extend(o.events);
        alpha.extend(o.alpha);
    }
    events.extend(p.finish());
    events.sort_by_key(|e| e.onset);
    let filtered = SignalChunk::concat(&parts).unwrap_or_else(|| samples.clone());
    let baseline = p.alpha_status().and_then(|s| s.baseline_uv2);
    Ok(PipelineRun {
        filtered,
        events,
        alpha,
        baseline,
    })
}

/// Scripted eye state of `[start, end)`, judged at the window midpoint.
fn truth_state(s: &Scenario, start: u64, end: u64, fs: f64) -> Option<EyeState> {
    let mid = (start + end) as f64 / 2.0 / fs;
    if mid > s.duration_s {
        return None;
    }
    Some(if s.alpha_timeline.iter().any(|iv| iv.contains(mid)) {
        EyeState::Closed
    } else {
        EyeState::Open
    })
}

fn write_signal_csv(path: &Path, x: &SignalChunk, montage: &Montage) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["index".to_string(), "t_s".into()];
    header.extend(montage.labels().iter().cloned());
    w.write_record(&header)?;
    for i in 0..x.len() {
        let idx = x.start + i as u64;
        let mut row = vec![idx.to_string(), format!("{:.6}", i as f64 / x.fs)];
        row.extend(x.data.iter().map(|c| (c[i] as f32).to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn write_json(path: &Path, v: &impl Serialize) -> Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    serde_json::to_writer_pretty(BufWriter::new(f), v)?;
    Ok(())
}
