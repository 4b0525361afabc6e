use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Result};
use clap::Args;
use neurig_core::server::{
    default_port, serve, ControlMessage, Mode, Rig, RigOptions, StatusReport,
};
use neurig_core::source::Pacing;

use crate::sources::{self, SourceSpec};
use crate::usage;

#[derive(Debug, Args)]
pub struct AcquireArgs {
    /// `emu` or `replay:<file>`.
    #[arg(long, default_value = "emu", value_parser = sources::parse_source)]
    source: SourceSpec,
    /// Emulator scenario: a JSON file or a built-in name.
    #[arg(long, default_value = "alpha-test")]
    scenario: String,
    /// Device configuration JSON.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for the recorded session.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Do not record.
    #[arg(long, conflicts_with = "out")]
    no_record: bool,
    /// Serve the live stream on this port (default from NEURIG_PORT, else 9271).
    #[arg(long, num_args = 0..=1, default_missing_value = "0")]
    serve: Option<u16>,
    /// Bind address when serving.
    #[arg(long, default_value = "127.0.0.1")]
    bind: String,
    /// Seconds to acquire; defaults to the scenario length for the emulator
    /// and the whole recording for replay.
    #[arg(long)]
    duration: Option<f64>,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Pacing multiplier against wall-clock time; 0 runs as fast as possible.
    #[arg(long)]
    speed: Option<f64>,
    /// Same as `--speed 0`.
    #[arg(long, conflicts_with = "speed")]
    fast: bool,
    /// When serving, wait for a `start` control message instead of starting at once.
    #[arg(long, requires = "serve")]
    idle: bool,
    #[arg(long, default_value = "")]
    note: String,
    /// Print the final status as JSON.
    #[arg(long)]
    json: bool,
}

pub fn run(args: AcquireArgs) -> Result<()> {
    let serving = args.serve.is_some();
    let speed = match (args.fast, args.speed) {
        (true, _) => 0.0,
        (false, Some(s)) if s >= 0.0 && s.is_finite() => s,
        (false, Some(s)) => return Err(usage(format!("--speed must be >= 0, got {s}"))),
        (false, None) if serving => 1.0,
        (false, None) => 0.0,
    };
    if args.duration.is_some_and(|d| !(d > 0.0 && d.is_finite())) {
        return Err(usage("--duration must be positive"));
    }
    let config = sources::load_config(args.config.as_deref())?;
    let (source, default_duration) = match &args.source {
        SourceSpec::Emulator => {
            let scenario = sources::load_scenario(&args.scenario, args.seed)?;
            let d = scenario.duration_s;
            (
                sources::open_emulator(&scenario, config, Pacing::from_speed(speed))?,
                Some(d),
            )
        }
        SourceSpec::Replay(path) => (sources::open_replay(path, speed)?, None),
    };
    let fs = source.config().fs();
    let duration = args.duration.or(default_duration);
    let opts = RigOptions {
        out_dir: (!args.no_record).then(|| args.out.clone()),
        stop_after_samples: duration.map(|d| (d * fs).round() as u64),
        operator_note: args.note.clone(),
        ..RigOptions::default()
    };
    let rig = Arc::new(Rig::spawn(source, opts));

    let interrupted = Arc::new(AtomicBool::new(false));
    {
        let flag = interrupted.clone();
        ctrlc::set_handler(move || flag.store(true, Ordering::SeqCst))?;
    }

    let server = match args.serve {
        Some(port) => {
            let port = if port == 0 { default_port() } else { port };
            let s = serve(rig.clone(), (args.bind.as_str(), port))?;
            log::info!(
                "serving on ws://{}/ (status at http://{}/status)",
                s.local_addr(),
                s.local_addr()
            );
            Some(s)
        }
        None => None,
    };

    if !args.idle {
        let r = rig.control(ControlMessage::Start);
        if let Some(e) = r.error {
            bail!("start failed: {}", e.message);
        }
    }

    let status = loop {
        if interrupted.load(Ordering::SeqCst) {
            if rig.status().is_some_and(|s| s.mode != Mode::Idle) {
                rig.control(ControlMessage::Stop);
            }
            break rig.status();
        }
        match rig.wait_until_idle(Some(Duration::from_millis(200))) {
            Some(s) if server.is_none() => break Some(s),
            Some(_) | None => {}
        }
    };
    drop(server);
    let status =
        status.ok_or_else(|| anyhow::anyhow!("acquisition worker stopped unexpectedly"))?;
    report(&status, args.json)?;
    rig.shutdown();
    if let Some(e) = &status.last_error {
        bail!("acquisition failed: {e}");
    }
    Ok(())
}

fn report(status: &StatusReport, json: bool) -> Result<()> {
    if json {
        println!("{}", serde_json::to_string_pretty(status)?);
        return Ok(());
    }
    match &status.recording {
        Some(p) => println!("{} samples recorded to {p}", status.samples_recorded),
        None => println!("{} samples processed", status.samples_processed),
    }
    println!(
        "{} artifact events, {} subscriber drops",
        status.events, status.dropped_total
    );
    Ok(())
}
