use std::path::PathBuf;
use std::time::Duration;

use anyhow::{bail, Result};
use clap::Args;
use neurig_core::impedance::ImpedanceReading;
use neurig_core::server::{ControlMessage, Rig, RigOptions};
use neurig_core::source::Pacing;

use crate::sources;

#[derive(Debug, Args)]
pub struct ImpedanceArgs {
    /// `all` or a comma-separated list of electrode labels.
    #[arg(long, default_value = "all", value_delimiter = ',')]
    channel: Vec<String>,
    /// Emulator scenario: a JSON file or a built-in name.
    #[arg(long, default_value = "impedance-sweep")]
    scenario: String,
    /// Device configuration JSON; its lead-off current and frequency are used.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Capture length per check in seconds.
    #[arg(long, default_value_t = 4.0)]
    window: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    json: bool,
}

pub fn run(args: ImpedanceArgs) -> Result<()> {
    if !(args.window >= 1.0 && args.window.is_finite()) {
        return Err(crate::usage("--window must be at least 1 s"));
    }
    let scenario = sources::load_scenario(&args.scenario, args.seed)?;
    let config = sources::load_config(args.config.as_deref())?;
    let source = sources::open_emulator(&scenario, config, Pacing::Fast)?;
    let opts = RigOptions {
        impedance_window_s: args.window,
        ..RigOptions::default()
    };
    let montage = opts.montage.clone();
    montage
        .select(&args.channel)
        .map_err(|e| crate::usage(e.to_string()))?;
    let rig = Rig::spawn(source, opts);
    let r = rig.control(ControlMessage::Impedance {
        channels: args.channel.clone(),
    });
    if let Some(e) = r.error {
        bail!("impedance check failed: {}", e.message);
    }
    let status = rig
        .wait_until_idle(Some(Duration::from_secs(120)))
        .ok_or_else(|| anyhow::anyhow!("impedance check did not finish"))?;
    rig.shutdown();
    if let Some(e) = status.last_error {
        bail!("impedance check failed: {e}");
    }
    print_readings(&status.impedance, args.json)
}

fn print_readings(readings: &[ImpedanceReading], json: bool) -> Result<()> {
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(&serde_json::json!({ "readings": readings }))?
        );
        return Ok(());
    }
    println!(
        "{:<4} {:<6} {:>12} {:>9}  quality",
        "ch", "label", "ohms", "drive_hz"
    );
    for r in readings {
        println!(
            "{:<4} {:<6} {:>12.0} {:>9.1}  {}",
            r.channel,
            r.label,
            r.ohms,
            r.drive_hz,
            r.quality.as_str()
        );
    }
    Ok(())
}
