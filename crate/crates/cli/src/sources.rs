use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use neurig_core::emulator::{builtin_scenario, EmulatedDevice, Scenario};
use neurig_core::session::{latest_session, ReplaySource};
use neurig_core::source::{DeviceSource, Pacing, SampleSource};
use neurig_core::DeviceConfig;

use crate::usage;

#[derive(Debug, Clone, PartialEq)]
pub enum SourceSpec {
    Emulator,
    Replay(PathBuf),
}

pub fn parse_source(s: &str) -> Result<SourceSpec, String> {
    match s.split_once(':') {
        None if s == "emu" => Ok(SourceSpec::Emulator),
        Some(("replay", path)) if !path.is_empty() => Ok(SourceSpec::Replay(PathBuf::from(path))),
        _ => Err(format!("expected `emu` or `replay:<file>`, got `{s}`")),
    }
}

/// A scenario file path, or the name of a built-in scenario.
pub fn load_scenario(arg: &str, seed: Option<u64>) -> Result<Scenario> {
    let path = Path::new(arg);
    let mut scenario = if path.is_file() {
        Scenario::load(path).with_context(|| format!("loading scenario {arg}"))?
    } else {
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or(arg);
        builtin_scenario(name).ok_or_else(|| usage(format!("scenario file not found: {arg}")))?
    };
    if let Some(seed) = seed {
        scenario.seed = seed;
    }
    Ok(scenario)
}

pub fn load_config(arg: Option<&Path>) -> Result<DeviceConfig> {
    let Some(path) = arg else {
        return Ok(DeviceConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| usage(format!("config file {}: {e}", path.display())))?;
    let cfg: DeviceConfig = serde_json::from_str(&text)
        .map_err(|e| usage(format!("config file {}: {e}", path.display())))?;
    cfg.validate()
        .map_err(|e| usage(format!("config file {}: {e}", path.display())))?;
    Ok(cfg)
}

pub fn session_path(arg: &Path) -> Result<PathBuf> {
    if !arg.exists() {
        return Err(usage(format!("session not found: {}", arg.display())));
    }
    Ok(latest_session(arg)?)
}

pub fn open_emulator(
    scenario: &Scenario,
    config: DeviceConfig,
    pacing: Pacing,
) -> Result<Box<dyn SampleSource>> {
    let dev = EmulatedDevice::new(scenario)?;
    Ok(Box::new(DeviceSource::open(dev, config, pacing)?))
}

pub fn open_replay(path: &Path, speed: f64) -> Result<Box<dyn SampleSource>> {
    let path = session_path(path)?;
    Ok(Box::new(
        ReplaySource::open(&path, speed).with_context(|| format!("opening {}", path.display()))?,
    ))
}
