use std::path::PathBuf;

use neurig_core::emulator::{trace_to_text, EmulatedDevice, Scenario};
use neurig_core::protocol::{addr, encode_command, Command, FRAME_LEN, REGISTER_COUNT};
use neurig_core::source::Transport;
use neurig_core::DeviceConfig;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

/// RESET, WREG config, START, RDATAC, N frames, SDATAC, STOP.
pub fn conformance_trace() -> String {
    let spec: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(fixtures().join("trace/conformance.json")).unwrap(),
    )
    .unwrap();
    let scenario: Scenario = serde_json::from_value(spec["scenario"].clone()).unwrap();
    let config: DeviceConfig = serde_json::from_value(spec["config"].clone()).unwrap();
    let frames = spec["frames"].as_u64().unwrap() as usize;

    let mut dev = EmulatedDevice::new(&scenario).unwrap();
    dev.enable_trace();
    let regs = config.to_registers().unwrap();
    let image = regs
        .read_range(addr::CONFIG1, REGISTER_COUNT - addr::CONFIG1 as usize)
        .unwrap();
    for cmd in [
        Command::Reset,
        Command::Wreg {
            addr: addr::CONFIG1,
            data: image,
        },
        Command::Start,
        Command::Rdatac,
    ] {
        dev.command(&encode_command(&cmd).unwrap()).unwrap();
    }
    let mut buf = Vec::new();
    assert_eq!(dev.read_data(frames, &mut buf).unwrap(), frames * FRAME_LEN);
    for cmd in [Command::Sdatac, Command::Stop] {
        dev.command(&encode_command(&cmd).unwrap()).unwrap();
    }
    trace_to_text(&dev.take_trace())
}
