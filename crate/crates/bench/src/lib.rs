//! Deterministic inputs shared by the benchmarks.

use neurig_core::emulator::{builtin_scenario, EmulatedDevice};
use neurig_core::protocol::{encode_frame, SampleFrame, FRAME_LEN};
use neurig_core::source::{DeviceSource, Pacing};
use neurig_core::{DeviceConfig, SignalChunk, CHANNELS};

/// `n` encoded frames with a simple ramp in every channel.
pub fn frame_stream(n: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(n * FRAME_LEN);
    for i in 0..n {
        let raw: [i32; CHANNELS] =
            std::array::from_fn(|ch| ((i * 131 + ch * 7919) % 16_000_000) as i32 - 8_000_000);
        let f = SampleFrame::new(0, 0, 0, raw, i as u64);
        out.extend_from_slice(&encode_frame(&f).expect("in range"));
    }
    out
}

/// `len` samples of the alpha scenario starting at sample 0.
pub fn alpha_chunk(len: usize) -> SignalChunk {
    use neurig_core::source::SampleSource;
    let scenario = builtin_scenario("alpha-test").expect("built in");
    let dev = EmulatedDevice::new(&scenario).expect("valid scenario");
    let mut src =
        DeviceSource::open(dev, DeviceConfig::default(), Pacing::Fast).expect("emulator opens");
    src.start().expect("start");
    let mut parts = Vec::new();
    let mut got = 0;
    while got < len {
        let c = src
            .read_chunk(len - got)
            .expect("read")
            .expect("emulator never ends");
        got += c.len();
        parts.push(c);
    }
    SignalChunk::concat(&parts).expect("non-empty")
}
