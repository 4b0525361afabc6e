use std::f64::consts::PI;
use std::fmt::Write as _;

use super::scenario::{Scenario, ScenarioError, Steering};
use super::synth::Synthesizer;
use crate::protocol::{
    addr, encode_frame, Calibration, Command, ProtocolError, RegisterMap, SampleFrame, FRAME_LEN,
    SUPPORTED_GAINS,
};
use crate::source::Transport;
use crate::CHANNELS;

/// Impedance above which the lead-off comparator flags a channel.
pub const LEADOFF_DETECT_OHMS: f64 = 200e3;

const INTERNAL_VREF: f64 = 4.5;

/// One line of the SPI byte log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceEntry {
    /// Bytes clocked in on MOSI.
    Command(Vec<u8>),
    /// Register bytes or a single-shot frame returned on MISO.
    Response(Vec<u8>),
    /// A frame read in continuous mode.
    Frame(Vec<u8>),
}

impl TraceEntry {
    pub fn to_line(&self) -> String {
        let (tag, bytes) = match self {
            TraceEntry::Command(b) => (">", b),
            TraceEntry::Response(b) => ("<", b),
            TraceEntry::Frame(b) => ("F", b),
        };
        let mut line = String::from(tag);
        for b in bytes {
            let _ = write!(line, " {b:02x}");
        }
        line
    }
}

/// Virtual ADS1299 wired to a [`Synthesizer`].
///
/// State rules: RESET returns to command mode with reset registers; RDATAC
/// while already in RDATAC, RREG/WREG during RDATAC, START in standby and RDATA
/// outside a conversion are protocol-state errors. SDATAC outside RDATAC is a
/// no-op.
#[derive(Debug)]
pub struct EmulatedDevice {
    regs: RegisterMap,
    synth: Synthesizer,
    scenario: Scenario,
    fs: f64,
    awake: bool,
    converting: bool,
    continuous: bool,
    next_sample: u64,
    trace: Option<Vec<TraceEntry>>,
}

fn rate_of(config1: u8) -> f64 {
    match config1 & 0x07 {
        0 => 16000.0,
        1 => 8000.0,
        2 => 4000.0,
        3 => 2000.0,
        4 => 1000.0,
        5 => 500.0,
        _ => 250.0,
    }
}

impl EmulatedDevice {
    pub fn new(scenario: &Scenario) -> Result<Self, ScenarioError> {
        scenario.validate()?;
        let regs = RegisterMap::new();
        let fs = rate_of(regs.read(addr::CONFIG1).unwrap_or(0x96));
        Ok(EmulatedDevice {
            synth: Synthesizer::new(scenario, fs),
            scenario: scenario.clone(),
            regs,
            fs,
            awake: true,
            converting: false,
            continuous: false,
            next_sample: 0,
            trace: None,
        })
    }

    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(Vec::new);
    }

    pub fn take_trace(&mut self) -> Vec<TraceEntry> {
        self.trace.as_mut().map(std::mem::take).unwrap_or_default()
    }

    fn log(&mut self, entry: impl FnOnce() -> TraceEntry) {
        if let Some(t) = &mut self.trace {
            t.push(entry());
        }
    }

    pub fn registers(&self) -> &RegisterMap {
        &self.regs
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn is_converting(&self) -> bool {
        self.converting && self.awake
    }

    pub fn is_continuous(&self) -> bool {
        self.continuous
    }

    pub fn sample_rate(&self) -> f64 {
        self.fs
    }

    /// Index of the next conversion.
    pub fn sample_index(&self) -> u64 {
        self.next_sample
    }

    pub fn steer(&mut self, steering: &Steering) {
        if let Some(closed) = steering.eyes_closed {
            self.synth.set_eyes_closed(Some(closed));
        }
        if let Some(kind) = steering.trigger {
            self.synth.trigger(kind, self.next_sample);
        }
    }

    /// Execute exactly one encoded command, returning the MISO response bytes.
    pub fn command(&mut self, bytes: &[u8]) -> Result<Vec<u8>, ProtocolError> {
        let (cmd, used) = Command::decode(bytes)?;
        if used != bytes.len() {
            return Err(ProtocolError::Framing(bytes.len()));
        }
        self.log(|| TraceEntry::Command(bytes.to_vec()));
        let resp = self.execute(cmd)?;
        if !resp.is_empty() {
            self.log(|| TraceEntry::Response(resp.clone()));
        }
        Ok(resp)
    }

    fn execute(&mut self, cmd: Command) -> Result<Vec<u8>, ProtocolError> {
        let state = |m: &str| Err(ProtocolError::State(m.to_string()));
        match cmd {
            Command::Wakeup => self.awake = true,
            Command::Standby => self.awake = false,
            Command::Reset => {
                self.regs.reset();
                self.converting = false;
                self.continuous = false;
                self.next_sample = 0;
                self.rate_changed();
            }
            Command::Start => {
                if !self.awake {
                    return state("START while in standby");
                }
                self.converting = true;
            }
            Command::Stop => self.converting = false,
            Command::Rdatac => {
                if self.continuous {
                    return state("RDATAC while already in RDATAC");
                }
                self.continuous = true;
            }
            Command::Sdatac => self.continuous = false,
            Command::Rdata => {
                if self.continuous {
                    return state("RDATA during RDATAC");
                }
                if !self.is_converting() {
                    return state("RDATA with no conversion running");
                }
                return Ok(self.make_frame().to_vec());
            }
            Command::Rreg { addr, count } => {
                if self.continuous {
                    return state("RREG during RDATAC");
                }
                return self.regs.read_range(addr, count as usize);
            }
            Command::Wreg { addr, data } => {
                if self.continuous {
                    return state("WREG during RDATAC");
                }
                let old = self.regs.read(addr::CONFIG1)?;
                self.regs.write_range(addr, &data)?;
                if self.regs.read(addr::CONFIG1)? != old {
                    self.rate_changed();
                }
            }
        }
        Ok(Vec::new())
    }

    fn rate_changed(&mut self) {
        let fs = rate_of(self.regs.read(addr::CONFIG1).unwrap_or(0x96));
        if fs != self.fs {
            self.fs = fs;
            self.synth = Synthesizer::new(&self.scenario, fs);
        }
    }

    /// Next frame in continuous mode; `None` when stopped or not in RDATAC.
    pub fn read_frame(&mut self) -> Option<[u8; FRAME_LEN]> {
        if !(self.continuous && self.is_converting()) {
            return None;
        }
        let f = self.make_frame();
        self.log(|| TraceEntry::Frame(f.to_vec()));
        Some(f)
    }

    fn leadoff_drive(&self) -> (f64, Option<f64>) {
        let loff = self.regs.read(addr::LOFF).unwrap_or(0);
        let amps = match (loff >> 2) & 0b11 {
            0b00 => 6e-9,
            0b01 => 24e-9,
            0b10 => 6e-6,
            _ => 24e-6,
        };
        let freq = match loff & 0b11 {
            0b00 => None,
            0b01 => Some(7.8),
            0b10 => Some(31.2),
            _ => Some(self.fs / 4.0),
        };
        (amps, freq)
    }

    fn make_frame(&mut self) -> [u8; FRAME_LEN] {
        let n = self.next_sample;
        self.next_sample += 1;
        let t = n as f64 / self.fs;
        let sense = self.regs.read(addr::LOFF_SENSP).unwrap_or(0);
        let comparators = self.regs.read(addr::CONFIG4).unwrap_or(0) & 0x02 != 0;
        let (amps, freq) = self.leadoff_drive();
        let mut raw = [0i32; CHANNELS];
        let mut statp = 0u8;
        for (ch, r) in raw.iter_mut().enumerate() {
            let chset = self.regs.read(addr::chnset(ch)).unwrap_or(0x61);
            let z = self.scenario.impedance_ohms[ch];
            let sensed = sense & (1 << ch) != 0;
            if sensed && comparators && z > LEADOFF_DETECT_OHMS {
                statp |= 1 << ch;
            }
            if chset & 0x80 != 0 || chset & 0x07 != 0 {
                continue;
            }
            let mut uv = self.synth.microvolts(ch, n);
            if sensed {
                // The drive current is taken as peak-to-peak: V_pp = Z * I.
                let v = z * amps * 1e6;
                uv += match freq {
                    Some(f) => 0.5 * v * (2.0 * PI * f * t).sin(),
                    None => v,
                };
            }
            let gain = SUPPORTED_GAINS
                .get(((chset >> 4) & 0x07) as usize)
                .copied()
                .unwrap_or(24);
            *r = Calibration::new(gain as f64, INTERNAL_VREF).to_raw(uv);
        }
        let gpio = self.regs.read(addr::GPIO).unwrap_or(0x0F) >> 4;
        let frame = SampleFrame::new(statp, 0, gpio, raw, n);
        encode_frame(&frame).expect("codes are clamped to 24 bits")
    }
}

impl Transport for EmulatedDevice {
    fn command(&mut self, bytes: &[u8]) -> Result<Vec<u8>, ProtocolError> {
        EmulatedDevice::command(self, bytes)
    }

    fn read_data(&mut self, frames: usize, out: &mut Vec<u8>) -> Result<usize, ProtocolError> {
        let before = out.len();
        for _ in 0..frames {
            match self.read_frame() {
                Some(f) => out.extend_from_slice(&f),
                None => break,
            }
        }
        Ok(out.len() - before)
    }

    fn steer(&mut self, steering: &Steering) -> Result<(), ProtocolError> {
        EmulatedDevice::steer(self, steering);
        Ok(())
    }

    fn scenario(&self) -> Option<&Scenario> {
        Some(&self.scenario)
    }
}

/// Render a byte log one entry per line.
pub fn trace_to_text(entries: &[TraceEntry]) -> String {
    entries.iter().map(|e| e.to_line() + "\n").collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{decode_frame, DeviceConfig, ReferenceScheme};

    fn configured(scenario: &Scenario, cfg: &DeviceConfig) -> EmulatedDevice {
        let mut dev = EmulatedDevice::new(scenario).unwrap();
        let regs = cfg.to_registers().unwrap();
        let wreg = Command::Wreg {
            addr: 0x01,
            data: regs.read_range(0x01, 23).unwrap(),
        };
        dev.command(&wreg.encode().unwrap()).unwrap();
        dev
    }

    fn run(dev: &mut EmulatedDevice) {
        dev.command(&[0x08]).unwrap();
        dev.command(&[0x10]).unwrap();
    }

    #[test]
    fn reads_id_register() {
        let mut dev = EmulatedDevice::new(&Scenario::default()).unwrap();
        assert_eq!(dev.command(&[0x20, 0x00]).unwrap(), vec![0x3E]);
    }

    #[test]
    fn state_errors() {
        let mut dev = EmulatedDevice::new(&Scenario::default()).unwrap();
        assert!(dev.command(&[0x12]).is_err(), "RDATA before START");
        dev.command(&[0x10]).unwrap();
        assert!(matches!(dev.command(&[0x10]), Err(ProtocolError::State(_))));
        assert!(matches!(
            dev.command(&[0x20, 0x00]),
            Err(ProtocolError::State(_))
        ));
        dev.command(&[0x11]).unwrap();
        dev.command(&[0x11]).unwrap();
        dev.command(&[0x04]).unwrap();
        assert!(dev.command(&[0x08]).is_err(), "START in standby");
    }

    #[test]
    fn stop_means_no_frames() {
        let mut dev = configured(&Scenario::default(), &DeviceConfig::default());
        run(&mut dev);
        assert!(dev.read_frame().is_some());
        dev.command(&[0x0A]).unwrap();
        assert!(dev.read_frame().is_none());
        assert_eq!(dev.read_data(10, &mut Vec::new()).unwrap(), 0);
    }

    #[test]
    fn reset_registers_short_inputs() {
        let mut s = Scenario::default();
        s.noise.white_rms_uv = 20.0;
        let mut dev = EmulatedDevice::new(&s).unwrap();
        run(&mut dev);
        let f = decode_frame(&dev.read_frame().unwrap(), 0).unwrap();
        assert_eq!(f.raw, [0; 8]);
    }

    #[test]
    fn rdata_single_shot() {
        let mut dev = configured(&Scenario::default(), &DeviceConfig::default());
        dev.command(&[0x08]).unwrap();
        let bytes = dev.command(&[0x12]).unwrap();
        assert_eq!(bytes.len(), FRAME_LEN);
        assert_eq!(dev.sample_index(), 1);
    }

    #[test]
    fn leadoff_injection_amplitude() {
        let mut s = Scenario::default();
        s.impedance_ohms[2] = 10e3;
        let cfg = DeviceConfig::default().with_leadoff_channels(0b100);
        let mut dev = configured(&s, &cfg);
        run(&mut dev);
        let cal = Calibration::new(24.0, 4.5);
        let (mut lo, mut hi) = (f64::MAX, f64::MIN);
        for _ in 0..2500 {
            let f = decode_frame(&dev.read_frame().unwrap(), 0).unwrap();
            let v = cal.to_microvolts(f.raw[2]);
            lo = lo.min(v);
            hi = hi.max(v);
            assert_eq!(f.raw[1], 0);
        }
        // 10 kOhm * 24 nA = 240 uV peak-to-peak
        assert!((hi - lo - 240.0).abs() < 1.0, "pp {}", hi - lo);
    }

    #[test]
    fn leadoff_status_for_open_electrode() {
        let mut s = Scenario::default();
        s.impedance_ohms[5] = 1e6;
        let mut cfg = DeviceConfig::default().with_leadoff_channels(0xFF);
        cfg.reference = ReferenceScheme::BiasDriven;
        let mut dev = configured(&s, &cfg);
        run(&mut dev);
        let f = decode_frame(&dev.read_frame().unwrap(), 0).unwrap();
        assert_eq!(f.leadoff_positive(), 1 << 5);
    }

    #[test]
    fn sample_rate_follows_config1() {
        let cfg = DeviceConfig {
            sample_rate: 1000,
            ..DeviceConfig::default()
        };
        let dev = configured(&Scenario::default(), &cfg);
        assert_eq!(dev.sample_rate(), 1000.0);
    }
}
