use serde::{Deserialize, Serialize};

use super::registers::addr;
use super::{ProtocolError, RegisterMap};
use crate::CHANNELS;

pub const SUPPORTED_SAMPLE_RATES: [u32; 4] = [250, 500, 1000, 2000];
pub const SUPPORTED_GAINS: [u8; 7] = [1, 2, 4, 6, 8, 12, 24];

/// Channel input multiplexer setting (CHnSET MUX[2:0]).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputMux {
    Normal,
    Shorted,
    BiasMeasure,
    Supply,
    Temperature,
    TestSignal,
    BiasDrp,
    BiasDrn,
}

impl InputMux {
    fn bits(self) -> u8 {
        self as u8
    }

    fn from_bits(b: u8) -> Self {
        match b & 0x07 {
            0 => InputMux::Normal,
            1 => InputMux::Shorted,
            2 => InputMux::BiasMeasure,
            3 => InputMux::Supply,
            4 => InputMux::Temperature,
            5 => InputMux::TestSignal,
            6 => InputMux::BiasDrp,
            _ => InputMux::BiasDrn,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub enabled: bool,
    pub input_mux: InputMux,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            enabled: true,
            input_mux: InputMux::Normal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LeadOffCurrent {
    #[serde(rename = "6nA")]
    Nano6,
    #[serde(rename = "24nA")]
    Nano24,
}

impl LeadOffCurrent {
    pub fn amps(self) -> f64 {
        match self {
            LeadOffCurrent::Nano6 => 6e-9,
            LeadOffCurrent::Nano24 => 24e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LeadOffFrequency {
    #[serde(rename = "dc")]
    Dc,
    #[serde(rename = "7.8Hz")]
    Ac7_8,
    #[serde(rename = "31.2Hz")]
    Ac31_2,
}

impl LeadOffFrequency {
    /// Drive frequency in Hz, `None` for DC.
    pub fn hz(self) -> Option<f64> {
        match self {
            LeadOffFrequency::Dc => None,
            LeadOffFrequency::Ac7_8 => Some(7.8),
            LeadOffFrequency::Ac31_2 => Some(31.2),
        }
    }
}

/// Lead-off current drive. `channels` is a bit mask of positive inputs with
/// sensing (and therefore injection) enabled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LeadOffConfig {
    pub current: LeadOffCurrent,
    pub frequency: LeadOffFrequency,
    pub channels: u8,
}

impl Default for LeadOffConfig {
    fn default() -> Self {
        LeadOffConfig {
            current: LeadOffCurrent::Nano24,
            frequency: LeadOffFrequency::Ac31_2,
            channels: 0,
        }
    }
}

impl LeadOffConfig {
    pub fn is_enabled(&self, ch: usize) -> bool {
        self.channels & (1 << ch) != 0
    }
}

/// How the negative inputs are referenced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceScheme {
    /// Shared reference electrode on SRB1, bias drive off.
    CommonReference,
    /// Shared reference on SRB1 plus driven bias electrode.
    BiasDriven,
}

/// Analog front-end settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeviceConfig {
    pub sample_rate: u32,
    pub gain: u8,
    /// Reference voltage in volts.
    pub vref: f64,
    pub channels: [ChannelConfig; CHANNELS],
    pub leadoff: LeadOffConfig,
    pub reference: ReferenceScheme,
}

impl Default for DeviceConfig {
    fn default() -> Self {
        DeviceConfig {
            sample_rate: 250,
            gain: 24,
            vref: 4.5,
            channels: [ChannelConfig::default(); CHANNELS],
            leadoff: LeadOffConfig::default(),
            reference: ReferenceScheme::CommonReference,
        }
    }
}

fn dr_bits(rate: u32) -> Option<u8> {
    match rate {
        2000 => Some(0b011),
        1000 => Some(0b100),
        500 => Some(0b101),
        250 => Some(0b110),
        _ => None,
    }
}

fn rate_from_bits(bits: u8) -> Option<u32> {
    match bits & 0x07 {
        0b011 => Some(2000),
        0b100 => Some(1000),
        0b101 => Some(500),
        0b110 => Some(250),
        _ => None,
    }
}

fn gain_bits(gain: u8) -> Option<u8> {
    SUPPORTED_GAINS
        .iter()
        .position(|&g| g == gain)
        .map(|i| i as u8)
}

fn gain_from_bits(bits: u8) -> Option<u8> {
    SUPPORTED_GAINS.get((bits & 0x07) as usize).copied()
}

impl DeviceConfig {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        if dr_bits(self.sample_rate).is_none() {
            return Err(ProtocolError::InvalidConfig(format!(
                "sample rate {} not in {SUPPORTED_SAMPLE_RATES:?}",
                self.sample_rate
            )));
        }
        if gain_bits(self.gain).is_none() {
            return Err(ProtocolError::InvalidConfig(format!(
                "gain {} not in {SUPPORTED_GAINS:?}",
                self.gain
            )));
        }
        if !(self.vref.is_finite() && self.vref > 0.0) {
            return Err(ProtocolError::InvalidConfig(format!(
                "vref must be positive, got {}",
                self.vref
            )));
        }
        Ok(())
    }

    pub fn fs(&self) -> f64 {
        self.sample_rate as f64
    }

    /// Same configuration with lead-off injection on `channels` (bit mask).
    pub fn with_leadoff_channels(&self, channels: u8) -> DeviceConfig {
        let mut cfg = self.clone();
        cfg.leadoff.channels = channels;
        cfg
    }

    /// Register image for this configuration. The ID register keeps its reset value.
    pub fn to_registers(&self) -> Result<RegisterMap, ProtocolError> {
        self.validate()?;
        let mut regs = RegisterMap::new();
        let dr = dr_bits(self.sample_rate).unwrap_or(0b110);
        let gain = gain_bits(self.gain).unwrap_or(0b110);
        regs.write(addr::CONFIG1, 0x90 | dr)?;
        regs.write(addr::CONFIG2, 0xC0)?;
        let bias = match self.reference {
            ReferenceScheme::CommonReference => 0x00,
            ReferenceScheme::BiasDriven => 0x0C,
        };
        regs.write(addr::CONFIG3, 0xE0 | bias)?;
        let ilead = match self.leadoff.current {
            LeadOffCurrent::Nano6 => 0b00,
            LeadOffCurrent::Nano24 => 0b01,
        };
        let flead = match self.leadoff.frequency {
            LeadOffFrequency::Dc => 0b00,
            LeadOffFrequency::Ac7_8 => 0b01,
            LeadOffFrequency::Ac31_2 => 0b10,
        };
        regs.write(addr::LOFF, (ilead << 2) | flead)?;
        let mut enabled_mask = 0u8;
        for (ch, c) in self.channels.iter().enumerate() {
            let pd = if c.enabled { 0 } else { 0x80 };
            if c.enabled {
                enabled_mask |= 1 << ch;
            }
            regs.write(addr::chnset(ch), pd | (gain << 4) | c.input_mux.bits())?;
        }
        let bias_sense = match self.reference {
            ReferenceScheme::CommonReference => 0,
            ReferenceScheme::BiasDriven => enabled_mask,
        };
        regs.write(addr::BIAS_SENSP, bias_sense)?;
        regs.write(addr::BIAS_SENSN, bias_sense)?;
        regs.write(addr::LOFF_SENSP, self.leadoff.channels)?;
        regs.write(addr::LOFF_SENSN, 0)?;
        regs.write(addr::LOFF_FLIP, 0)?;
        regs.write(addr::MISC1, 0x20)?;
        regs.write(
            addr::CONFIG4,
            if self.leadoff.channels != 0 {
                0x02
            } else {
                0x00
            },
        )?;
        Ok(regs)
    }

    pub fn from_registers(regs: &RegisterMap) -> Result<DeviceConfig, ProtocolError> {
        let r = |a| regs.read(a);
        let sample_rate = rate_from_bits(r(addr::CONFIG1)?).ok_or_else(|| {
            ProtocolError::InvalidConfig("CONFIG1 data rate outside supported set".into())
        })?;
        let mut gain = None;
        let mut channels = [ChannelConfig::default(); CHANNELS];
        for (ch, c) in channels.iter_mut().enumerate() {
            let v = r(addr::chnset(ch))?;
            let g = gain_from_bits(v >> 4).ok_or_else(|| {
                ProtocolError::InvalidConfig(format!("CH{}SET gain code reserved", ch + 1))
            })?;
            match gain {
                None => gain = Some(g),
                Some(prev) if prev != g => {
                    return Err(ProtocolError::InvalidConfig(
                        "mixed per-channel gains are not supported".into(),
                    ))
                }
                _ => {}
            }
            c.enabled = v & 0x80 == 0;
            c.input_mux = InputMux::from_bits(v);
        }
        let loff = r(addr::LOFF)?;
        let current = match (loff >> 2) & 0b11 {
            0b00 => LeadOffCurrent::Nano6,
            0b01 => LeadOffCurrent::Nano24,
            _ => {
                return Err(ProtocolError::InvalidConfig(
                    "microamp lead-off currents are not supported".into(),
                ))
            }
        };
        let frequency = match loff & 0b11 {
            0b00 => LeadOffFrequency::Dc,
            0b01 => LeadOffFrequency::Ac7_8,
            0b10 => LeadOffFrequency::Ac31_2,
            _ => {
                return Err(ProtocolError::InvalidConfig(
                    "fDR/4 lead-off frequency is not supported".into(),
                ))
            }
        };
        let reference = if r(addr::CONFIG3)? & 0x04 != 0 {
            ReferenceScheme::BiasDriven
        } else {
            ReferenceScheme::CommonReference
        };
        Ok(DeviceConfig {
            sample_rate,
            gain: gain.unwrap_or(24),
            vref: 4.5,
            channels,
            leadoff: LeadOffConfig {
                current,
                frequency,
                channels: r(addr::LOFF_SENSP)?,
            },
            reference,
        })
    }
}
