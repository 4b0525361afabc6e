use super::{ProtocolError, REGISTER_COUNT};

/// SPI opcodes understood by the part.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Command {
    Wakeup,
    Standby,
    Reset,
    Start,
    Stop,
    /// Read data continuous.
    Rdatac,
    /// Stop read data continuous.
    Sdatac,
    /// Read a single conversion.
    Rdata,
    /// Read `count` registers starting at `addr`.
    Rreg {
        addr: u8,
        count: u8,
    },
    /// Write `data` into consecutive registers starting at `addr`.
    Wreg {
        addr: u8,
        data: Vec<u8>,
    },
}

const WAKEUP: u8 = 0x02;
const STANDBY: u8 = 0x04;
const RESET: u8 = 0x06;
const START: u8 = 0x08;
const STOP: u8 = 0x0A;
const RDATAC: u8 = 0x10;
const SDATAC: u8 = 0x11;
const RDATA: u8 = 0x12;
const RREG: u8 = 0x20;
const WREG: u8 = 0x40;

fn check_range(addr: u8, count: usize) -> Result<(), ProtocolError> {
    if count == 0 {
        return Err(ProtocolError::Count);
    }
    if addr as usize + count > REGISTER_COUNT {
        return Err(ProtocolError::Range { addr, count });
    }
    Ok(())
}

impl Command {
    pub fn encode(&self) -> Result<Vec<u8>, ProtocolError> {
        Ok(match self {
            Command::Wakeup => vec![WAKEUP],
            Command::Standby => vec![STANDBY],
            Command::Reset => vec![RESET],
            Command::Start => vec![START],
            Command::Stop => vec![STOP],
            Command::Rdatac => vec![RDATAC],
            Command::Sdatac => vec![SDATAC],
            Command::Rdata => vec![RDATA],
            Command::Rreg { addr, count } => {
                check_range(*addr, *count as usize)?;
                vec![RREG | addr, count - 1]
            }
            Command::Wreg { addr, data } => {
                check_range(*addr, data.len())?;
                let mut out = Vec::with_capacity(2 + data.len());
                out.push(WREG | addr);
                out.push(data.len() as u8 - 1);
                out.extend_from_slice(data);
                out
            }
        })
    }

    /// Parse one command from the front of `bytes`, returning it with the
    /// number of bytes consumed.
    pub fn decode(bytes: &[u8]) -> Result<(Command, usize), ProtocolError> {
        let op = *bytes.first().ok_or(ProtocolError::Truncated)?;
        let simple = match op {
            WAKEUP => Some(Command::Wakeup),
            STANDBY => Some(Command::Standby),
            RESET => Some(Command::Reset),
            START => Some(Command::Start),
            STOP => Some(Command::Stop),
            RDATAC => Some(Command::Rdatac),
            SDATAC => Some(Command::Sdatac),
            RDATA => Some(Command::Rdata),
            _ => None,
        };
        if let Some(cmd) = simple {
            return Ok((cmd, 1));
        }
        if !matches!(op & 0xE0, RREG | WREG) {
            return Err(ProtocolError::UnknownOpcode(op));
        }
        let addr = op & 0x1F;
        let count = *bytes.get(1).ok_or(ProtocolError::Truncated)? as usize + 1;
        match op & 0xE0 {
            RREG => {
                check_range(addr, count)?;
                Ok((
                    Command::Rreg {
                        addr,
                        count: count as u8,
                    },
                    2,
                ))
            }
            WREG => {
                check_range(addr, count)?;
                let data = bytes.get(2..2 + count).ok_or(ProtocolError::Truncated)?;
                Ok((
                    Command::Wreg {
                        addr,
                        data: data.to_vec(),
                    },
                    2 + count,
                ))
            }
            _ => Err(ProtocolError::UnknownOpcode(op)),
        }
    }
}

pub fn encode_command(cmd: &Command) -> Result<Vec<u8>, ProtocolError> {
    cmd.encode()
}
