use super::ProtocolError;

pub const REGISTER_COUNT: usize = 24;

/// Register addresses.
pub mod addr {
    pub const ID: u8 = 0x00;
    pub const CONFIG1: u8 = 0x01;
    pub const CONFIG2: u8 = 0x02;
    pub const CONFIG3: u8 = 0x03;
    pub const LOFF: u8 = 0x04;
    pub const CH1SET: u8 = 0x05;
    pub const BIAS_SENSP: u8 = 0x0D;
    pub const BIAS_SENSN: u8 = 0x0E;
    pub const LOFF_SENSP: u8 = 0x0F;
    pub const LOFF_SENSN: u8 = 0x10;
    pub const LOFF_FLIP: u8 = 0x11;
    pub const LOFF_STATP: u8 = 0x12;
    pub const LOFF_STATN: u8 = 0x13;
    pub const GPIO: u8 = 0x14;
    pub const MISC1: u8 = 0x15;
    pub const MISC2: u8 = 0x16;
    pub const CONFIG4: u8 = 0x17;

    pub const fn chnset(ch: usize) -> u8 {
        CH1SET + ch as u8
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegisterSpec {
    pub addr: u8,
    pub name: &'static str,
    pub reset: u8,
    /// Bits set here are read-only or reserved: writes leave them unchanged.
    pub read_only: u8,
}

const fn reg(addr: u8, name: &'static str, reset: u8, read_only: u8) -> RegisterSpec {
    RegisterSpec {
        addr,
        name,
        reset,
        read_only,
    }
}

/// Register layout, reset values and reserved-bit masks.
pub const REGISTER_TABLE: [RegisterSpec; REGISTER_COUNT] = [
    reg(0x00, "ID", 0x3E, 0xFF),
    reg(0x01, "CONFIG1", 0x96, 0x98),
    reg(0x02, "CONFIG2", 0xC0, 0xE8),
    reg(0x03, "CONFIG3", 0x60, 0x61),
    reg(0x04, "LOFF", 0x00, 0x10),
    reg(0x05, "CH1SET", 0x61, 0x00),
    reg(0x06, "CH2SET", 0x61, 0x00),
    reg(0x07, "CH3SET", 0x61, 0x00),
    reg(0x08, "CH4SET", 0x61, 0x00),
    reg(0x09, "CH5SET", 0x61, 0x00),
    reg(0x0A, "CH6SET", 0x61, 0x00),
    reg(0x0B, "CH7SET", 0x61, 0x00),
    reg(0x0C, "CH8SET", 0x61, 0x00),
    reg(0x0D, "BIAS_SENSP", 0x00, 0x00),
    reg(0x0E, "BIAS_SENSN", 0x00, 0x00),
    reg(0x0F, "LOFF_SENSP", 0x00, 0x00),
    reg(0x10, "LOFF_SENSN", 0x00, 0x00),
    reg(0x11, "LOFF_FLIP", 0x00, 0x00),
    reg(0x12, "LOFF_STATP", 0x00, 0xFF),
    reg(0x13, "LOFF_STATN", 0x00, 0xFF),
    reg(0x14, "GPIO", 0x0F, 0x00),
    reg(0x15, "MISC1", 0x00, 0xDF),
    reg(0x16, "MISC2", 0x00, 0xFF),
    reg(0x17, "CONFIG4", 0x00, 0xF5),
];

/// Register file state of one device.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegisterMap {
    values: [u8; REGISTER_COUNT],
}

impl Default for RegisterMap {
    fn default() -> Self {
        let mut values = [0; REGISTER_COUNT];
        for spec in &REGISTER_TABLE {
            values[spec.addr as usize] = spec.reset;
        }
        RegisterMap { values }
    }
}

impl RegisterMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn reset(&mut self) {
        *self = Self::default();
    }

    pub fn spec(addr: u8) -> Result<&'static RegisterSpec, ProtocolError> {
        REGISTER_TABLE
            .get(addr as usize)
            .ok_or(ProtocolError::Range { addr, count: 1 })
    }

    pub fn read(&self, addr: u8) -> Result<u8, ProtocolError> {
        Self::spec(addr)?;
        Ok(self.values[addr as usize])
    }

    /// Host write: bits covered by the read-only mask keep their value.
    pub fn write(&mut self, addr: u8, value: u8) -> Result<(), ProtocolError> {
        let mask = Self::spec(addr)?.read_only;
        let slot = &mut self.values[addr as usize];
        *slot = (*slot & mask) | (value & !mask);
        Ok(())
    }

    pub fn read_range(&self, addr: u8, count: usize) -> Result<Vec<u8>, ProtocolError> {
        check(addr, count)?;
        Ok(self.values[addr as usize..addr as usize + count].to_vec())
    }

    pub fn write_range(&mut self, addr: u8, data: &[u8]) -> Result<(), ProtocolError> {
        check(addr, data.len())?;
        for (i, &v) in data.iter().enumerate() {
            self.write(addr + i as u8, v)?;
        }
        Ok(())
    }

    /// Device-side update that bypasses the host write mask (status registers).
    pub fn set_internal(&mut self, addr: u8, value: u8) {
        self.values[addr as usize] = value;
    }

    pub fn as_bytes(&self) -> &[u8; REGISTER_COUNT] {
        &self.values
    }
}

fn check(addr: u8, count: usize) -> Result<(), ProtocolError> {
    if count == 0 {
        return Err(ProtocolError::Count);
    }
    if addr as usize + count > REGISTER_COUNT {
        return Err(ProtocolError::Range { addr, count });
    }
    Ok(())
}
