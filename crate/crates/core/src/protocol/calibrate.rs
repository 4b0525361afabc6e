/// Largest positive 24-bit code, also the full-scale denominator.
pub const MAX_CODE: i32 = 8_388_607;
pub const MIN_CODE: i32 = -8_388_608;

/// Input-referred full scale in microvolts: `vref / gain`.
pub fn full_scale_microvolts(gain: f64, vref: f64) -> f64 {
    vref / gain * 1e6
}

/// `raw * (vref / gain) / (2^23 - 1)`, in microvolts.
pub fn raw_to_microvolts(raw: i32, gain: f64, vref: f64) -> f64 {
    raw as f64 * full_scale_microvolts(gain, vref) / MAX_CODE as f64
}

/// Nearest code for `uv`, clamped to the 24-bit range.
pub fn microvolts_to_raw(uv: f64, gain: f64, vref: f64) -> i32 {
    let code = (uv * MAX_CODE as f64 / full_scale_microvolts(gain, vref)).round();
    code.clamp(MIN_CODE as f64, MAX_CODE as f64) as i32
}

/// Precomputed conversion for a fixed gain and reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    full_scale_uv: f64,
}

impl Calibration {
    pub fn new(gain: f64, vref: f64) -> Self {
        Calibration {
            full_scale_uv: full_scale_microvolts(gain, vref),
        }
    }

    pub fn to_microvolts(&self, raw: i32) -> f64 {
        raw as f64 * self.full_scale_uv / MAX_CODE as f64
    }

    pub fn to_raw(&self, uv: f64) -> i32 {
        let code = (uv * MAX_CODE as f64 / self.full_scale_uv).round();
        code.clamp(MIN_CODE as f64, MAX_CODE as f64) as i32
    }

    /// Size of one code step in microvolts.
    pub fn lsb_microvolts(&self) -> f64 {
        self.full_scale_uv / MAX_CODE as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn known_values() {
        assert_eq!(raw_to_microvolts(0, 24.0, 4.5), 0.0);
        assert_eq!(raw_to_microvolts(MAX_CODE, 24.0, 4.5), 187_500.0);
        // -8388608 * 187500 / 8388607, evaluated in exact rational arithmetic
        assert_eq!(
            raw_to_microvolts(MIN_CODE, 24.0, 4.5),
            -187_500.022_351_744_47
        );
        let lsb = Calibration::new(24.0, 4.5).lsb_microvolts();
        assert!((lsb - 0.022_351_744_455_307_063).abs() < 1e-18);
    }

    #[test]
    fn inverse_clamps() {
        assert_eq!(microvolts_to_raw(1e9, 24.0, 4.5), MAX_CODE);
        assert_eq!(microvolts_to_raw(-1e9, 24.0, 4.5), MIN_CODE);
        assert_eq!(microvolts_to_raw(0.01, 24.0, 4.5), 0);
        assert_eq!(microvolts_to_raw(0.0112, 24.0, 4.5), 1);
    }

    proptest! {
        #[test]
        fn inverse_identity(raw in MIN_CODE..=MAX_CODE, gi in 0usize..7) {
            let gain = super::super::SUPPORTED_GAINS[gi] as f64;
            prop_assert_eq!(microvolts_to_raw(raw_to_microvolts(raw, gain, 4.5), gain, 4.5), raw);
            let cal = Calibration::new(gain, 4.5);
            prop_assert_eq!(cal.to_microvolts(raw), raw_to_microvolts(raw, gain, 4.5));
        }

        #[test]
        fn monotonic(raw in MIN_CODE..MAX_CODE) {
            prop_assert!(raw_to_microvolts(raw + 1, 24.0, 4.5) > raw_to_microvolts(raw, 24.0, 4.5));
        }
    }
}
