use super::{design_bandpass, DspError, FilterSpec, FilterState};
use crate::signal::SignalChunk;

/// Leading span of each window discarded while the band filter settles.
pub const SETTLE_S: f64 = 0.5;
pub const BAND_POWER_ORDER: usize = 4;

pub fn mean_square(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

/// Mean square (µV²) per channel of the band-filtered window, excluding the
/// first [`SETTLE_S`] seconds. The window must span at least one second.
pub fn band_power(window: &SignalChunk, band: (f64, f64)) -> Result<Vec<f64>, DspError> {
    let needed = window.fs.round() as usize;
    if window.len() < needed {
        return Err(DspError::TooShort {
            needed,
            got: window.len(),
        });
    }
    let spec = FilterSpec::bandpass(band.0, band.1, BAND_POWER_ORDER, window.fs);
    let mut state = FilterState::new(design_bandpass(&spec)?, 1);
    let skip = (SETTLE_S * window.fs).round() as usize;
    let mut buf = Vec::with_capacity(window.len());
    Ok(window
        .data
        .iter()
        .map(|ch| {
            state.reset();
            buf.clear();
            buf.extend_from_slice(ch);
            state.process_channel(0, &mut buf);
            mean_square(&buf[skip..])
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tone(f: f64, amp: f64, n: usize) -> SignalChunk {
        let x = (0..n)
            .map(|i| amp * (2.0 * PI * f * i as f64 / 250.0).sin())
            .collect();
        SignalChunk::from_channels(0, 250.0, vec![x])
    }

    #[test]
    fn alpha_sine_power() {
        let p = band_power(&tone(10.0, 50.0, 500), (8.0, 12.0)).unwrap()[0];
        assert!((p / 1250.0 - 1.0).abs() < 0.05, "{p}");
    }

    #[test]
    fn out_of_band_sine() {
        let w = tone(20.0, 50.0, 500);
        let p = band_power(&w, (8.0, 12.0)).unwrap()[0];
        assert!(p < 0.01 * mean_square(w.channel(0)), "{p}");
    }

    #[test]
    fn zero_and_short() {
        assert_eq!(
            band_power(&tone(10.0, 0.0, 250), (8.0, 12.0)).unwrap(),
            vec![0.0]
        );
        assert!(matches!(
            band_power(&tone(10.0, 1.0, 249), (8.0, 12.0)),
            Err(DspError::TooShort { .. })
        ));
    }
}
