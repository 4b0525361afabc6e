use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use super::DspError;
use crate::signal::SignalChunk;

/// Centre-frequency parameter of the complex Morlet wavelet.
pub const MORLET_W0: f64 = 6.0;
const TRUNCATE_SIGMAS: f64 = 4.0;

/// Magnitude of the complex Morlet transform, frequency × time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scalogram {
    pub freqs_hz: Vec<f64>,
    /// Absolute sample index of each column.
    pub times: Vec<u64>,
    pub fs: f64,
    pub magnitude: Vec<Vec<f64>>,
    /// Per frequency: samples at each edge inside the cone of influence.
    pub coi: Vec<usize>,
}

impl Scalogram {
    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    pub fn is_valid(&self, fi: usize, ti: usize) -> bool {
        let e = self.coi[fi];
        ti >= e && ti + e < self.times.len()
    }

    /// Frequency with the largest valid magnitude at column `ti`.
    pub fn argmax_freq(&self, ti: usize) -> Option<f64> {
        (0..self.freqs_hz.len())
            .filter(|&fi| self.is_valid(fi, ti))
            .max_by(|&a, &b| self.magnitude[a][ti].total_cmp(&self.magnitude[b][ti]))
            .map(|fi| self.freqs_hz[fi])
    }

    /// Mean magnitude per frequency over the valid columns in `[from, to)`.
    pub fn mean_magnitude(&self, from: usize, to: usize) -> Vec<f64> {
        (0..self.freqs_hz.len())
            .map(|fi| {
                let vals: Vec<f64> = (from..to.min(self.n_times()))
                    .filter(|&ti| self.is_valid(fi, ti))
                    .map(|ti| self.magnitude[fi][ti])
                    .collect();
                if vals.is_empty() {
                    0.0
                } else {
                    vals.iter().sum::<f64>() / vals.len() as f64
                }
            })
            .collect()
    }

    /// Frequency maximising [`Scalogram::mean_magnitude`] over `[from, to)`.
    pub fn peak_frequency(&self, from: usize, to: usize) -> Option<f64> {
        let m = self.mean_magnitude(from, to);
        m.iter()
            .enumerate()
            .filter(|(_, v)| **v > 0.0)
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| self.freqs_hz[i])
    }
}

/// Inclusive grid `lo, lo+step, ..., hi`.
pub fn freq_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| lo + i as f64 * step).collect()
}

fn kernel(f: f64, fs: f64) -> (Vec<Complex64>, f64) {
    let sigma_t = MORLET_W0 / (2.0 * PI * f);
    let half = (TRUNCATE_SIGMAS * sigma_t * fs).ceil() as i64;
    let mut k = Vec::with_capacity(2 * half as usize + 1);
    let mut gsum = 0.0;
    for m in -half..=half {
        let t = m as f64 / fs;
        let g = (-t * t / (2.0 * sigma_t * sigma_t)).exp();
        gsum += g;
        k.push(Complex64::from_polar(g, 2.0 * PI * f * t));
    }
    let norm = 2.0 / gsum;
    for v in &mut k {
        *v *= norm;
    }
    (k, sigma_t)
}

/// Complex Morlet (ω₀ = 6) scalogram of one sequence. A unit sinusoid at an
/// analysis frequency has magnitude 1 away from the edges.
pub fn cwt_morlet(x: &[f64], fs: f64, start: u64, freqs_hz: &[f64]) -> Result<Scalogram, DspError> {
    if freqs_hz.is_empty() {
        return Err(DspError::Range("empty frequency grid".into()));
    }
    if let Some(f) = freqs_hz.iter().find(|&&f| !(f > 0.0 && f < fs / 2.0)) {
        return Err(DspError::Range(format!(
            "frequency {f} Hz outside (0, {})",
            fs / 2.0
        )));
    }
    let lowest = freqs_hz.iter().copied().fold(f64::INFINITY, f64::min);
    let needed = (2.0 * fs / lowest).ceil() as usize;
    if x.len() < needed {
        return Err(DspError::TooShort {
            needed,
            got: x.len(),
        });
    }
    let n = x.len();
    let longest = 2 * (TRUNCATE_SIGMAS * MORLET_W0 / (2.0 * PI * lowest) * fs).ceil() as usize + 1;
    let len = (n + longest - 1).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);
    let mut xs: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    xs.resize(len, Complex64::new(0.0, 0.0));
    fwd.process(&mut xs);

    let mut magnitude = Vec::with_capacity(freqs_hz.len());
    let mut coi = Vec::with_capacity(freqs_hz.len());
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    for &f in freqs_hz {
        let (k, sigma_t) = kernel(f, fs);
        let half = k.len() / 2;
        buf.fill(Complex64::new(0.0, 0.0));
        buf[..k.len()].copy_from_slice(&k);
        fwd.process(&mut buf);
        for (b, xv) in buf.iter_mut().zip(&xs) {
            *b *= xv;
        }
        inv.process(&mut buf);
        let scale = 1.0 / len as f64;
        magnitude.push(
            buf[half..half + n]
                .iter()
                .map(|v| v.norm() * scale)
                .collect(),
        );
        coi.push(((2.0f64.sqrt() * sigma_t * fs).ceil() as usize).min(n));
    }
    Ok(Scalogram {
        freqs_hz: freqs_hz.to_vec(),
        times: (start..start + n as u64).collect(),
        fs,
        magnitude,
        coi,
    })
}

pub fn cwt_chunk(
    window: &SignalChunk,
    channel: usize,
    freqs_hz: &[f64],
) -> Result<Scalogram, DspError> {
    if channel >= window.n_channels() {
        return Err(DspError::Shape {
            expected: channel + 1,
            got: window.n_channels(),
        });
    }
    cwt_morlet(window.channel(channel), window.fs, window.start, freqs_hz)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tones(parts: &[(f64, f64)], n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| {
                let t = i as f64 / 250.0;
                parts
                    .iter()
                    .map(|(f, a)| a * (2.0 * PI * f * t).sin())
                    .sum()
            })
            .collect()
    }

    /// Direct (non-FFT) evaluation of one coefficient.
    fn direct(x: &[f64], f: f64, t: usize) -> f64 {
        let (k, _) = kernel(f, 250.0);
        let half = (k.len() / 2) as i64;
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, kv) in k.iter().enumerate() {
            let idx = t as i64 - (j as i64 - half);
            if (0..x.len() as i64).contains(&idx) {
                acc += kv * x[idx as usize];
            }
        }
        acc.norm()
    }

    #[test]
    fn unit_sine_has_unit_magnitude() {
        let grid = freq_grid(1.0, 40.0, 0.5);
        let x = tones(&[(10.0, 1.0)], 2000);
        let s = cwt_morlet(&x, 250.0, 0, &grid).unwrap();
        let fi = grid.iter().position(|&f| f == 10.0).unwrap();
        assert!((s.magnitude[fi][1000] - 1.0).abs() < 0.05);
        assert_eq!(s.argmax_freq(1000), Some(10.0));
        assert!((s.magnitude[fi][1000] - direct(&x, 10.0, 1000)).abs() < 1e-9);
    }

    #[test]
    fn pure_tones_peak_within_grid_step() {
        let grid = freq_grid(1.0, 40.0, 0.5);
        for f in [2.0, 4.5, 7.0, 10.0, 13.5, 20.0, 31.0, 40.0] {
            let x = tones(&[(f, 1.0)], 2500);
            let s = cwt_morlet(&x, 250.0, 0, &grid).unwrap();
            let got = s.argmax_freq(1250).unwrap();
            assert!((got - f).abs() <= 0.5, "{f}: {got}");
        }
    }

    #[test]
    fn two_tones_two_maxima() {
        let grid = freq_grid(1.0, 40.0, 0.5);
        let x = tones(&[(10.0, 1.0), (30.0, 1.0)], 2000);
        let s = cwt_morlet(&x, 250.0, 0, &grid).unwrap();
        let col: Vec<f64> = (0..grid.len()).map(|fi| s.magnitude[fi][1000]).collect();
        let peaks: Vec<f64> = (1..col.len() - 1)
            .filter(|&i| col[i] > col[i - 1] && col[i] >= col[i + 1] && col[i] > 0.5)
            .map(|i| grid[i])
            .collect();
        assert_eq!(peaks.len(), 2, "{peaks:?}");
        assert!((peaks[0] - 10.0).abs() <= 0.5 && (peaks[1] - 30.0).abs() <= 0.5);
    }

    #[test]
    fn zero_input_and_errors() {
        let s = cwt_morlet(&[0.0; 500], 250.0, 7, &[5.0, 10.0]).unwrap();
        assert!(s.magnitude.iter().flatten().all(|&v| v == 0.0));
        assert_eq!(s.times[0], 7);
        assert!(cwt_morlet(&[0.0; 500], 250.0, 0, &[125.0]).is_err());
        assert!(cwt_morlet(&[0.0; 500], 250.0, 0, &[0.0]).is_err());
        assert!(cwt_morlet(&[0.0; 100], 250.0, 0, &[1.0]).is_err());
    }

    #[test]
    fn cone_of_influence_marks_edges() {
        let s = cwt_morlet(&[0.0; 1000], 250.0, 0, &[2.0]).unwrap();
        assert!(!s.is_valid(0, 0));
        assert!(s.is_valid(0, 500));
        assert_eq!(s.argmax_freq(0), None);
    }
}
