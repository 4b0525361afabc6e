use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::DspError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    Bandpass,
    Notch,
}

/// Butterworth band design. `order` is the order of the whole bandpass
/// (or bandstop), so it yields `order / 2` biquads.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub kind: FilterKind,
    pub low_hz: f64,
    pub high_hz: f64,
    pub order: usize,
    pub fs: f64,
}

impl FilterSpec {
    pub fn bandpass(low_hz: f64, high_hz: f64, order: usize, fs: f64) -> Self {
        FilterSpec {
            kind: FilterKind::Bandpass,
            low_hz,
            high_hz,
            order,
            fs,
        }
    }

    pub fn notch(low_hz: f64, high_hz: f64, order: usize, fs: f64) -> Self {
        FilterSpec {
            kind: FilterKind::Notch,
            low_hz,
            high_hz,
            order,
            fs,
        }
    }

    pub fn validate(&self) -> Result<(), DspError> {
        if !(self.fs.is_finite() && self.fs > 0.0) {
            return Err(DspError::Design(format!(
                "sample rate {} must be positive",
                self.fs
            )));
        }
        if !(0.0 < self.low_hz && self.low_hz < self.high_hz && self.high_hz < self.fs / 2.0) {
            return Err(DspError::Design(format!(
                "need 0 < low ({}) < high ({}) < fs/2 ({})",
                self.low_hz,
                self.high_hz,
                self.fs / 2.0
            )));
        }
        if ![2, 4, 6, 8].contains(&self.order) {
            return Err(DspError::Design(format!(
                "order {} not in {{2, 4, 6, 8}}",
                self.order
            )));
        }
        Ok(())
    }

    /// Geometric centre of the band in Hz.
    pub fn center_hz(&self) -> f64 {
        (self.low_hz * self.high_hz).sqrt()
    }
}

/// Second-order section, `a[0]` normalised to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    pub fn response(&self, f: f64, fs: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -2.0 * PI * f / fs);
        let z2 = z1 * z1;
        (self.b[0] + z1 * self.b[1] + z2 * self.b[2])
            / (self.a[0] + z1 * self.a[1] + z2 * self.a[2])
    }
}

/// Cascade of second-order sections.
#[derive(Debug, Clone, PartialEq)]
pub struct Sos {
    pub spec: FilterSpec,
    pub sections: Vec<Biquad>,
}

impl Sos {
    pub fn response(&self, f: f64) -> Complex64 {
        self.sections
            .iter()
            .map(|s| s.response(f, self.spec.fs))
            .fold(Complex64::new(1.0, 0.0), |acc, h| acc * h)
    }

    pub fn magnitude(&self, f: f64) -> f64 {
        self.response(f).norm()
    }

    pub fn fs(&self) -> f64 {
        self.spec.fs
    }
}

fn prototype_poles(n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|k| Complex64::from_polar(1.0, PI * (2 * k + n + 1) as f64 / (2 * n) as f64))
        .collect()
}

/// Pair the analog poles produced from each upper-half (or real) prototype
/// pole into conjugate pairs and map them through the bilinear transform.
fn sections_from(
    n: usize,
    k2: f64,
    zeros_b: [f64; 3],
    map: impl Fn(Complex64) -> [Complex64; 2],
) -> Vec<Biquad> {
    let bilinear = |s: Complex64| (k2 + s) / (k2 - s);
    let conj_pair = |z: Complex64| Biquad {
        b: zeros_b,
        a: [1.0, -2.0 * z.re, z.norm_sqr()],
    };
    let mut out = Vec::with_capacity(n);
    for p in prototype_poles(n) {
        if p.im > 1e-12 {
            let [s1, s2] = map(p);
            out.push(conj_pair(bilinear(s1)));
            out.push(conj_pair(bilinear(s2)));
        } else if p.im.abs() <= 1e-12 {
            let [s1, s2] = map(Complex64::new(p.re, 0.0));
            let (z1, z2) = (bilinear(s1), bilinear(s2));
            if z1.im.abs() > 1e-12 {
                out.push(conj_pair(z1));
            } else {
                out.push(Biquad {
                    b: zeros_b,
                    a: [1.0, -(z1.re + z2.re), z1.re * z2.re],
                });
            }
        }
    }
    out
}

fn normalise(mut sos: Sos, at_hz: f64) -> Sos {
    let g = 1.0 / sos.magnitude(at_hz);
    let per = g.powf(1.0 / sos.sections.len() as f64);
    for s in &mut sos.sections {
        for b in &mut s.b {
            *b *= per;
        }
    }
    sos
}

/// Butterworth bandpass via analog prototype, band transform and a
/// prewarped bilinear transform. Unity gain at the digital band centre.
pub fn design_bandpass(spec: &FilterSpec) -> Result<Sos, DspError> {
    spec.validate()?;
    let k2 = 2.0 * spec.fs;
    let w1 = k2 * (PI * spec.low_hz / spec.fs).tan();
    let w2 = k2 * (PI * spec.high_hz / spec.fs).tan();
    let (w0, bw) = ((w1 * w2).sqrt(), w2 - w1);
    let n = spec.order / 2;
    let sections = sections_from(n, k2, [1.0, 0.0, -1.0], |p| {
        let h = p * (bw / 2.0);
        let d = (h * h - w0 * w0).sqrt();
        [h + d, h - d]
    });
    let center = spec.fs / PI * (w0 / k2).atan();
    Ok(normalise(
        Sos {
            spec: *spec,
            sections,
        },
        center,
    ))
}

/// Butterworth bandstop with zeros exactly on the digital centre frequency.
/// Unity gain at DC.
pub fn design_notch(spec: &FilterSpec) -> Result<Sos, DspError> {
    spec.validate()?;
    let k2 = 2.0 * spec.fs;
    let w1 = k2 * (PI * spec.low_hz / spec.fs).tan();
    let w2 = k2 * (PI * spec.high_hz / spec.fs).tan();
    let (w0, bw) = ((w1 * w2).sqrt(), w2 - w1);
    let wc = 2.0 * (w0 / k2).atan();
    let n = spec.order / 2;
    let sections = sections_from(n, k2, [1.0, -2.0 * wc.cos(), 1.0], |p| {
        let h = (bw / 2.0) / p;
        let d = (h * h - w0 * w0).sqrt();
        [h + d, h - d]
    });
    Ok(normalise(
        Sos {
            spec: *spec,
            sections,
        },
        0.0,
    ))
}

pub fn design(spec: &FilterSpec) -> Result<Sos, DspError> {
    match spec.kind {
        FilterKind::Bandpass => design_bandpass(spec),
        FilterKind::Notch => design_notch(spec),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Analog Butterworth magnitude evaluated at the prewarped frequency.
    fn analytic(spec: &FilterSpec, f: f64) -> f64 {
        let k2 = 2.0 * spec.fs;
        let warp = |f: f64| k2 * (PI * f / spec.fs).tan();
        let (w1, w2, w) = (warp(spec.low_hz), warp(spec.high_hz), warp(f));
        let omega = (w * w - w1 * w2) / (w * (w2 - w1));
        let n = (spec.order / 2) as i32;
        match spec.kind {
            FilterKind::Bandpass => 1.0 / (1.0 + omega.powi(2 * n)).sqrt(),
            FilterKind::Notch => 1.0 / (1.0 + omega.powi(-2 * n)).sqrt(),
        }
    }

    #[test]
    fn eeg_band_values() {
        let sos = design_bandpass(&FilterSpec::bandpass(1.0, 40.0, 4, 250.0)).unwrap();
        assert_eq!(sos.sections.len(), 2);
        assert!((sos.magnitude(6.324_555_320_336_759) - 0.999_999_98).abs() < 1e-7);
        assert!((sos.magnitude(2.0) - 0.977_45).abs() < 1e-4);
        assert!((sos.magnitude(10.0) - 0.999_84).abs() < 1e-4);
        assert!((sos.magnitude(20.0) - 0.983_65).abs() < 1e-4);
        assert_eq!(sos.magnitude(0.0), 0.0);
        for edge in [1.0, 40.0] {
            let db = 20.0 * sos.magnitude(edge).log10();
            assert!((db + 3.0103).abs() < 1e-3, "{db}");
        }
    }

    #[test]
    fn alpha_band_values() {
        let sos = design_bandpass(&FilterSpec::bandpass(8.0, 12.0, 4, 250.0)).unwrap();
        assert!((sos.magnitude(10.0) - 0.999_954).abs() < 1e-5);
        assert!((sos.magnitude(2.0) - 0.007_634_3).abs() < 1e-6);
        assert!((sos.magnitude(20.0) - 0.067_036).abs() < 1e-5);
    }

    #[test]
    fn matches_analytic_for_all_orders() {
        for order in [2, 4, 6, 8] {
            for (lo, hi) in [(1.0, 40.0), (8.0, 12.0), (30.7, 31.7)] {
                let spec = FilterSpec::bandpass(lo, hi, order, 250.0);
                let sos = design(&spec).unwrap();
                assert_eq!(sos.sections.len(), order / 2);
                for i in 1..60 {
                    let f = i as f64 * 2.0;
                    let (got, want) = (sos.magnitude(f), analytic(&spec, f));
                    assert!(
                        (got - want).abs() < 1e-6,
                        "order {order} {lo}-{hi} at {f}: {got} vs {want}"
                    );
                }
            }
        }
    }

    #[test]
    fn notch_matches_analytic() {
        for order in [2, 4] {
            let spec = FilterSpec::notch(48.0, 52.0, order, 250.0);
            let sos = design(&spec).unwrap();
            let k2 = 500.0;
            let w0 = (k2 * (PI * 48.0 / 250.0).tan() * k2 * (PI * 52.0 / 250.0).tan()).sqrt();
            let centre = 250.0 / PI * (w0 / k2).atan();
            assert!(sos.magnitude(centre) < 1e-9);
            assert!((centre - 50.0).abs() < 0.1);
            assert!((sos.magnitude(0.0) - 1.0).abs() < 1e-12);
            for f in [10.0, 45.0, 49.0, 51.0, 55.0, 100.0] {
                assert!((sos.magnitude(f) - analytic(&spec, f)).abs() < 1e-6, "{f}");
            }
        }
    }

    #[test]
    fn stable_poles() {
        for order in [2, 4, 6, 8] {
            let sos = design(&FilterSpec::bandpass(0.5, 100.0, order, 250.0)).unwrap();
            for s in &sos.sections {
                assert!(s.a[2].abs() < 1.0);
            }
        }
    }

    #[test]
    fn rejects_bad_specs() {
        for spec in [
            FilterSpec::bandpass(0.0, 40.0, 4, 250.0),
            FilterSpec::bandpass(40.0, 1.0, 4, 250.0),
            FilterSpec::bandpass(1.0, 125.0, 4, 250.0),
            FilterSpec::bandpass(1.0, 40.0, 3, 250.0),
            FilterSpec::bandpass(1.0, 40.0, 10, 250.0),
        ] {
            assert!(design(&spec).is_err());
        }
    }
}
