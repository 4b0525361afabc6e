use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

fn rescale(mut x: Vec<f64>, rms: f64) -> Vec<f64> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let cur = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let k = if cur > 0.0 { rms / cur } else { 0.0 };
    for v in &mut x {
        *v = (*v - mean) * k;
    }
    x
}

/// 1/f noise with exactly the requested RMS, synthesized by shaping a
/// Gaussian spectrum by `1/sqrt(f)` and inverting it.
pub fn pink_noise(seed: u64, n: usize, fs: f64, rms_uv: f64) -> Vec<f64> {
    if n == 0 {
        return Vec::new();
    }
    if rms_uv == 0.0 || n < 2 {
        return vec![0.0; n];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spec = vec![Complex64::new(0.0, 0.0); n];
    for k in 1..=n / 2 {
        let f = k as f64 * fs / n as f64;
        let scale = 1.0 / f.sqrt();
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        spec[k] = Complex64::new(re * scale, im * scale);
        if k != n - k {
            spec[n - k] = spec[k].conj();
        } else {
            spec[k].im = 0.0;
        }
    }
    FftPlanner::new().plan_fft_inverse(n).process(&mut spec);
    rescale(spec.into_iter().map(|c| c.re).collect(), rms_uv)
}

/// Gaussian white noise with standard deviation `rms_uv`.
pub fn white_noise(seed: u64, n: usize, rms_uv: f64) -> Vec<f64> {
    if rms_uv == 0.0 {
        return vec![0.0; n];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| rms_uv * rng.sample::<f64, _>(StandardNormal))
        .collect()
}
