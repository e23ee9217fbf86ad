use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance on sample spacing.
const SPACING_TOL: f64 = 1e-6;

/// Largest accepted deviation of the integrated density from the variance.
pub const PARSEVAL_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Hann,
    Rect,
}

impl Window {
    fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Rect => vec![1.0; n],
            // periodic Hann, the usual choice for Welch averaging
            Window::Hann => (0..n)
                .map(|k| 0.5 - 0.5 * (std::f64::consts::TAU * k as f64 / n as f64).cos())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumConfig {
    pub segment_len: usize,
    /// Fractional overlap of consecutive segments, in [0, 1).
    pub overlap: f64,
    pub window: Window,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            segment_len: 4096,
            overlap: 0.5,
            window: Window::Hann,
        }
    }
}

/// Input to [`spectrum`]: a real record gives a one-sided density, a complex
/// record a two-sided density on frequencies in ascending order.
#[derive(Debug, Clone, Copy)]
pub enum Signal<'a> {
    Real(&'a [f64]),
    Complex(&'a [Complex64]),
}

impl Signal<'_> {
    fn len(&self) -> usize {
        match self {
            Signal::Real(x) => x.len(),
            Signal::Complex(z) => z.len(),
        }
    }

    fn centered(&self) -> Vec<Complex64> {
        match self {
            Signal::Real(x) => {
                let m = x.iter().sum::<f64>() / x.len() as f64;
                x.iter().map(|v| Complex64::new(v - m, 0.0)).collect()
            }
            Signal::Complex(z) => {
                let m = z.iter().sum::<Complex64>() / z.len() as f64;
                z.iter().map(|v| v - m).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEstimate {
    /// Frequencies (Hz).
    pub freq: Vec<f64>,
    /// Power spectral density (units^2 / Hz).
    pub psd: Vec<f64>,
    pub one_sided: bool,
    /// Resolution bandwidth, equal to the bin spacing (Hz).
    pub rbw: f64,
    pub n_segments: usize,
    /// Integrated density over the variance of the mean-removed record.
    pub parseval_ratio: f64,
}

impl SpectrumEstimate {
    /// Full width of the contiguous region around the peak where the density
    /// stays at or above half the peak, in bins times the bin spacing (Hz).
    pub fn linewidth(&self) -> f64 {
        let Some((peak, &pmax)) = self
            .psd
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
        else {
            return 0.0;
        };
        let half = 0.5 * pmax;
        let mut lo = peak;
        while lo > 0 && self.psd[lo - 1] >= half {
            lo -= 1;
        }
        let mut hi = peak;
        while hi + 1 < self.psd.len() && self.psd[hi + 1] >= half {
            hi += 1;
        }
        (hi - lo + 1) as f64 * self.rbw
    }

    /// Whether the integrated density reproduces the record variance within
    /// [`PARSEVAL_TOLERANCE`].
    pub fn parseval_ok(&self) -> bool {
        (self.parseval_ratio - 1.0).abs() <= PARSEVAL_TOLERANCE
    }

    /// Frequency of the largest bin (Hz).
    pub fn peak_frequency(&self) -> f64 {
        self.psd
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map_or(0.0, |(k, _)| self.freq[k])
    }

    /// Single-sideband phase noise `10 log10(S_phi / 2)` (dBc/Hz), for a
    /// one-sided phase density.
    pub fn ssb_phase_noise(&self) -> Vec<f64> {
        self.psd.iter().map(|s| 10.0 * (0.5 * s).log10()).collect()
    }
}

/// Welch estimate of the power spectral density of a uniformly sampled record.
pub fn spectrum(t: &[f64], signal: Signal<'_>, cfg: &SpectrumConfig) -> Result<SpectrumEstimate> {
    let n = signal.len();
    if t.len() != n {
        return Err(Error::InvalidParams(format!("{} times for {} samples", t.len(), n)));
    }
    let seg = cfg.segment_len;
    if seg < 2 {
        return Err(Error::InvalidParams("segment length must be at least 2".into()));
    }
    if !(0.0..1.0).contains(&cfg.overlap) {
        return Err(Error::InvalidParams(format!("overlap must be in [0, 1), got {}", cfg.overlap)));
    }
    if n < seg {
        return Err(Error::TooShort { got: n, need: seg });
    }
    let dt = (t[n - 1] - t[0]) / (n - 1) as f64;
    if !(dt > 0.0) {
        return Err(Error::NonUniformSampling { index: 1 });
    }
    if let Some(index) = (1..n).find(|&k| ((t[k] - t[k - 1]) - dt).abs() > SPACING_TOL * dt) {
        return Err(Error::NonUniformSampling { index });
    }
    let fs = 1.0 / dt;

    let x = signal.centered();
    let w = cfg.window.coefficients(seg);
    let wsum2: f64 = w.iter().map(|v| v * v).sum();
    let hop = ((seg as f64 * (1.0 - cfg.overlap)).round() as usize).max(1);
    let fft = FftPlanner::new().plan_fft_forward(seg);

    let mut acc = vec![0.0; seg];
    let mut n_segments = 0;
    let mut buf = vec![Complex64::new(0.0, 0.0); seg];
    let mut start = 0;
    while start + seg <= n {
        for k in 0..seg {
            buf[k] = x[start + k] * w[k];
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
        n_segments += 1;
        start += hop;
    }
    let scale = 1.0 / (fs * wsum2 * n_segments as f64);
    let df = fs / seg as f64;

    let (freq, psd, one_sided) = match signal {
        Signal::Real(_) => {
            let m = seg / 2 + 1;
            let psd: Vec<f64> = (0..m)
                .map(|k| {
                    let edge = k == 0 || (seg % 2 == 0 && k == seg / 2);
                    acc[k] * scale * if edge { 1.0 } else { 2.0 }
                })
                .collect();
            ((0..m).map(|k| k as f64 * df).collect(), psd, true)
        }
        Signal::Complex(_) => {
            let half = seg / 2;
            let order: Vec<usize> = (half..seg).chain(0..half).collect();
            let freq = order
                .iter()
                .map(|&k| if k >= seg - half { k as f64 - seg as f64 } else { k as f64 } * df)
                .collect();
            (freq, order.iter().map(|&k| acc[k] * scale).collect(), false)
        }
    };

    let variance = x.iter().map(|v| v.norm_sqr()).sum::<f64>() / n as f64;
    let power: f64 = psd.iter().sum::<f64>() * df;
    let parseval_ratio = if variance > 0.0 { power / variance } else { f64::NAN };
    Ok(SpectrumEstimate {
        freq,
        psd,
        one_sided,
        rbw: df,
        n_segments,
        parseval_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn grid(n: usize, dt: f64) -> Vec<f64> {
        (0..n).map(|k| k as f64 * dt).collect()
    }

    #[test]
    fn sinusoid_peak_and_parseval() {
        let dt = 1e-3;
        let t = grid(1 << 14, dt);
        let f0 = 125.0;
        let x: Vec<f64> = t.iter().map(|t| 2.0 * (TAU * f0 * t).sin()).collect();
        let cfg = SpectrumConfig {
            segment_len: 1024,
            ..Default::default()
        };
        let s = spectrum(&t, Signal::Real(&x), &cfg).unwrap();
        assert!(s.one_sided);
        assert!((s.peak_frequency() - f0).abs() <= s.rbw);
        assert!((s.parseval_ratio - 1.0).abs() < 0.02, "{}", s.parseval_ratio);
        // a bin-centred tone under a Hann window spans 2 bins at half power
        assert!(s.linewidth() <= 3.0 * s.rbw);
    }

    #[test]
    fn complex_tone_lands_on_signed_frequency() {
        let dt = 1e-3;
        let t = grid(8192, dt);
        let z: Vec<Complex64> = t.iter().map(|t| Complex64::from_polar(1.0, -TAU * 62.5 * t)).collect();
        let cfg = SpectrumConfig {
            segment_len: 512,
            overlap: 0.0,
            window: Window::Rect,
        };
        let s = spectrum(&t, Signal::Complex(&z), &cfg).unwrap();
        assert!(!s.one_sided);
        assert!(s.freq.windows(2).all(|w| w[1] > w[0]));
        assert!((s.peak_frequency() + 62.5).abs() < 1e-9);
        assert!((s.parseval_ratio - 1.0).abs() < 1e-9);
    }

    #[test]
    fn white_noise_level() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let dt = 1e-2;
        let t = grid(1 << 16, dt);
        let x: Vec<f64> = t.iter().map(|_| StandardNormal.sample(&mut rng)).collect();
        let s = spectrum(&t, Signal::Real(&x), &SpectrumConfig::default()).unwrap();
        // one-sided level of unit-variance white noise is 2 dt
        let mid: Vec<f64> = s.psd[10..s.psd.len() - 10].to_vec();
        let mean = mid.iter().sum::<f64>() / mid.len() as f64;
        assert!((mean / (2.0 * dt) - 1.0).abs() < 0.05);
        assert!(s.parseval_ok(), "{}", s.parseval_ratio);
    }

    #[test]
    fn sampling_checks() {
        let mut t = grid(2048, 1e-3);
        let x = vec![0.0; 2048];
        t[700] += 1e-4;
        let cfg = SpectrumConfig {
            segment_len: 256,
            ..Default::default()
        };
        assert!(matches!(spectrum(&t, Signal::Real(&x), &cfg), Err(Error::NonUniformSampling { index: 700 })));
        let short = grid(100, 1e-3);
        assert!(matches!(spectrum(&short, Signal::Real(&x[..100]), &cfg), Err(Error::TooShort { .. })));
    }
}
