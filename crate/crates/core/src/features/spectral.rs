//! Averaged windowed periodogram (Welch) power spectral density.
//!
//! The PSD is the Fourier transform of the autocorrelation; averaging the
//! squared magnitudes of windowed, overlapping segment transforms estimates
//! the same quantity without forming the O(L²) autocorrelation.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::signals::Signal;

/// Default segment length.
pub const DEFAULT_SEGMENT: usize = 1024;
/// Default fractional overlap between consecutive segments.
pub const DEFAULT_OVERLAP: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    #[default]
    Hann,
    Rectangular,
}

impl Window {
    /// Periodic window of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
                .collect(),
            Window::Rectangular => vec![1.0; n],
        }
    }
}

/// One-sided power spectral density on `segment/2 + 1` bins.
#[derive(Debug, Clone, PartialEq)]
pub struct Psd<T> {
    /// Bin spacing in Hz.
    pub resolution: f64,
    /// Density per bin in units²/Hz.
    pub density: Vec<T>,
    pub segments: usize,
}

impl<T: Real> Psd<T> {
    pub fn frequency(&self, bin: usize) -> f64 {
        bin as f64 * self.resolution
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.density.len()).map(|k| self.frequency(k)).collect()
    }

    /// `Σ PSD·Δf`
    pub fn total_power(&self) -> f64 {
        self.density.iter().map(|v| v.as_f64()).sum::<f64>() * self.resolution
    }

    /// Bin of the largest density (lowest bin on ties).
    pub fn peak_bin(&self) -> usize {
        let mut best = 0;
        for (k, v) in self.density.iter().enumerate() {
            if *v > self.density[best] {
                best = k;
            }
        }
        best
    }

    /// Power-weighted mean frequency.
    pub fn centroid(&self) -> f64 {
        let total: f64 = self.density.iter().map(|v| v.as_f64()).sum();
        if total <= 0.0 {
            return 0.0;
        }
        self.density
            .iter()
            .enumerate()
            .map(|(k, v)| self.frequency(k) * v.as_f64())
            .sum::<f64>()
            / total
    }
}

/// Welch estimate of the PSD of `signal`.
///
/// The signal's global mean is removed first. Segments start every
/// `segment·(1 − overlap)` samples; a trailing partial segment is dropped.
/// Densities are normalised by the window power so that `Σ PSD·Δf` equals the
/// window-weighted mean square of the segments.
pub fn periodogram<T: Real>(
    signal: &Signal<T>,
    window: Window,
    segment: usize,
    overlap: f64,
) -> Result<Psd<T>> {
    periodogram_of(
        signal.samples(),
        signal.sample_rate(),
        window,
        segment,
        overlap,
    )
}

pub fn periodogram_of<T: Real>(
    x: &[T],
    sample_rate: u32,
    window: Window,
    segment: usize,
    overlap: f64,
) -> Result<Psd<T>> {
    if segment < 2 || !segment.is_power_of_two() {
        return Err(Error::param(format!(
            "segment length must be a power of two ≥ 2, got {segment}"
        )));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::param(format!(
            "overlap must lie in [0, 1), got {overlap}"
        )));
    }
    if x.len() < segment {
        return Err(Error::param(format!(
            "signal of {} samples is shorter than one {segment}-sample segment",
            x.len()
        )));
    }
    let fs = sample_rate as f64;
    let step = ((segment as f64 * (1.0 - overlap)).round() as usize).max(1);
    let mean = x.iter().map(|v| v.as_f64()).sum::<f64>() / x.len() as f64;
    let w = window.coefficients(segment);
    let power: f64 = w.iter().map(|v| v * v).sum();

    let fft = FftPlanner::<f64>::new().plan_fft_forward(segment);
    let bins = segment / 2 + 1;
    let mut acc = vec![0.0f64; bins];
    let mut buf = vec![Complex::new(0.0, 0.0); segment];
    let mut count = 0usize;
    let mut start = 0;
    while start + segment <= x.len() {
        for ((b, &v), &wv) in buf.iter_mut().zip(&x[start..start + segment]).zip(&w) {
            *b = Complex::new((v.as_f64() - mean) * wv, 0.0);
        }
        fft.process(&mut buf);
        for (a, c) in acc.iter_mut().zip(&buf) {
            *a += c.norm_sqr();
        }
        count += 1;
        start += step;
    }
    let norm = 1.0 / (fs * power * count as f64);
    let density = acc
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            // one-sided folding: every bin except DC and Nyquist appears twice
            let fold = if k == 0 || k == segment / 2 { 1.0 } else { 2.0 };
            T::of(p * norm * fold)
        })
        .collect();
    Ok(Psd {
        resolution: fs / segment as f64,
        density,
        segments: count,
    })
}

/// Largest power of two not exceeding `n` (0 for `n = 0`).
pub(crate) fn floor_power_of_two(n: usize) -> usize {
    if n == 0 {
        0
    } else {
        1 << (usize::BITS - 1 - n.leading_zeros())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::SourceClass;

    fn sine(freq: f64, rate: u32, n: usize) -> Signal<f64> {
        let x = (0..n)
            .map(|i| (2.0 * PI * freq * i as f64 / rate as f64).sin())
            .collect();
        Signal::new(x, rate, SourceClass::Unknown).unwrap()
    }

    #[test]
    fn sine_peak_and_power() {
        let s = sine(1000.0, 22050, 22050);
        let p = periodogram(&s, Window::Hann, 1024, 0.5).unwrap();
        let peak = p.frequency(p.peak_bin());
        assert!((peak - 1000.0).abs() <= p.resolution, "peak at {peak}");
        assert!((p.total_power() - 0.5).abs() <= 0.01, "{}", p.total_power());
    }

    #[test]
    fn zero_signal() {
        let s = Signal::new(vec![0.0f64; 4096], 8000, SourceClass::Unknown).unwrap();
        let p = periodogram(&s, Window::Hann, 1024, 0.5).unwrap();
        assert!(p.density.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rectangular_single_segment_is_sample_variance() {
        let x: Vec<f64> = (0..256)
            .map(|i| ((i * 37 % 101) as f64).sqrt() - 3.0)
            .collect();
        let s = Signal::new(x.clone(), 8000, SourceClass::Unknown).unwrap();
        let p = periodogram(&s, Window::Rectangular, 256, 0.0).unwrap();
        let mean = x.iter().sum::<f64>() / 256.0;
        let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 256.0;
        assert!((p.total_power() - var).abs() <= 1e-12 * var);
    }

    #[test]
    fn rejects_bad_segments() {
        let s = sine(100.0, 8000, 1000);
        assert!(periodogram(&s, Window::Hann, 1024, 0.5).is_err());
        assert!(periodogram(&s, Window::Hann, 500, 0.5).is_err());
        assert!(periodogram(&s, Window::Hann, 512, 1.0).is_err());
    }

    #[test]
    fn powers_of_two() {
        assert_eq!(floor_power_of_two(1000), 512);
        assert_eq!(floor_power_of_two(1024), 1024);
        assert_eq!(floor_power_of_two(1), 1);
    }
}
