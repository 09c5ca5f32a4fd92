//! Mel filter bank and mel-frequency cepstral coefficients.

use std::f64::consts::PI;

use ndarray::Array2;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::spectral::Window;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::signals::Signal;

pub const DEFAULT_FILTERS: usize = 26;
pub const DEFAULT_LOW_HZ: f64 = 20.0;
/// Floor applied to mel energies before the logarithm.
pub const ENERGY_FLOOR: f64 = 1e-10;
/// Number of coefficients kept (the 2nd through the 13th).
pub const COEFFICIENTS: usize = 12;

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters equally spaced on the mel scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MelFilterBank {
    pub sample_rate: u32,
    pub fft_size: usize,
    /// `M + 2` edge positions as FFT bin indices.
    pub edge_bins: Vec<usize>,
    /// `M + 2` edge frequencies in Hz before rounding to bins.
    pub edge_hz: Vec<f64>,
    /// `M × (fft_size/2 + 1)` weights.
    pub weights: Array2<f64>,
}

impl MelFilterBank {
    pub fn filter_count(&self) -> usize {
        self.weights.nrows()
    }
}

/// Builds `m` triangular filters between `f_low` and `f_high`.
///
/// Edge `i` sits at bin `floor((fft_size + 1)·f(i) / sample_rate)`. Filter `m`
/// rises linearly from 0 at edge `m − 1` to 1 at edge `m` and falls back to 0
/// at edge `m + 1`.
pub fn build_mel_bank(
    sample_rate: u32,
    fft_size: usize,
    m: usize,
    f_low: f64,
    f_high: f64,
) -> Result<MelFilterBank> {
    let nyquist = sample_rate as f64 / 2.0;
    if m < 14 {
        return Err(Error::param(format!(
            "need at least 14 mel filters, got {m}"
        )));
    }
    if fft_size < 2 || !fft_size.is_power_of_two() {
        return Err(Error::param(format!(
            "fft size must be a power of two, got {fft_size}"
        )));
    }
    if !(f_low >= 0.0 && f_low < f_high && f_high <= nyquist) {
        return Err(Error::param(format!(
            "mel range {f_low}-{f_high} Hz must satisfy 0 ≤ low < high ≤ {nyquist}"
        )));
    }
    let (lo, hi) = (hz_to_mel(f_low), hz_to_mel(f_high));
    let edge_hz: Vec<f64> = (0..m + 2)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (m + 1) as f64))
        .collect();
    let edge_bins: Vec<usize> = edge_hz
        .iter()
        .map(|&f| ((fft_size + 1) as f64 * f / sample_rate as f64).floor() as usize)
        .collect();
    if let Some(i) = (1..edge_bins.len()).find(|&i| edge_bins[i] <= edge_bins[i - 1]) {
        return Err(Error::param(format!(
            "mel edges {} and {} share FFT bin {}; use a larger fft size or fewer filters",
            i - 1,
            i,
            edge_bins[i]
        )));
    }
    let bins = fft_size / 2 + 1;
    let mut weights = Array2::<f64>::zeros((m, bins));
    for j in 1..=m {
        let (a, c, b) = (edge_bins[j - 1], edge_bins[j], edge_bins[j + 1]);
        for k in a..=b.min(bins - 1) {
            weights[[j - 1, k]] = if k <= c {
                (k - a) as f64 / (c - a) as f64
            } else {
                (b - k) as f64 / (b - c) as f64
            };
        }
    }
    Ok(MelFilterBank {
        sample_rate,
        fft_size,
        edge_bins,
        edge_hz,
        weights,
    })
}

/// Bank with the default filter count and range for a block of `len` samples.
pub fn default_bank(sample_rate: u32, len: usize) -> Result<MelFilterBank> {
    build_mel_bank(
        sample_rate,
        len.max(2).next_power_of_two(),
        DEFAULT_FILTERS,
        DEFAULT_LOW_HZ,
        sample_rate as f64 / 2.0,
    )
}

/// Coefficients 2 through 13 of the orthonormal DCT-II of the log mel energies.
///
/// The signal is cut into frames of `bank.fft_size` samples (a shorter final
/// frame is kept and zero padded), each Hann windowed; the coefficients are
/// averaged over frames.
pub fn mfcc<T: Real>(signal: &Signal<T>, bank: &MelFilterBank) -> Result<Vec<T>> {
    if bank.sample_rate != signal.sample_rate() {
        return Err(Error::param(format!(
            "mel bank built for {} Hz applied to a {} Hz signal",
            bank.sample_rate,
            signal.sample_rate()
        )));
    }
    let n = bank.fft_size;
    let m = bank.filter_count();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let dct = dct_basis(m);
    let mut sum = vec![0.0f64; COEFFICIENTS];
    let mut frames = 0usize;
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    let mut power = vec![0.0f64; n / 2 + 1];
    let mut log_energy = vec![0.0f64; m];
    for frame in signal.samples().chunks(n) {
        let w = Window::Hann.coefficients(frame.len());
        buf.fill(Complex::new(0.0, 0.0));
        for ((b, v), wv) in buf.iter_mut().zip(frame).zip(&w) {
            *b = Complex::new(v.as_f64() * wv, 0.0);
        }
        fft.process(&mut buf);
        for (p, c) in power.iter_mut().zip(&buf) {
            *p = c.norm_sqr() / n as f64;
        }
        for (le, row) in log_energy.iter_mut().zip(bank.weights.outer_iter()) {
            let e: f64 = row.iter().zip(&power).map(|(w, p)| w * p).sum();
            *le = e.max(ENERGY_FLOOR).ln();
        }
        for (k, s) in sum.iter_mut().enumerate() {
            *s += dct[k + 1]
                .iter()
                .zip(&log_energy)
                .map(|(a, b)| a * b)
                .sum::<f64>();
        }
        frames += 1;
    }
    Ok(sum.into_iter().map(|s| T::of(s / frames as f64)).collect())
}

/// Rows of the orthonormal DCT-II matrix of size `m`.
fn dct_basis(m: usize) -> Vec<Vec<f64>> {
    (0..m)
        .map(|k| {
            let scale = if k == 0 {
                (1.0 / m as f64).sqrt()
            } else {
                (2.0 / m as f64).sqrt()
            };
            (0..m)
                .map(|j| scale * (PI * k as f64 * (2 * j + 1) as f64 / (2 * m) as f64).cos())
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::SourceClass;

    #[test]
    fn triangles_peak_at_their_centre() {
        let bank = build_mel_bank(22_050, 1024, 26, 20.0, 11_025.0).unwrap();
        for j in 1..=26 {
            let (a, c, b) = (
                bank.edge_bins[j - 1],
                bank.edge_bins[j],
                bank.edge_bins[j + 1],
            );
            let row = bank.weights.row(j - 1);
            assert_eq!(row[c], 1.0);
            assert_eq!(row[a], 0.0);
            if b < row.len() {
                assert_eq!(row[b], 0.0);
            }
            assert!(row.iter().take(a).all(|&w| w == 0.0));
            assert!(row.iter().skip(b + 1).all(|&w| w == 0.0));
            for k in a..c {
                assert!(row[k + 1] > row[k]);
            }
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(build_mel_bank(22_050, 1024, 13, 20.0, 11_025.0).is_err());
        assert!(build_mel_bank(22_050, 1024, 26, 20.0, 12_000.0).is_err());
        assert!(build_mel_bank(22_050, 1000, 26, 20.0, 11_025.0).is_err());
        // too many filters for a small transform collapses edges onto one bin
        assert!(build_mel_bank(22_050, 64, 26, 20.0, 11_025.0).is_err());
    }

    #[test]
    fn zero_signal_gives_zero_coefficients() {
        let s = Signal::new(vec![0.0f64; 1000], 22_050, SourceClass::Unknown).unwrap();
        let bank = default_bank(22_050, 1000).unwrap();
        let c = mfcc(&s, &bank).unwrap();
        assert_eq!(c.len(), 12);
        assert!(c.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn mel_scale_round_trip() {
        for hz in [0.0, 20.0, 700.0, 11_025.0] {
            assert!((mel_to_hz(hz_to_mel(hz)) - hz).abs() < 1e-9);
        }
        assert!((hz_to_mel(700.0) - 2595.0 * 2f64.log10()).abs() < 1e-12);
    }

    #[test]
    fn dct_is_orthonormal() {
        let d = dct_basis(26);
        for i in 0..26 {
            for j in 0..26 {
                let dot: f64 = d[i].iter().zip(&d[j]).map(|(a, b)| a * b).sum();
                assert!((dot - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }
}
