//! Octave-band Butterworth filter bank with per-band PSD and RMS features.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::spectral::{self, floor_power_of_two, Window};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::signals::Signal;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OctaveBand {
    pub low_hz: f64,
    pub center_hz: f64,
    pub high_hz: f64,
}

impl OctaveBand {
    pub fn new(low_hz: f64, center_hz: f64, high_hz: f64) -> Result<Self> {
        let band = OctaveBand {
            low_hz,
            center_hz,
            high_hz,
        };
        band.validate()?;
        Ok(band)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.low_hz > 0.0 && self.low_hz < self.center_hz && self.center_hz < self.high_hz) {
            return Err(Error::param(format!(
                "band edges must satisfy 0 < low < center < high, got {} / {} / {}",
                self.low_hz, self.center_hz, self.high_hz
            )));
        }
        let ratio = self.high_hz / self.low_hz;
        if (ratio - 2.0).abs() > 2.0 * 0.002 {
            return Err(Error::param(format!(
                "band {}-{} Hz is not an octave (high/low = {ratio})",
                self.low_hz, self.high_hz
            )));
        }
        Ok(())
    }

    pub fn contains(&self, hz: f64) -> bool {
        hz >= self.low_hz && hz <= self.high_hz
    }
}

/// The nine octave bands, low / centre / high in Hz.
pub const OCTAVE_BANDS: [OctaveBand; 9] = [
    band(22.09, 31.25, 44.2),
    band(44.19, 62.5, 88.38),
    band(88.38, 125.0, 176.77),
    band(176.77, 250.0, 353.55),
    band(353.55, 500.0, 707.10),
    band(707.10, 1000.0, 1414.21),
    band(1414.21, 2000.0, 2828.0),
    band(2828.43, 4000.0, 5656.0),
    band(5656.85, 8000.0, 11313.0),
];

const fn band(low_hz: f64, center_hz: f64, high_hz: f64) -> OctaveBand {
    OctaveBand {
        low_hz,
        center_hz,
        high_hz,
    }
}

/// Second-order section `(b0 + b1 z⁻¹ + b2 z⁻²) / (1 + a1 z⁻¹ + a2 z⁻²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

/// Fourth-order Butterworth band-pass as a cascade of two biquads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandPass {
    pub sections: [Biquad; 2],
}

impl BandPass {
    /// Designs the filter for passband `[low_hz, high_hz]` at `sample_rate`.
    ///
    /// A second-order analog Butterworth prototype is shifted to a band-pass
    /// around the prewarped edges and mapped with the bilinear transform.
    pub fn butterworth(low_hz: f64, high_hz: f64, sample_rate: f64) -> Result<Self> {
        let nyquist = sample_rate / 2.0;
        if !(low_hz > 0.0 && low_hz < high_hz && high_hz < nyquist) {
            return Err(Error::param(format!(
                "band-pass {low_hz}-{high_hz} Hz is not realisable below the {nyquist} Hz Nyquist frequency"
            )));
        }
        let fs2 = 2.0 * sample_rate;
        let w1 = fs2 * (PI * low_hz / sample_rate).tan();
        let w2 = fs2 * (PI * high_hz / sample_rate).tan();
        let bw = w2 - w1;
        let w0sq = w1 * w2;

        let mut poles = Vec::with_capacity(2);
        for k in 0..2 {
            let proto = Complex::from_polar(1.0, PI * (2 * k + 3) as f64 / 4.0);
            let half = proto * (bw / 2.0);
            let root = (half * half - w0sq).sqrt();
            for s in [half + root, half - root] {
                let z = (fs2 + s) / (fs2 - s);
                if z.im > 0.0 {
                    poles.push((s, z));
                }
            }
        }
        if poles.len() != 2 {
            return Err(Error::param(format!(
                "band-pass {low_hz}-{high_hz} Hz produced real poles"
            )));
        }
        poles.sort_by(|a, b| a.1.re.total_cmp(&b.1.re));
        // both analog zeros sit at s = 0; gain is bw² · fs2² / Π(fs2 − p) over all four poles
        let denom = poles.iter().fold(Complex::new(1.0, 0.0), |acc, (s, _)| {
            acc * (fs2 - s) * (fs2 - s.conj())
        });
        let gain = (bw * bw * fs2 * fs2 / denom).re;
        let section = |z: Complex<f64>, g: f64| Biquad {
            b: [g, 0.0, -g],
            a: [-2.0 * z.re, z.norm_sqr()],
        };
        Ok(BandPass {
            sections: [section(poles[0].1, gain), section(poles[1].1, 1.0)],
        })
    }

    /// Transfer-function coefficients `(b, a)` of the cascade, each of length 5.
    pub fn transfer_function(&self) -> ([f64; 5], [f64; 5]) {
        let conv = |p: [f64; 3], q: [f64; 3]| {
            let mut r = [0.0; 5];
            for i in 0..3 {
                for j in 0..3 {
                    r[i + j] += p[i] * q[j];
                }
            }
            r
        };
        let [s0, s1] = self.sections;
        (
            conv(s0.b, s1.b),
            conv([1.0, s0.a[0], s0.a[1]], [1.0, s1.a[0], s1.a[1]]),
        )
    }

    /// Runs the cascade forward from rest (direct form II transposed).
    pub fn apply<T: Real>(&self, x: &[T]) -> Vec<f64> {
        let mut y: Vec<f64> = x.iter().map(|v| v.as_f64()).collect();
        for s in &self.sections {
            let (mut z1, mut z2) = (0.0, 0.0);
            for v in y.iter_mut() {
                let input = *v;
                let out = s.b[0] * input + z1;
                z1 = s.b[1] * input - s.a[0] * out + z2;
                z2 = s.b[2] * input - s.a[1] * out;
                *v = out;
            }
        }
        y
    }

    /// Magnitude response at `hz`.
    pub fn gain_at(&self, hz: f64, sample_rate: f64) -> f64 {
        let z1 = Complex::from_polar(1.0, -2.0 * PI * hz / sample_rate);
        let z2 = z1 * z1;
        self.sections
            .iter()
            .map(|s| {
                let num = s.b[0] + z1 * s.b[1] + z2 * s.b[2];
                let den = 1.0 + z1 * s.a[0] + z2 * s.a[1];
                (num / den).norm()
            })
            .product()
    }
}

/// Per-band mean PSD and RMS of the band-filtered signal.
#[derive(Debug, Clone, PartialEq)]
pub struct OctaveFeatures<T> {
    pub psd: Vec<T>,
    pub rms: Vec<T>,
}

/// Band filters designed once for a sample rate.
#[derive(Debug, Clone)]
pub struct OctaveFilterBank {
    bands: Vec<OctaveBand>,
    filters: Vec<BandPass>,
    sample_rate: u32,
}

impl OctaveFilterBank {
    pub fn new(bands: &[OctaveBand], sample_rate: u32) -> Result<Self> {
        if bands.is_empty() {
            return Err(Error::param("filter bank needs at least one band"));
        }
        let nyquist = sample_rate as f64 / 2.0;
        let mut filters = Vec::with_capacity(bands.len());
        for (i, b) in bands.iter().enumerate() {
            b.validate()?;
            if b.high_hz >= nyquist {
                return Err(Error::Configuration(format!(
                    "band {} ({}-{} Hz) needs a sample rate above {} Hz, got {sample_rate} Hz",
                    i + 1,
                    b.low_hz,
                    b.high_hz,
                    2.0 * b.high_hz
                )));
            }
            filters.push(BandPass::butterworth(
                b.low_hz,
                b.high_hz,
                sample_rate as f64,
            )?);
        }
        Ok(OctaveFilterBank {
            bands: bands.to_vec(),
            filters,
            sample_rate,
        })
    }

    pub fn standard(sample_rate: u32) -> Result<Self> {
        Self::new(&OCTAVE_BANDS, sample_rate)
    }

    pub fn bands(&self) -> &[OctaveBand] {
        &self.bands
    }

    pub fn filters(&self) -> &[BandPass] {
        &self.filters
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    /// PSD and RMS features of `x`, sampled at the bank's rate.
    pub fn features<T: Real>(&self, x: &[T]) -> Result<OctaveFeatures<T>> {
        let segment = floor_power_of_two(x.len()).min(spectral::DEFAULT_SEGMENT);
        let mut psd = Vec::with_capacity(self.bands.len());
        let mut rms = Vec::with_capacity(self.bands.len());
        for (b, f) in self.bands.iter().zip(&self.filters) {
            let y = f.apply(x);
            let ms = y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64;
            rms.push(T::of(ms.sqrt()));
            let p = spectral::periodogram_of(
                &y,
                self.sample_rate,
                Window::Hann,
                segment,
                spectral::DEFAULT_OVERLAP,
            )?;
            let inside: Vec<f64> = (0..p.density.len())
                .filter(|&k| b.contains(p.frequency(k)))
                .map(|k| p.density[k])
                .collect();
            let value = if inside.is_empty() {
                let nearest =
                    ((b.center_hz / p.resolution).round() as usize).min(p.density.len() - 1);
                p.density[nearest]
            } else {
                inside.iter().sum::<f64>() / inside.len() as f64
            };
            psd.push(T::of(value));
        }
        Ok(OctaveFeatures { psd, rms })
    }
}

/// Filters `signal` through each band and returns its per-band PSD and RMS.
pub fn octave_band_features<T: Real>(
    signal: &Signal<T>,
    bands: &[OctaveBand],
) -> Result<OctaveFeatures<T>> {
    OctaveFilterBank::new(bands, signal.sample_rate())?.features(signal.samples())
}
