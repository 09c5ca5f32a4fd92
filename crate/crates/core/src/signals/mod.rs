//! Source signals: the sampled waveform type, the six acoustic source
//! classes, parametric synthesis and WAV storage.

mod synth;
pub mod wav;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub use synth::{excess_kurtosis, synthesize};
pub use wav::{load_wav, store_wav};

/// Lowest accepted sample rate in Hz.
pub const MIN_SAMPLE_RATE: u32 = 8000;

/// Default sample rate in Hz. Its Nyquist frequency (12 kHz) clears the upper
/// edge of the highest octave band (11313 Hz).
pub const DEFAULT_SAMPLE_RATE: u32 = 24_000;

/// Acoustic source class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceClass {
    Drone,
    Aeroplane,
    Bird,
    Wind,
    Rain,
    Thunder,
    Unknown,
}

impl SourceClass {
    pub const ALL: [SourceClass; 6] = [
        SourceClass::Drone,
        SourceClass::Aeroplane,
        SourceClass::Bird,
        SourceClass::Wind,
        SourceClass::Rain,
        SourceClass::Thunder,
    ];

    /// Harmonic classes are built from sinusoids, the others from shaped noise.
    pub fn is_harmonic(self) -> bool {
        matches!(
            self,
            SourceClass::Drone | SourceClass::Aeroplane | SourceClass::Bird
        )
    }

    pub fn is_drone(self) -> bool {
        self == SourceClass::Drone
    }

    pub fn name(self) -> &'static str {
        match self {
            SourceClass::Drone => "drone",
            SourceClass::Aeroplane => "aeroplane",
            SourceClass::Bird => "bird",
            SourceClass::Wind => "wind",
            SourceClass::Rain => "rain",
            SourceClass::Thunder => "thunder",
            SourceClass::Unknown => "unknown",
        }
    }
}

impl fmt::Display for SourceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SourceClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "drone" => Ok(SourceClass::Drone),
            "aeroplane" | "airplane" | "plane" => Ok(SourceClass::Aeroplane),
            "bird" => Ok(SourceClass::Bird),
            "wind" => Ok(SourceClass::Wind),
            "rain" => Ok(SourceClass::Rain),
            "thunder" => Ok(SourceClass::Thunder),
            "unknown" => Ok(SourceClass::Unknown),
            other => Err(Error::param(format!("unknown source class '{other}'"))),
        }
    }
}

/// A single-channel sampled waveform.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal<T> {
    samples: Vec<T>,
    sample_rate: u32,
    label: SourceClass,
}

impl<T: Real> Signal<T> {
    /// Builds a signal, checking that it is non-empty, finite and sampled at
    /// no less than [`MIN_SAMPLE_RATE`].
    pub fn new(samples: Vec<T>, sample_rate: u32, label: SourceClass) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::param("signal must contain at least one sample"));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::param(format!("sample {i} is not finite")));
        }
        if sample_rate < MIN_SAMPLE_RATE {
            return Err(Error::param(format!(
                "sample rate {sample_rate} Hz is below the {MIN_SAMPLE_RATE} Hz minimum"
            )));
        }
        Ok(Signal {
            samples,
            sample_rate,
            label,
        })
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<T> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn label(&self) -> SourceClass {
        self.label
    }

    pub fn with_label(mut self, label: SourceClass) -> Self {
        self.label = label;
        self
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Copy of the first `len` samples.
    pub fn truncated(&self, len: usize) -> Result<Self> {
        if len == 0 || len > self.samples.len() {
            return Err(Error::param(format!(
                "cannot take {len} samples from a signal of {}",
                self.samples.len()
            )));
        }
        Ok(Signal {
            samples: self.samples[..len].to_vec(),
            sample_rate: self.sample_rate,
            label: self.label,
        })
    }

    /// Multiplies every sample by `gain`.
    pub fn scaled(&self, gain: T) -> Result<Self> {
        Signal::new(
            self.samples.iter().map(|&v| v * gain).collect(),
            self.sample_rate,
            self.label,
        )
    }
}

/// Parameters of one synthetic source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub label: SourceClass,
    /// Fundamental frequency of the harmonic series (harmonic classes).
    #[serde(default)]
    pub fundamental_hz: f64,
    #[serde(default)]
    pub harmonic_count: u32,
    /// Pass band of the noise (noise classes), `(low, high)` in Hz.
    #[serde(default)]
    pub noise_band: (f64, f64),
    /// Amplitude-modulation rate. For rain this is the mean drop rate and for
    /// thunder the mean burst rate, both per second.
    #[serde(default)]
    pub am_rate_hz: f64,
    #[serde(default)]
    pub seed: u64,
}

impl SourceSpec {
    /// Built-in parameters for a class.
    pub fn preset(label: SourceClass, seed: u64) -> Self {
        let (fundamental_hz, harmonic_count, noise_band, am_rate_hz) = match label {
            SourceClass::Drone => (200.0, 8, (0.0, 0.0), 10.0),
            SourceClass::Aeroplane => (75.0, 16, (0.0, 0.0), 1.5),
            SourceClass::Bird => (3200.0, 3, (0.0, 0.0), 9.0),
            SourceClass::Wind => (0.0, 0, (20.0, 400.0), 4.0),
            SourceClass::Rain => (0.0, 0, (1500.0, 9000.0), 120.0),
            SourceClass::Thunder => (0.0, 0, (20.0, 180.0), 4.0),
            SourceClass::Unknown => (0.0, 0, (0.0, 0.0), 0.0),
        };
        SourceSpec {
            label,
            fundamental_hz,
            harmonic_count,
            noise_band,
            am_rate_hz,
            seed,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_fundamental(mut self, hz: f64) -> Self {
        self.fundamental_hz = hz;
        self
    }

    pub fn with_am_rate(mut self, hz: f64) -> Self {
        self.am_rate_hz = hz;
        self
    }

    /// Checks the field invariants for the spec's class.
    pub fn validate(&self) -> Result<()> {
        if self.label == SourceClass::Unknown {
            return Err(Error::param("cannot synthesize the 'unknown' class"));
        }
        if !(self.am_rate_hz.is_finite() && self.am_rate_hz >= 0.0) {
            return Err(Error::param(format!(
                "am_rate_hz must be finite and non-negative, got {}",
                self.am_rate_hz
            )));
        }
        if self.label.is_harmonic() {
            if !(self.fundamental_hz.is_finite() && self.fundamental_hz > 0.0) {
                return Err(Error::param(format!(
                    "{} needs fundamental_hz > 0, got {}",
                    self.label, self.fundamental_hz
                )));
            }
            if self.harmonic_count == 0 {
                return Err(Error::param(format!(
                    "{} needs harmonic_count >= 1",
                    self.label
                )));
            }
        } else {
            let (lo, hi) = self.noise_band;
            if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo < hi) {
                return Err(Error::param(format!(
                    "{} needs noise_band low < high, got ({lo}, {hi})",
                    self.label
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signal_rejects_empty_nonfinite_and_low_rate() {
        assert!(Signal::<f64>::new(vec![], 22050, SourceClass::Unknown).is_err());
        assert!(Signal::new(vec![0.0, f64::NAN], 22050, SourceClass::Unknown).is_err());
        assert!(Signal::new(vec![0.0f64; 4], 4000, SourceClass::Unknown).is_err());
        assert!(Signal::new(vec![0.0f32; 4], 8000, SourceClass::Unknown).is_ok());
    }

    #[test]
    fn class_names_round_trip() {
        for c in SourceClass::ALL {
            assert_eq!(c.name().parse::<SourceClass>().unwrap(), c);
        }
        assert!("dog".parse::<SourceClass>().is_err());
    }

    #[test]
    fn presets_validate() {
        for c in SourceClass::ALL {
            SourceSpec::preset(c, 0).validate().unwrap();
        }
        assert!(SourceSpec::preset(SourceClass::Unknown, 0)
            .validate()
            .is_err());
    }

    #[test]
    fn invalid_fields_are_rejected() {
        let s = SourceSpec::preset(SourceClass::Drone, 1).with_fundamental(0.0);
        assert!(s.validate().is_err());
        let mut w = SourceSpec::preset(SourceClass::Wind, 1);
        w.noise_band = (400.0, 20.0);
        assert!(w.validate().is_err());
    }
}
