//! Feature extraction: octave-band PSD, octave-band RMS and MFCC vectors.

pub mod filterbank;
pub mod mfcc;
pub mod spectral;

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classify::Detection;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::signals::{Signal, SourceClass};

pub use filterbank::{
    octave_band_features, BandPass, OctaveBand, OctaveFeatures, OctaveFilterBank, OCTAVE_BANDS,
};
pub use mfcc::{build_mel_bank, mfcc, MelFilterBank};
pub use spectral::{periodogram, Psd, Window};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeatureMethod {
    /// Mean PSD in each of the nine octave bands.
    #[serde(rename = "psd")]
    Psd9,
    /// RMS of the band-filtered signal in each of the nine octave bands.
    #[serde(rename = "rms-psd")]
    RmsPsd9,
    /// Cepstral coefficients 2 to 13.
    #[serde(rename = "mfcc")]
    Mfcc12,
}

impl FeatureMethod {
    pub const ALL: [FeatureMethod; 3] = [
        FeatureMethod::Psd9,
        FeatureMethod::RmsPsd9,
        FeatureMethod::Mfcc12,
    ];

    pub fn dimension(self) -> usize {
        match self {
            FeatureMethod::Psd9 | FeatureMethod::RmsPsd9 => OCTAVE_BANDS.len(),
            FeatureMethod::Mfcc12 => mfcc::COEFFICIENTS,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureMethod::Psd9 => "psd",
            FeatureMethod::RmsPsd9 => "rms-psd",
            FeatureMethod::Mfcc12 => "mfcc",
        }
    }

    /// Row label used in report tables.
    pub fn title(self) -> &'static str {
        match self {
            FeatureMethod::Psd9 => "PSD",
            FeatureMethod::RmsPsd9 => "RMS-PSD",
            FeatureMethod::Mfcc12 => "MFCC",
        }
    }
}

impl fmt::Display for FeatureMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "psd" | "psd9" => Ok(FeatureMethod::Psd9),
            "rms-psd" | "rmspsd" | "rmspsd9" | "rms" => Ok(FeatureMethod::RmsPsd9),
            "mfcc" | "mfcc12" => Ok(FeatureMethod::Mfcc12),
            other => Err(Error::param(format!(
                "unknown feature method '{other}' (expected psd, rms-psd or mfcc)"
            ))),
        }
    }
}

/// A labelled feature vector extracted from one block of one channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct FeatureVector<T> {
    pub method: FeatureMethod,
    pub label: SourceClass,
    pub block_length: usize,
    pub values: Vec<T>,
}

impl<T: Real> FeatureVector<T> {
    pub fn new(
        method: FeatureMethod,
        label: SourceClass,
        block_length: usize,
        values: Vec<T>,
    ) -> Result<Self> {
        if values.len() != method.dimension() {
            return Err(Error::param(format!(
                "{method} vectors have {} values, got {}",
                method.dimension(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::param(format!("feature value {i} is not finite")));
        }
        Ok(FeatureVector {
            method,
            label,
            block_length,
            values,
        })
    }

    /// Drone / non-drone target, or `None` when the class is unknown.
    pub fn detection(&self) -> Option<Detection> {
        match self.label {
            SourceClass::Unknown => None,
            c if c.is_drone() => Some(Detection::Drone),
            _ => Some(Detection::NonDrone),
        }
    }
}

/// Extracts features from signals of one sample rate, caching filter banks.
#[derive(Debug)]
pub struct FeatureExtractor {
    sample_rate: u32,
    octave: Option<OctaveFilterBank>,
    mel: HashMap<usize, MelFilterBank>,
}

impl FeatureExtractor {
    pub fn new(sample_rate: u32) -> Self {
        FeatureExtractor {
            sample_rate,
            octave: None,
            mel: HashMap::new(),
        }
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    fn octave_bank(&mut self) -> Result<&OctaveFilterBank> {
        if self.octave.is_none() {
            self.octave = Some(OctaveFilterBank::standard(self.sample_rate)?);
        }
        Ok(self.octave.as_ref().expect("initialised above"))
    }

    fn check_rate<T: Real>(&self, signal: &Signal<T>) -> Result<()> {
        if signal.sample_rate() != self.sample_rate {
            return Err(Error::param(format!(
                "extractor configured for {} Hz got a {} Hz signal",
                self.sample_rate,
                signal.sample_rate()
            )));
        }
        Ok(())
    }

    pub fn extract<T: Real>(
        &mut self,
        signal: &Signal<T>,
        method: FeatureMethod,
    ) -> Result<FeatureVector<T>> {
        Ok(self.extract_all(signal, &[method])?.remove(0))
    }

    /// One vector per requested method, in the order given.
    pub fn extract_all<T: Real>(
        &mut self,
        signal: &Signal<T>,
        methods: &[FeatureMethod],
    ) -> Result<Vec<FeatureVector<T>>> {
        self.check_rate(signal)?;
        let octave = if methods.iter().any(|m| *m != FeatureMethod::Mfcc12) {
            Some(self.octave_bank()?.features(signal.samples())?)
        } else {
            None
        };
        let len = signal.len();
        let mut out = Vec::with_capacity(methods.len());
        for &method in methods {
            let values = match method {
                FeatureMethod::Psd9 => octave.as_ref().expect("computed above").psd.clone(),
                FeatureMethod::RmsPsd9 => octave.as_ref().expect("computed above").rms.clone(),
                FeatureMethod::Mfcc12 => {
                    let fft = len.max(2).next_power_of_two();
                    if !self.mel.contains_key(&fft) {
                        self.mel
                            .insert(fft, mfcc::default_bank(self.sample_rate, len)?);
                    }
                    mfcc::mfcc(signal, &self.mel[&fft])?
                }
            };
            out.push(FeatureVector::new(method, signal.label(), len, values)?);
        }
        Ok(out)
    }
}

/// Extracts one feature vector with freshly built filter banks.
pub fn extract<T: Real>(signal: &Signal<T>, method: FeatureMethod) -> Result<FeatureVector<T>> {
    FeatureExtractor::new(signal.sample_rate()).extract(signal, method)
}

/// Writes vectors as CSV rows `method,label,block_length,v1,...`.
pub fn write_csv<T: Real, W: Write>(vectors: &[FeatureVector<T>], out: W) -> Result<()> {
    let width = vectors.iter().map(|v| v.values.len()).max().unwrap_or(0);
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
    let mut header = vec!["method".to_string(), "label".into(), "block_length".into()];
    header.extend((1..=width).map(|i| format!("v{i}")));
    w.write_record(&header)?;
    for v in vectors {
        let mut row = vec![
            v.method.name().to_string(),
            v.label.name().to_string(),
            v.block_length.to_string(),
        ];
        row.extend(v.values.iter().map(|x| format!("{:e}", x.as_f64())));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: Real, R: Read>(input: R) -> Result<Vec<FeatureVector<T>>> {
    let mut r = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let field = |k: usize| {
            rec.get(k).ok_or_else(|| {
                Error::param(format!("feature CSV line {line}: missing column {}", k + 1))
            })
        };
        let method: FeatureMethod = field(0)?.parse()?;
        let label: SourceClass = field(1)?
            .parse()
            .map_err(|e| Error::param(format!("feature CSV line {line}: {e}")))?;
        let block_length: usize = field(2)?
            .parse()
            .map_err(|e| Error::param(format!("feature CSV line {line}: block length: {e}")))?;
        let values =
            rec.iter()
                .skip(3)
                .map(|s| {
                    s.trim().parse::<f64>().map(T::of).map_err(|e| {
                        Error::param(format!("feature CSV line {line}: value '{s}': {e}"))
                    })
                })
                .collect::<Result<Vec<T>>>()?;
        out.push(
            FeatureVector::new(method, label, block_length, values)
                .map_err(|e| Error::param(format!("feature CSV line {line}: {e}")))?,
        );
    }
    Ok(out)
}
