//! Instantaneous square mixing `X = A·S`.

use std::fs;
use std::path::Path;

use ndarray::{Array2, ArrayView1};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::rng;
use crate::scalar::Real;
use crate::signals::wav::{self, SampleFormat};
use crate::signals::{Signal, SourceClass};

/// Largest condition number accepted from the random generator.
pub const MAX_CONDITION: f64 = 100.0;

/// Square mixing matrix; row `j` holds the gains from every source into sensor `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct MixingModel<T> {
    a: Array2<T>,
}

impl<T: Real> MixingModel<T> {
    /// Wraps a square, finite, invertible matrix.
    pub fn new(a: Array2<T>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::param(format!(
                "mixing matrix must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if a.nrows() == 0 || a.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("mixing matrix must be non-empty and finite"));
        }
        let cond = linalg::condition_number(&a)?;
        if !cond.is_finite() {
            return Err(Error::Degenerate("mixing matrix is singular".into()));
        }
        Ok(MixingModel { a })
    }

    pub fn identity(n: usize) -> Self {
        MixingModel { a: Array2::eye(n) }
    }

    pub fn matrix(&self) -> &Array2<T> {
        &self.a
    }

    pub fn source_count(&self) -> usize {
        self.a.ncols()
    }

    pub fn sensor_count(&self) -> usize {
        self.a.nrows()
    }

    pub fn condition_number(&self) -> T {
        linalg::condition_number(&self.a).unwrap_or_else(|_| T::infinity())
    }

    pub fn inverse(&self) -> Result<Array2<T>> {
        linalg::inverse(&self.a)
    }
}

/// Random `n×n` mixing matrix with entries uniform in `[-1, 1]`, redrawn until
/// its condition number is at most [`MAX_CONDITION`].
pub fn random_mixing_matrix<T: Real>(n: usize, seed: u64) -> Result<MixingModel<T>> {
    if n < 2 {
        return Err(Error::param(format!("need at least 2 sources, got {n}")));
    }
    let mut rng = rng::substream(seed, "mixing-matrix", n as u64);
    loop {
        let a = Array2::from_shape_fn((n, n), |_| T::of(rng.random_range(-1.0..=1.0)));
        let cond = linalg::condition_number(&a)?;
        if cond.is_finite() && cond.as_f64() <= MAX_CONDITION {
            return Ok(MixingModel { a });
        }
    }
}

/// Ground truth attached to synthetic mixtures.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth<T> {
    pub model: MixingModel<T>,
    /// Source matrix `S`, one source per row.
    pub sources: Array2<T>,
    pub labels: Vec<SourceClass>,
}

/// A `J×L` block of sensor data.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedBlock<T> {
    x: Array2<T>,
    sample_rate: u32,
    truth: Option<Truth<T>>,
}

impl<T: Real> MixedBlock<T> {
    /// Wraps sensor data without ground truth. Requires `L ≥ 2·J` and finite entries.
    pub fn new(x: Array2<T>, sample_rate: u32) -> Result<Self> {
        validate_block(&x)?;
        Ok(MixedBlock {
            x,
            sample_rate,
            truth: None,
        })
    }

    pub fn data(&self) -> &Array2<T> {
        &self.x
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn truth(&self) -> Option<&Truth<T>> {
        self.truth.as_ref()
    }

    pub fn channel_count(&self) -> usize {
        self.x.nrows()
    }

    pub fn len(&self) -> usize {
        self.x.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.x.ncols() == 0
    }

    pub fn channel(&self, j: usize) -> ArrayView1<'_, T> {
        self.x.row(j)
    }

    /// The first `len` columns, truth included.
    pub fn head(&self, len: usize) -> Result<Self> {
        if len > self.len() {
            return Err(Error::param(format!(
                "block has {} samples, asked for {len}",
                self.len()
            )));
        }
        let x = self.x.slice(ndarray::s![.., ..len]).to_owned();
        validate_block(&x)?;
        let truth = self.truth.as_ref().map(|t| Truth {
            model: t.model.clone(),
            sources: t.sources.slice(ndarray::s![.., ..len]).to_owned(),
            labels: t.labels.clone(),
        });
        Ok(MixedBlock {
            x,
            sample_rate: self.sample_rate,
            truth,
        })
    }

    /// Writes `mixed.wav` (float32, one channel per sensor) and `mixed.json`
    /// into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let rows: Vec<Vec<T>> = self.x.outer_iter().map(|r| r.to_vec()).collect();
        wav::write_wav(
            dir.join(MIXED_WAV),
            &rows,
            self.sample_rate,
            SampleFormat::Float32,
        )?;
        let sidecar = Sidecar {
            sample_rate: self.sample_rate,
            channels: self.channel_count(),
            length: self.len(),
            mixing_matrix: self.truth.as_ref().map(|t| {
                t.model
                    .matrix()
                    .outer_iter()
                    .map(|r| r.iter().map(|v| v.as_f64()).collect())
                    .collect()
            }),
            labels: self.truth.as_ref().map(|t| t.labels.clone()),
        };
        fs::write(
            dir.join(MIXED_JSON),
            serde_json::to_string_pretty(&sidecar)? + "\n",
        )?;
        Ok(())
    }

    /// Reads a block written by [`MixedBlock::save`]. The sidecar is optional.
    /// When it records both the mixing matrix and the labels, the sources are
    /// recovered as `A⁻¹·X` and attached as ground truth.
    pub fn load(dir: impl AsRef<Path>) -> Result<(Self, Option<Sidecar>)> {
        let dir = dir.as_ref();
        let data: wav::WavData<T> = wav::read_wav(dir.join(MIXED_WAV))?;
        let sidecar = match fs::read_to_string(dir.join(MIXED_JSON)) {
            Ok(s) => Some(serde_json::from_str::<Sidecar>(&s)?),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
            Err(e) => return Err(e.into()),
        };
        let j = data.channels.len();
        let l = data.channels[0].len();
        let x = Array2::from_shape_fn((j, l), |(r, c)| data.channels[r][c]);
        let mut block = MixedBlock::new(x, data.sample_rate)?;
        if let Some(side) = &sidecar {
            if side.channels != j || side.length != l || side.sample_rate != data.sample_rate {
                return Err(Error::param(format!(
                    "{MIXED_JSON} describes {} channels x {} samples at {} Hz, {MIXED_WAV} holds {j} x {l} at {} Hz",
                    side.channels, side.length, side.sample_rate, data.sample_rate
                )));
            }
            if let (Some(rows), Some(labels)) = (&side.mixing_matrix, &side.labels) {
                if rows.len() != j || rows.iter().any(|r| r.len() != j) || labels.len() != j {
                    return Err(Error::param(format!(
                        "{MIXED_JSON}: mixing matrix and labels must cover {j} channels"
                    )));
                }
                let model =
                    MixingModel::new(Array2::from_shape_fn((j, j), |(r, c)| T::of(rows[r][c])))?;
                let sources = model.inverse()?.dot(&block.x);
                block.truth = Some(Truth {
                    model,
                    sources,
                    labels: labels.clone(),
                });
            }
        }
        Ok((block, sidecar))
    }
}

pub const MIXED_WAV: &str = "mixed.wav";
pub const MIXED_JSON: &str = "mixed.json";

/// JSON sidecar stored next to a mixed block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub sample_rate: u32,
    pub channels: usize,
    pub length: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixing_matrix: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<SourceClass>>,
}

fn validate_block<T: Real>(x: &Array2<T>) -> Result<()> {
    let (j, l) = x.dim();
    if j == 0 {
        return Err(Error::param("block has no channels"));
    }
    if l < 2 * j {
        return Err(Error::param(format!(
            "block of {l} samples is too short for {j} channels (need at least {})",
            2 * j
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::param("block contains non-finite samples"));
    }
    Ok(())
}

/// Stacks `sources` row-wise into `S` and returns `X = A·S` with truth attached.
pub fn mix<T: Real>(sources: &[Signal<T>], model: &MixingModel<T>) -> Result<MixedBlock<T>> {
    if sources.len() != model.source_count() {
        return Err(Error::param(format!(
            "model mixes {} sources, got {}",
            model.source_count(),
            sources.len()
        )));
    }
    let len = sources[0].len();
    let rate = sources[0].sample_rate();
    for (i, s) in sources.iter().enumerate() {
        if s.len() != len {
            return Err(Error::param(format!(
                "source {i} has {} samples, source 0 has {len}",
                s.len()
            )));
        }
        if s.sample_rate() != rate {
            return Err(Error::param(format!(
                "source {i} is sampled at {} Hz, source 0 at {rate} Hz",
                s.sample_rate()
            )));
        }
    }
    let s = Array2::from_shape_fn((sources.len(), len), |(i, n)| sources[i].samples()[n]);
    let x = model.matrix().dot(&s);
    validate_block(&x)?;
    Ok(MixedBlock {
        x,
        sample_rate: rate,
        truth: Some(Truth {
            model: model.clone(),
            sources: s,
            labels: sources.iter().map(|s| s.label()).collect(),
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn sig(v: Vec<f64>) -> Signal<f64> {
        Signal::new(v, 8000, SourceClass::Unknown).unwrap()
    }

    #[test]
    fn identity_mix_copies_sources() {
        let a = sig(vec![1.0, -2.0, 3.0, 0.5]);
        let b = sig(vec![0.0, 1.0, 0.25, -1.0]);
        let m = mix(&[a.clone(), b.clone()], &MixingModel::identity(2)).unwrap();
        assert_eq!(m.channel(0).to_vec(), a.samples());
        assert_eq!(m.channel(1).to_vec(), b.samples());
    }

    #[test]
    fn diagonal_scaling() {
        let a = sig(vec![1.0, -2.0, 3.0, 0.5]);
        let b = sig(vec![0.0, 1.0, 0.25, -1.0]);
        let model = MixingModel::new(array![[2.0, 0.0], [0.0, 3.0]]).unwrap();
        let m = mix(&[a.clone(), b.clone()], &model).unwrap();
        let want0: Vec<f64> = a.samples().iter().map(|v| 2.0 * v).collect();
        let want1: Vec<f64> = b.samples().iter().map(|v| 3.0 * v).collect();
        assert_eq!(m.channel(0).to_vec(), want0);
        assert_eq!(m.channel(1).to_vec(), want1);
    }

    #[test]
    fn mismatches_are_rejected() {
        let a = sig(vec![1.0; 8]);
        let b = sig(vec![1.0; 9]);
        let model = MixingModel::<f64>::identity(2);
        assert!(mix(&[a.clone(), b], &model).is_err());
        assert!(mix(std::slice::from_ref(&a), &model).is_err());
        let c = Signal::new(vec![1.0; 8], 16000, SourceClass::Unknown).unwrap();
        assert!(mix(&[a, c], &model).is_err());
    }

    #[test]
    fn random_matrix_contract() {
        assert!(random_mixing_matrix::<f64>(1, 0).is_err());
        let m = random_mixing_matrix::<f64>(6, 1).unwrap();
        assert_eq!(m.matrix().dim(), (6, 6));
        assert!(m.condition_number() <= MAX_CONDITION);
        assert!(m.matrix().iter().all(|v| v.abs() <= 1.0));
        let a = random_mixing_matrix::<f64>(2, 5).unwrap();
        let b = random_mixing_matrix::<f64>(2, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn short_block_rejected() {
        assert!(MixedBlock::new(Array2::<f64>::zeros((3, 5)), 8000).is_err());
        assert!(MixedBlock::new(Array2::<f64>::zeros((3, 6)), 8000).is_ok());
    }

    #[test]
    fn save_and_load() {
        let a = sig((0..64).map(|i| (i as f64 * 0.3).sin()).collect());
        let b = sig((0..64).map(|i| (i as f64 * 0.11).cos()).collect());
        let model = random_mixing_matrix::<f64>(2, 3).unwrap();
        let m = mix(&[a, b], &model).unwrap();
        let dir = tempfile::tempdir().unwrap();
        m.save(dir.path()).unwrap();
        let (back, side) = MixedBlock::<f64>::load(dir.path()).unwrap();
        let side = side.unwrap();
        assert_eq!(side.channels, 2);
        assert_eq!(side.labels.unwrap().len(), 2);
        for (x, y) in m.data().iter().zip(back.data()) {
            assert!((x - y).abs() < 1e-6);
        }
        let truth = back.truth().unwrap();
        for (x, y) in m.truth().unwrap().sources.iter().zip(&truth.sources) {
            assert!((x - y).abs() < 1e-5);
        }
    }
}
