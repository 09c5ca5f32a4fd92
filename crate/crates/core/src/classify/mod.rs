//! Binary drone / non-drone classifiers.

pub mod knn;
pub mod svm;

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureMethod, FeatureVector};
use crate::scalar::Real;

pub use knn::KnnModel;
pub use svm::{SvmConfig, SvmModel};

/// Binary decision; `Drone` corresponds to label `+1`, `NonDrone` to `−1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Detection {
    Drone,
    NonDrone,
}

impl Detection {
    pub fn from_sign(v: f64) -> Self {
        if v > 0.0 {
            Detection::Drone
        } else {
            Detection::NonDrone
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Detection::Drone => 1.0,
            Detection::NonDrone => -1.0,
        }
    }

    pub fn is_drone(self) -> bool {
        self == Detection::Drone
    }
}

impl fmt::Display for Detection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Detection::Drone => "drone",
            Detection::NonDrone => "non-drone",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Svm,
    Knn,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 2] = [ClassifierKind::Svm, ClassifierKind::Knn];

    pub fn title(self) -> &'static str {
        match self {
            ClassifierKind::Svm => "SVM",
            ClassifierKind::Knn => "KNN",
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassifierKind::Svm => "svm",
            ClassifierKind::Knn => "knn",
        })
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "svm" => Ok(ClassifierKind::Svm),
            "knn" => Ok(ClassifierKind::Knn),
            other => Err(Error::param(format!(
                "unknown classifier '{other}' (expected svm or knn)"
            ))),
        }
    }
}

/// Validates a supervised training set and returns it as an `n×p` matrix.
///
/// Requires matching lengths, a common non-zero dimension, finite values and
/// at least two examples of each class.
pub(crate) fn check_training_set<T: Real>(
    samples: &[Vec<T>],
    labels: &[Detection],
) -> Result<Array2<f64>> {
    if samples.len() != labels.len() {
        return Err(Error::param(format!(
            "{} samples for {} labels",
            samples.len(),
            labels.len()
        )));
    }
    let drones = labels.iter().filter(|l| l.is_drone()).count();
    let others = labels.len() - drones;
    if drones < 2 || others < 2 {
        return Err(Error::Training(format!(
            "need at least two examples of each class, got {drones} drone and {others} non-drone"
        )));
    }
    let p = samples[0].len();
    if p == 0 || samples.iter().any(|v| v.len() != p) {
        return Err(Error::param(
            "training vectors must share a non-zero dimension",
        ));
    }
    if samples.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::param("training vectors contain non-finite values"));
    }
    Ok(Array2::from_shape_fn((samples.len(), p), |(i, d)| {
        samples[i][d].as_f64()
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", bound = "T: Real")]
pub enum Model<T> {
    Svm(SvmModel<T>),
    Knn(KnnModel<T>),
}

/// A trained model together with the feature method it expects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct TrainedClassifier<T> {
    pub method: FeatureMethod,
    pub model: Model<T>,
}

/// Hyperparameters for either classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    pub svm: SvmConfig,
    pub k: usize,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            svm: SvmConfig::default(),
            k: knn::DEFAULT_K,
        }
    }
}

fn labelled<T: Real>(
    features: &[FeatureVector<T>],
) -> Result<(FeatureMethod, Vec<Vec<T>>, Vec<Detection>)> {
    let first = features
        .first()
        .ok_or_else(|| Error::Training("no training vectors".into()))?;
    let mut x = Vec::with_capacity(features.len());
    let mut y = Vec::with_capacity(features.len());
    for (i, f) in features.iter().enumerate() {
        if f.method != first.method {
            return Err(Error::param(format!(
                "training vector {i} uses {} features, expected {}",
                f.method, first.method
            )));
        }
        let label = f
            .detection()
            .ok_or_else(|| Error::Training(format!("training vector {i} has an unknown label")))?;
        x.push(f.values.clone());
        y.push(label);
    }
    Ok((first.method, x, y))
}

impl<T: Real> TrainedClassifier<T> {
    pub fn train(
        kind: ClassifierKind,
        features: &[FeatureVector<T>],
        config: &ClassifierConfig,
    ) -> Result<Self> {
        let (method, x, y) = labelled(features)?;
        let model = match kind {
            ClassifierKind::Svm => Model::Svm(svm::train(&x, &y, &config.svm)?),
            ClassifierKind::Knn => {
                check_training_set(&x, &y)?;
                Model::Knn(knn::train(&x, &y, config.k)?)
            }
        };
        Ok(TrainedClassifier { method, model })
    }

    pub fn kind(&self) -> ClassifierKind {
        match self.model {
            Model::Svm(_) => ClassifierKind::Svm,
            Model::Knn(_) => ClassifierKind::Knn,
        }
    }

    pub fn predict_values(&self, v: &[T]) -> Result<Detection> {
        match &self.model {
            Model::Svm(m) => Ok(m.predict(v)?.0),
            Model::Knn(m) => m.predict(v),
        }
    }

    pub fn predict(&self, v: &FeatureVector<T>) -> Result<Detection> {
        if v.method != self.method {
            return Err(Error::param(format!(
                "classifier trained on {} features given a {} vector",
                self.method, v.method
            )));
        }
        self.predict_values(&v.values)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}
