//! Drone detection from multi-microphone acoustic mixtures: FastICA source
//! separation, octave-band and MFCC features, and SVM / KNN classification.
//!
//! Numerical code is generic over [`Real`] (`f32` or `f64`); the aliases below
//! name the common instantiations.

// `!(x > 0.0)` is used on purpose so NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classify;
pub mod error;
pub mod experiment;
pub mod fastica;
pub mod features;
pub mod linalg;
pub mod metrics;
pub mod mixing;
pub mod rng;
pub mod scalar;
pub mod signals;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Signal = signals::Signal<f64>;
pub type MixedBlock = mixing::MixedBlock<f64>;
pub type MixingModel = mixing::MixingModel<f64>;
pub type SeparationResult = fastica::SeparationResult<f64>;
pub type FeatureVector = features::FeatureVector<f64>;
pub type TrainedClassifier = classify::TrainedClassifier<f64>;

pub type Signal32 = signals::Signal<f32>;
pub type MixedBlock32 = mixing::MixedBlock<f32>;
pub type MixingModel32 = mixing::MixingModel<f32>;
pub type SeparationResult32 = fastica::SeparationResult<f32>;
pub type FeatureVector32 = features::FeatureVector<f32>;
pub type TrainedClassifier32 = classify::TrainedClassifier<f32>;
