//! End-to-end detection study over synthetic trials.
//!
//! Each trial synthesises one source per configured spec, mixes them, and for
//! every block length separates the leading block, labels each separated
//! channel by aligning it to the known sources, and extracts features. Trials
//! are then split into training and test sets, and every (block length,
//! feature method, classifier) cell is trained and scored.

mod report;

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{ClassifierConfig, ClassifierKind, Detection, TrainedClassifier};
use crate::error::{Error, Result};
use crate::fastica::{self, FastIcaConfig};
use crate::features::{FeatureExtractor, FeatureMethod, FeatureVector};
use crate::metrics::{self, Confusion};
use crate::mixing::{self, random_mixing_matrix, MixingModel};
use crate::rng;
use crate::signals::{self, Signal, SourceClass, SourceSpec, DEFAULT_SAMPLE_RATE};

pub use report::{reference_accuracy, render, ReportFormat, REFERENCE_TABLE};

/// Largest tolerated fraction of failed trials.
pub const FAILED_TRIAL_BUDGET: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MixingKind {
    /// Fresh random matrix per trial.
    #[default]
    Random,
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub block_lengths: Vec<usize>,
    pub trials_per_length: usize,
    pub source_specs: Vec<SourceSpec>,
    pub train_fraction: f64,
    pub seed: u64,
    pub methods: Vec<FeatureMethod>,
    pub classifiers: Vec<ClassifierKind>,
    pub sample_rate: u32,
    pub mixing: MixingKind,
    /// Relative range of the per-trial random change of harmonic fundamentals.
    pub fundamental_jitter: f64,
    pub fastica: FastIcaConfig,
    pub classifier: ClassifierConfig,
    /// Records wall-clock stage times; off by default so reports are reproducible byte for byte.
    pub record_timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let drones = [140.0, 170.0, 200.0, 240.0, 280.0]
            .into_iter()
            .map(|f| SourceSpec::preset(SourceClass::Drone, 0).with_fundamental(f));
        let others = [
            SourceClass::Aeroplane,
            SourceClass::Bird,
            SourceClass::Wind,
            SourceClass::Rain,
            SourceClass::Thunder,
        ]
        .into_iter()
        .map(|c| SourceSpec::preset(c, 0));
        ExperimentConfig {
            block_lengths: vec![1000, 4000, 7000, 10000],
            trials_per_length: 50,
            source_specs: drones.chain(others).collect(),
            train_fraction: 0.7,
            seed: 1,
            methods: FeatureMethod::ALL.to_vec(),
            classifiers: ClassifierKind::ALL.to_vec(),
            sample_rate: DEFAULT_SAMPLE_RATE,
            mixing: MixingKind::Random,
            fundamental_jitter: 0.15,
            fastica: FastIcaConfig::default(),
            classifier: ClassifierConfig::default(),
            record_timing: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let j = self.source_specs.len();
        if j < 2 {
            return Err(Error::param("an experiment needs at least two sources"));
        }
        if !self.source_specs.iter().any(|s| s.label.is_drone()) {
            return Err(Error::param("source_specs must include at least one drone"));
        }
        if !self.source_specs.iter().any(|s| !s.label.is_drone()) {
            return Err(Error::param(
                "source_specs must include at least one non-drone source",
            ));
        }
        for (i, s) in self.source_specs.iter().enumerate() {
            s.validate()
                .map_err(|e| Error::param(format!("source_specs[{i}]: {e}")))?;
        }
        if self.block_lengths.is_empty() {
            return Err(Error::param("block_lengths is empty"));
        }
        if let Some(l) = self.block_lengths.iter().find(|&&l| l < 2 * j) {
            return Err(Error::param(format!(
                "block length {l} is shorter than twice the {j} sources"
            )));
        }
        if self.trials_per_length == 0 {
            return Err(Error::param("trials_per_length must be at least 1"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::param(format!(
                "train_fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        if self.methods.is_empty() || self.classifiers.is_empty() {
            return Err(Error::param("methods and classifiers must be non-empty"));
        }
        if !(0.0..1.0).contains(&self.fundamental_jitter) {
            return Err(Error::param(format!(
                "fundamental_jitter must lie in [0, 1), got {}",
                self.fundamental_jitter
            )));
        }
        self.fastica.validate()?;
        Ok(())
    }

    /// Block lengths in ascending order without duplicates.
    fn lengths(&self) -> Vec<usize> {
        let mut l = self.block_lengths.clone();
        l.sort_unstable();
        l.dedup();
        l
    }
}

pub use report::{Cell, ExperimentReport, FailedTrial, Protocol, SirRow, Timing};

/// Separation outcome and features of one block of one trial.
#[derive(Debug, Clone)]
struct BlockOutcome {
    mean_sir_db: f64,
    converged: bool,
    iterations: usize,
    /// `features[m][channel]` for configured method `m`.
    features: Vec<Vec<FeatureVector<f64>>>,
}

#[derive(Debug, Clone)]
struct TrialOutcome {
    /// One entry per configured block length, ascending.
    blocks: Vec<BlockOutcome>,
    timing: Timing,
}

/// Per-trial source specs with fresh seeds and jittered fundamentals.
pub fn trial_specs(config: &ExperimentConfig, trial: usize) -> Vec<SourceSpec> {
    let trial_seed = rng::substream_seed(config.seed, "trial", trial as u64);
    let mut jitter = rng::substream(trial_seed, "jitter", 0);
    config
        .source_specs
        .iter()
        .enumerate()
        .map(|(j, s)| {
            let mut spec = s
                .clone()
                .with_seed(rng::substream_seed(trial_seed, "source", j as u64));
            let u: f64 = jitter.random_range(-1.0..=1.0);
            if spec.label.is_harmonic() && config.fundamental_jitter > 0.0 {
                spec =
                    spec.with_fundamental(s.fundamental_hz * (1.0 + config.fundamental_jitter * u));
            }
            spec
        })
        .collect()
}

fn run_trial(config: &ExperimentConfig, lengths: &[usize], trial: usize) -> Result<TrialOutcome> {
    let mut timing = Timing::default();
    let trial_seed = rng::substream_seed(config.seed, "trial", trial as u64);
    let fs = config.sample_rate;
    let max_len = *lengths.last().expect("validated non-empty");

    let t0 = Instant::now();
    let specs = trial_specs(config, trial);
    let sources = specs
        .iter()
        .map(|s| signals::synthesize::<f64>(s, max_len as f64 / fs as f64, fs))
        .collect::<Result<Vec<_>>>()?;
    let model = match config.mixing {
        MixingKind::Random => {
            random_mixing_matrix(specs.len(), rng::substream_seed(trial_seed, "mixing", 0))?
        }
        MixingKind::Identity => MixingModel::identity(specs.len()),
    };
    let full = mixing::mix(&sources, &model)?;
    timing.synthesis_s += t0.elapsed().as_secs_f64();

    let mut extractor = FeatureExtractor::new(fs);
    let mut blocks = Vec::with_capacity(lengths.len());
    for &len in lengths {
        let t1 = Instant::now();
        let block = full.head(len)?;
        let ica = FastIcaConfig {
            seed: rng::substream_seed(trial_seed, "fastica", len as u64),
            ..config.fastica.clone()
        };
        let sep = fastica::separate(&block, &ica)?;
        let truth = &block.truth().expect("mixed from known sources").sources;
        let score = metrics::score_separation(&sep.sources, truth)?;
        timing.separation_s += t1.elapsed().as_secs_f64();

        let t2 = Instant::now();
        // label each separated channel with the class of the source it aligns to
        let mut classes = vec![SourceClass::Unknown; specs.len()];
        for (i, &e) in score.alignment.permutation.iter().enumerate() {
            classes[e] = specs[i].label;
        }
        let mut features = vec![Vec::with_capacity(specs.len()); config.methods.len()];
        for (e, row) in sep.sources.outer_iter().enumerate() {
            let signal = Signal::new(row.to_vec(), fs, classes[e])?;
            for (m, v) in extractor
                .extract_all(&signal, &config.methods)?
                .into_iter()
                .enumerate()
            {
                features[m].push(v);
            }
        }
        timing.features_s += t2.elapsed().as_secs_f64();
        blocks.push(BlockOutcome {
            mean_sir_db: score.mean_sir_db,
            converged: sep.converged,
            iterations: sep.iterations_used,
            features,
        });
    }
    Ok(TrialOutcome { blocks, timing })
}

/// Trial indices for training and testing, split at trial granularity.
fn split(config: &ExperimentConfig, ok: &[usize]) -> (Vec<usize>, Vec<usize>) {
    if ok.len() < 2 {
        return (ok.to_vec(), Vec::new());
    }
    let mut order = ok.to_vec();
    order.shuffle(&mut rng::substream(config.seed, "split", 0));
    let n_train =
        ((ok.len() as f64 * config.train_fraction).round() as usize).clamp(1, ok.len() - 1);
    let mut train = order[..n_train].to_vec();
    let mut test = order[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// Runs the full study described by `config`.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let lengths = config.lengths();
    let trials = config.trials_per_length;
    let outcomes: Vec<Result<TrialOutcome>> = (0..trials)
        .into_par_iter()
        .map(|t| run_trial(config, &lengths, t))
        .collect();

    let mut failed = Vec::new();
    let mut ok = Vec::new();
    for (t, o) in outcomes.iter().enumerate() {
        match o {
            Ok(_) => ok.push(t),
            Err(e) => {
                log::warn!("trial {t} failed: {e}");
                failed.push(FailedTrial {
                    trial: t,
                    error: e.to_string(),
                });
            }
        }
    }
    if failed.len() as f64 > FAILED_TRIAL_BUDGET * trials as f64 {
        return Err(Error::Experiment(format!(
            "{} of {trials} trials failed (budget {:.0}%); first failure: trial {}: {}",
            failed.len(),
            FAILED_TRIAL_BUDGET * 100.0,
            failed[0].trial,
            failed[0].error
        )));
    }
    let done: Vec<&TrialOutcome> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
    let by_trial = |t: usize| outcomes[t].as_ref().expect("successful trial");

    let sir = lengths
        .iter()
        .enumerate()
        .map(|(li, &len)| {
            let n = done.len().max(1) as f64;
            SirRow {
                block_length: len,
                mean_sir_db: done.iter().map(|o| o.blocks[li].mean_sir_db).sum::<f64>() / n,
                converged_fraction: done.iter().filter(|o| o.blocks[li].converged).count() as f64
                    / n,
                mean_iterations: done
                    .iter()
                    .map(|o| o.blocks[li].iterations as f64)
                    .sum::<f64>()
                    / n,
                trial_sir_db: done.iter().map(|o| o.blocks[li].mean_sir_db).collect(),
            }
        })
        .collect();

    let (train, test) = split(config, &ok);
    let t_class = Instant::now();
    let mut cells = Vec::new();
    for (li, &len) in lengths.iter().enumerate() {
        for (mi, &method) in config.methods.iter().enumerate() {
            let gather = |ts: &[usize]| -> Vec<FeatureVector<f64>> {
                ts.iter()
                    .flat_map(|&t| by_trial(t).blocks[li].features[mi].iter().cloned())
                    .collect()
            };
            let train_set = gather(&train);
            for &kind in &config.classifiers {
                cells.push(evaluate_cell(
                    config,
                    len,
                    method,
                    kind,
                    &train_set,
                    &test,
                    |t| &by_trial(t).blocks[li].features[mi],
                ));
            }
        }
    }
    let classification_s = t_class.elapsed().as_secs_f64();

    let timing = config.record_timing.then(|| {
        let mut total = done.iter().fold(Timing::default(), |mut acc, o| {
            acc.synthesis_s += o.timing.synthesis_s;
            acc.separation_s += o.timing.separation_s;
            acc.features_s += o.timing.features_s;
            acc
        });
        total.classification_s = classification_s;
        total
    });

    Ok(ExperimentReport {
        config: config.clone(),
        protocol: Protocol {
            trials,
            train_trials: train,
            test_trials: test,
            failed_trials: failed,
            trial_seeds: (0..trials)
                .map(|t| rng::substream_seed(config.seed, "trial", t as u64))
                .collect(),
        },
        sir,
        cells,
        timing,
    })
}

fn evaluate_cell<'a>(
    config: &ExperimentConfig,
    len: usize,
    method: FeatureMethod,
    kind: ClassifierKind,
    train_set: &[FeatureVector<f64>],
    test: &[usize],
    test_vectors: impl Fn(usize) -> &'a Vec<FeatureVector<f64>>,
) -> Cell {
    let mut cell = Cell {
        block_length: len,
        method,
        classifier: kind,
        accuracy: None,
        confusion: Confusion::default(),
        drone_trials_detected: None,
        error: None,
    };
    if test.is_empty() {
        cell.error = Some("no test trials (need at least two successful trials)".into());
        return cell;
    }
    let model = match TrainedClassifier::train(kind, train_set, &config.classifier) {
        Ok(m) => m,
        Err(e) => {
            log::warn!("L={len} {method} {kind}: {e}");
            cell.error = Some(e.to_string());
            return cell;
        }
    };
    let mut drone_trials = 0usize;
    let mut detected_trials = 0usize;
    for &t in test {
        let mut all_found = true;
        let mut any_drone = false;
        for v in test_vectors(t) {
            let truth = v.detection().expect("channels are labelled by alignment");
            let pred = match model.predict(v) {
                Ok(p) => p,
                Err(e) => {
                    cell.error = Some(e.to_string());
                    return cell;
                }
            };
            match (pred, truth) {
                (Detection::Drone, Detection::Drone) => cell.confusion.true_positive += 1,
                (Detection::Drone, Detection::NonDrone) => cell.confusion.false_positive += 1,
                (Detection::NonDrone, Detection::NonDrone) => cell.confusion.true_negative += 1,
                (Detection::NonDrone, Detection::Drone) => cell.confusion.false_negative += 1,
            }
            if truth.is_drone() {
                any_drone = true;
                all_found &= pred.is_drone();
            }
        }
        if any_drone {
            drone_trials += 1;
            detected_trials += all_found as usize;
        }
    }
    cell.accuracy = Some(cell.confusion.percent());
    cell.drone_trials_detected =
        (drone_trials > 0).then(|| detected_trials as f64 / drone_trials as f64);
    cell
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            block_lengths: vec![1000, 2000],
            trials_per_length: 4,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn default_config_is_valid_and_balanced() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        let drones = c.source_specs.iter().filter(|s| s.label.is_drone()).count();
        assert_eq!(2 * drones, c.source_specs.len());
    }

    #[test]
    fn invalid_configs() {
        let mut c = small();
        c.train_fraction = 1.0;
        assert!(c.validate().is_err());
        let mut c = small();
        c.block_lengths = vec![10];
        assert!(c.validate().is_err());
        let mut c = small();
        c.source_specs.retain(|s| !s.label.is_drone());
        assert!(c.validate().is_err());
    }

    #[test]
    fn split_is_disjoint_and_covers_trials() {
        let c = ExperimentConfig {
            trials_per_length: 10,
            ..small()
        };
        let ok: Vec<usize> = (0..10).collect();
        let (a, b) = split(&c, &ok);
        assert_eq!(a.len(), 7);
        assert_eq!(b.len(), 3);
        assert!(a.iter().all(|t| !b.contains(t)));
    }

    #[test]
    fn trial_specs_vary_by_trial() {
        let c = small();
        let a = trial_specs(&c, 0);
        let b = trial_specs(&c, 1);
        assert_ne!(a[0].seed, b[0].seed);
        assert_ne!(a[0].fundamental_hz, b[0].fundamental_hz);
        assert_eq!(a, trial_specs(&c, 0));
    }

    #[test]
    fn small_run_has_every_cell() {
        let c = small();
        let r = run(&c).unwrap();
        assert_eq!(r.cells.len(), 2 * 3 * 2);
        assert_eq!(r.sir.len(), 2);
        assert!(r.cells.iter().all(|c| c.accuracy.is_some()));
        assert!(r.timing.is_none());
    }
}
