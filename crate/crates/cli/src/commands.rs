use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use acousep_core::classify::{svm::SvmConfig, ClassifierConfig, TrainedClassifier};
use acousep_core::experiment::{self, ExperimentConfig};
use acousep_core::fastica::{self, Contrast, FastIcaConfig};
use acousep_core::features::{self, FeatureExtractor, FeatureMethod, FeatureVector};
use acousep_core::metrics;
use acousep_core::mixing::{self, random_mixing_matrix, MixedBlock, MixingModel};
use acousep_core::rng::substream_seed;
use acousep_core::signals::wav::{self, SampleFormat};
use acousep_core::signals::{synthesize, Signal, SourceClass, SourceSpec};
use acousep_core::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::args::*;
use crate::output::OutputRoot;

/// Diagnostics written next to the separated channels.
pub const SEPARATION_JSON: &str = "separation.json";

pub struct Context {
    pub seed: u64,
    pub explicit_seed: bool,
    pub out: OutputRoot,
}

pub fn run(cmd: &Command, ctx: &Context) -> Result<()> {
    match cmd {
        Command::Synth(a) => synth(a, ctx),
        Command::Mix(a) => mix(a, ctx),
        Command::Separate(a) => separate(a, ctx),
        Command::Features(a) => extract_features(a, ctx),
        Command::Train(a) => train(a, ctx),
        Command::Predict(a) => predict(a, ctx),
        Command::Experiment(a) => run_experiment(a, ctx),
    }
}

fn synth(a: &SynthArgs, ctx: &Context) -> Result<()> {
    let mut spec = SourceSpec::preset(a.class, substream_seed(ctx.seed, "synth", 0));
    if let Some(f) = a.fundamental {
        spec = spec.with_fundamental(f);
    }
    if let Some(r) = a.am_rate {
        spec = spec.with_am_rate(r);
    }
    let signal: Signal<f64> = synthesize(&spec, a.duration, a.rate)?;
    let path = ctx.out.file(&a.output)?;
    let format = match a.encoding {
        WavEncoding::Pcm16 => SampleFormat::Pcm16,
        WavEncoding::Float32 => SampleFormat::Float32,
    };
    wav::write_wav(&path, &[signal.samples()], a.rate, format)?;
    log::info!(
        "wrote {} samples of {} to {}",
        signal.len(),
        a.class,
        path.display()
    );
    Ok(())
}

/// Class named by the leading letters of a file stem, e.g. `drone2.wav`.
fn class_from_stem(path: &Path) -> SourceClass {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or_default();
    let prefix: String = stem
        .chars()
        .take_while(|c| c.is_ascii_alphabetic())
        .collect();
    prefix.parse().unwrap_or(SourceClass::Unknown)
}

fn mix(a: &MixArgs, ctx: &Context) -> Result<()> {
    if a.inputs.len() < 2 {
        return Err(Error::Parameter("mixing needs at least two inputs".into()));
    }
    if !a.labels.is_empty() && a.labels.len() != a.inputs.len() {
        return Err(Error::Parameter(format!(
            "{} labels given for {} inputs",
            a.labels.len(),
            a.inputs.len()
        )));
    }
    let mut sources = Vec::with_capacity(a.inputs.len());
    for (i, p) in a.inputs.iter().enumerate() {
        let label = a
            .labels
            .get(i)
            .copied()
            .unwrap_or_else(|| class_from_stem(p));
        let s = wav::load_wav::<f64>(p).map_err(|e| in_file(p, e))?;
        sources.push(s.with_label(label));
    }
    let len = sources
        .iter()
        .map(|s| s.len())
        .min()
        .expect("at least two inputs");
    if sources.iter().any(|s| s.len() != len) {
        log::warn!("inputs differ in length; truncating all to {len} samples");
        sources = sources
            .iter()
            .map(|s| s.truncated(len))
            .collect::<Result<_>>()?;
    }
    let model = if a.identity {
        MixingModel::identity(sources.len())
    } else {
        random_mixing_matrix(sources.len(), substream_seed(ctx.seed, "mix", 0))?
    };
    let block = mixing::mix(&sources, &model)?;
    let dir = ctx.out.dir(&a.output)?;
    block.save(&dir)?;
    log::info!(
        "mixed {} sources (condition number {:.2}) into {}",
        sources.len(),
        model.condition_number(),
        dir.display()
    );
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SeparationDiagnostics {
    pub sample_rate: u32,
    pub length: usize,
    pub contrast: Contrast,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub seed: u64,
    pub iterations_used: usize,
    pub converged: bool,
    pub final_change: f64,
    /// Unmixing matrix acting on centred sensor data.
    pub unmixing: Vec<Vec<f64>>,
    /// Orthonormal unmixing matrix acting on whitened data.
    pub rotation: Vec<Vec<f64>>,
    pub whitening: Vec<Vec<f64>>,
    pub channel_means: Vec<f64>,
    pub channels: Vec<ChannelInfo>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_sir_db: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ChannelInfo {
    pub file: String,
    /// Class of the known source this channel aligns to.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<SourceClass>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sir_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correlation: Option<f64>,
}

fn rows(m: &ndarray::Array2<f64>) -> Vec<Vec<f64>> {
    m.outer_iter().map(|r| r.to_vec()).collect()
}

fn separate(a: &SeparateArgs, ctx: &Context) -> Result<()> {
    let (block, _) = MixedBlock::<f64>::load(&a.input).map_err(|e| in_file(&a.input, e))?;
    let cfg = FastIcaConfig {
        contrast: a.contrast,
        max_iterations: a.max_iter,
        tolerance: a.tolerance,
        seed: substream_seed(ctx.seed, "separate", 0),
    };
    let sep = fastica::separate(&block, &cfg)?;
    if !sep.converged {
        log::warn!(
            "FastICA stopped after {} iterations without converging (change {:e})",
            sep.iterations_used,
            sep.final_change
        );
    }
    let mut channels: Vec<ChannelInfo> = (0..sep.sources.nrows())
        .map(|e| ChannelInfo {
            file: format!("source_{e:02}.wav"),
            label: None,
            source: None,
            sir_db: None,
            correlation: None,
        })
        .collect();
    let mut mean_sir_db = None;
    if let Some(truth) = block.truth() {
        let score = metrics::score_separation(&sep.sources, &truth.sources)?;
        for (i, &e) in score.alignment.permutation.iter().enumerate() {
            let c = &mut channels[e];
            c.label = Some(truth.labels[i]);
            c.source = Some(i);
            c.sir_db = Some(score.sir_db[i]);
            c.correlation = Some(score.alignment.correlations[i]);
        }
        mean_sir_db = Some(score.mean_sir_db);
        log::info!("mean aligned SIR {:.2} dB", score.mean_sir_db);
    }
    let dir = ctx.out.dir(&a.output)?;
    for (row, c) in sep.sources.outer_iter().zip(&channels) {
        wav::write_wav(
            dir.join(&c.file),
            &[row.to_vec()],
            block.sample_rate(),
            SampleFormat::Float32,
        )?;
    }
    let diag = SeparationDiagnostics {
        sample_rate: block.sample_rate(),
        length: block.len(),
        contrast: cfg.contrast,
        tolerance: cfg.tolerance,
        max_iterations: cfg.max_iterations,
        seed: cfg.seed,
        iterations_used: sep.iterations_used,
        converged: sep.converged,
        final_change: sep.final_change,
        unmixing: rows(&sep.unmixing),
        rotation: rows(&sep.rotation),
        whitening: rows(&sep.whitener.transform),
        channel_means: sep.whitener.mean.to_vec(),
        channels,
        mean_sir_db,
    };
    write_json(&dir.join(SEPARATION_JSON), &diag)?;
    log::info!(
        "separated {} channels in {} iterations into {}",
        block.channel_count(),
        sep.iterations_used,
        dir.display()
    );
    Ok(())
}

fn in_file(path: &Path, e: Error) -> Error {
    match e {
        Error::Format { offset, message } => Error::Format {
            offset,
            message: format!("{}: {message}", path.display()),
        },
        Error::Io(io) => Error::Io(std::io::Error::new(
            io.kind(),
            format!("{}: {io}", path.display()),
        )),
        other => other,
    }
}

fn load_inputs(a: &FeaturesArgs) -> Result<Vec<(PathBuf, Signal<f64>)>> {
    let load = |p: &Path, label: SourceClass| -> Result<(PathBuf, Signal<f64>)> {
        let s = wav::load_wav::<f64>(p).map_err(|e| in_file(p, e))?;
        Ok((p.to_path_buf(), s.with_label(a.label.unwrap_or(label))))
    };
    if a.input.is_file() {
        return Ok(vec![load(&a.input, class_from_stem(&a.input))?]);
    }
    let diag_path = a.input.join(SEPARATION_JSON);
    if diag_path.is_file() {
        let diag: SeparationDiagnostics = serde_json::from_str(&fs::read_to_string(&diag_path)?)?;
        return diag
            .channels
            .iter()
            .map(|c| {
                load(
                    &a.input.join(&c.file),
                    c.label.unwrap_or(SourceClass::Unknown),
                )
            })
            .collect();
    }
    let mut files: Vec<PathBuf> = fs::read_dir(&a.input)
        .map_err(|e| in_file(&a.input, e.into()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Parameter(format!(
            "no WAV files in {}",
            a.input.display()
        )));
    }
    files.iter().map(|p| load(p, class_from_stem(p))).collect()
}

fn extract_features(a: &FeaturesArgs, ctx: &Context) -> Result<()> {
    let inputs = load_inputs(a)?;
    let mut extractor: Option<FeatureExtractor> = None;
    let mut out = Vec::new();
    for (path, signal) in &inputs {
        let rate = signal.sample_rate();
        if extractor.as_ref().is_none_or(|e| e.sample_rate() != rate) {
            extractor = Some(FeatureExtractor::new(rate));
        }
        let ex = extractor.as_mut().expect("set above");
        let blocks = match a.block_length {
            None => vec![signal.clone()],
            Some(l) => {
                if l == 0 || signal.len() < l {
                    return Err(Error::Parameter(format!(
                        "{} has {} samples, fewer than the block length {l}",
                        path.display(),
                        signal.len()
                    )));
                }
                signal
                    .samples()
                    .chunks_exact(l)
                    .map(|c| Signal::new(c.to_vec(), rate, signal.label()))
                    .collect::<Result<_>>()?
            }
        };
        for b in &blocks {
            out.extend(ex.extract_all(b, &a.method).map_err(|e| in_file(path, e))?);
        }
    }
    let path = ctx.out.file(&a.output)?;
    if is_json(&path) {
        write_json(&path, &out)?;
    } else {
        features::write_csv(&out, fs::File::create(&path)?)?;
    }
    log::info!("wrote {} feature vectors to {}", out.len(), path.display());
    Ok(())
}

fn is_json(p: &Path) -> bool {
    p.extension()
        .is_some_and(|x| x.eq_ignore_ascii_case("json"))
}

fn read_features(p: &Path) -> Result<Vec<FeatureVector<f64>>> {
    let wrap = |e: Error| in_file(p, e);
    if is_json(p) {
        let text = fs::read_to_string(p).map_err(|e| wrap(e.into()))?;
        Ok(serde_json::from_str(&text)?)
    } else {
        features::read_csv(fs::File::open(p).map_err(|e| wrap(e.into()))?).map_err(wrap)
    }
}

fn train(a: &TrainArgs, ctx: &Context) -> Result<()> {
    let mut feats = read_features(&a.feats)?;
    let mut methods: Vec<FeatureMethod> = feats.iter().map(|f| f.method).collect();
    methods.sort();
    methods.dedup();
    let method = match (a.method, methods.as_slice()) {
        (Some(m), _) => m,
        (None, [m]) => *m,
        (None, []) => {
            return Err(Error::Training(format!(
                "{} holds no feature vectors",
                a.feats.display()
            )))
        }
        (None, ms) => {
            let names: Vec<&str> = ms.iter().map(|m| m.name()).collect();
            return Err(Error::Parameter(format!(
                "{} holds several feature methods ({}); choose one with --method",
                a.feats.display(),
                names.join(", ")
            )));
        }
    };
    feats.retain(|f| f.method == method);
    let cfg = ClassifierConfig {
        svm: SvmConfig::with_c(a.c),
        k: a.k,
    };
    let model = TrainedClassifier::train(a.model, &feats, &cfg)?;
    let correct = feats
        .iter()
        .filter(|f| model.predict(f).ok() == f.detection())
        .count();
    log::info!(
        "trained {} on {} {method} vectors; training accuracy {:.1}%",
        a.model,
        feats.len(),
        100.0 * correct as f64 / feats.len() as f64
    );
    let path = ctx.out.file(&a.output)?;
    model.save(&path)?;
    Ok(())
}

fn predict(a: &PredictArgs, ctx: &Context) -> Result<()> {
    let model = TrainedClassifier::<f64>::load(&a.model).map_err(|e| in_file(&a.model, e))?;
    let feats = read_features(&a.feats)?;
    let skipped = feats.iter().filter(|f| f.method != model.method).count();
    if skipped == feats.len() {
        return Err(Error::Parameter(format!(
            "{} holds no {} vectors for this model",
            a.feats.display(),
            model.method
        )));
    }
    if skipped > 0 {
        log::warn!("skipping {skipped} vectors of other feature methods");
    }
    let mut buf = Vec::new();
    writeln!(buf, "index,method,label,block_length,prediction")?;
    let (mut labelled, mut correct) = (0usize, 0usize);
    for (i, f) in feats
        .iter()
        .enumerate()
        .filter(|(_, f)| f.method == model.method)
    {
        let p = model.predict(f)?;
        writeln!(
            buf,
            "{i},{},{},{},{p}",
            f.method,
            f.label.name(),
            f.block_length
        )?;
        if let Some(t) = f.detection() {
            labelled += 1;
            correct += (t == p) as usize;
        }
    }
    match &a.output {
        Some(o) => fs::write(ctx.out.file(o)?, &buf)?,
        None => std::io::stdout().write_all(&buf)?,
    }
    if labelled > 0 {
        log::info!(
            "accuracy {:.1}% ({correct} of {labelled} labelled vectors)",
            100.0 * correct as f64 / labelled as f64
        );
    }
    Ok(())
}

fn run_experiment(a: &ExperimentArgs, ctx: &Context) -> Result<()> {
    let mut config = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| in_file(p, e.into()))?;
            serde_json::from_str::<ExperimentConfig>(&text)
                .map_err(|e| Error::Parameter(format!("{}: {e}", p.display())))?
        }
        None => ExperimentConfig::default(),
    };
    if ctx.explicit_seed {
        config.seed = ctx.seed;
    }
    let report = experiment::run(&config)?;
    let dir = ctx.out.dir(&a.output)?;
    for &f in &a.format {
        let path = dir.join(format!("report.{}", f.extension()));
        fs::write(&path, experiment::render(&report, f)?)?;
        log::info!("wrote {}", path.display());
    }
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}
