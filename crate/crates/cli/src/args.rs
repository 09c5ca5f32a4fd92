use std::path::PathBuf;

use acousep_core::classify::ClassifierKind;
use acousep_core::experiment::ReportFormat;
use acousep_core::fastica::Contrast;
use acousep_core::features::FeatureMethod;
use acousep_core::signals::{SourceClass, DEFAULT_SAMPLE_RATE};
use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};

/// Drone detection in multi-microphone acoustic mixtures.
#[derive(Debug, Parser)]
#[command(name = "acousep", version, propagate_version = true)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOptions,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
#[command(next_help_heading = "Global options")]
pub struct GlobalOptions {
    /// More log output on stderr (repeat for more).
    #[arg(short, long, action = ArgAction::Count, global = true)]
    pub verbose: u8,

    /// Only report errors.
    #[arg(short, long, global = true, conflicts_with = "verbose")]
    pub quiet: bool,

    /// Root seed; each stage draws from its own named substream.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Directory every output is confined to; relative `-o` paths are resolved inside it.
    #[arg(long, global = true, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesise a labelled source signal to a mono WAV file.
    Synth(SynthArgs),
    /// Mix mono WAV sources with a random square matrix.
    Mix(MixArgs),
    /// Separate a mixed block with FastICA.
    Separate(SeparateArgs),
    /// Extract feature vectors from WAV signals.
    Features(FeaturesArgs),
    /// Train an SVM or KNN detector on a feature file.
    Train(TrainArgs),
    /// Classify feature vectors with a trained model.
    Predict(PredictArgs),
    /// Run the full separation and detection study.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WavEncoding {
    Pcm16,
    Float32,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Source class.
    #[arg(long = "class", value_parser = parse_str::<SourceClass>)]
    pub class: SourceClass,

    /// Duration in seconds.
    #[arg(long = "dur", default_value_t = 1.0)]
    pub duration: f64,

    /// Sample rate in Hz.
    #[arg(long, default_value_t = DEFAULT_SAMPLE_RATE)]
    pub rate: u32,

    /// Harmonic fundamental in Hz (harmonic classes).
    #[arg(long)]
    pub fundamental: Option<f64>,

    /// Amplitude modulation rate in Hz.
    #[arg(long)]
    pub am_rate: Option<f64>,

    #[arg(long, value_enum, default_value_t = WavEncoding::Pcm16)]
    pub encoding: WavEncoding,

    /// Output WAV file.
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct MixArgs {
    /// Mono WAV sources, comma separated.
    #[arg(long, required = true, value_delimiter = ',', num_args = 1..)]
    pub inputs: Vec<PathBuf>,

    /// Class of each input, comma separated; defaults to the class named by each file stem.
    #[arg(long, value_delimiter = ',', value_parser = parse_str::<SourceClass>)]
    pub labels: Vec<SourceClass>,

    /// Use the identity matrix instead of a random one.
    #[arg(long)]
    pub identity: bool,

    /// Output directory for mixed.wav and mixed.json.
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct SeparateArgs {
    /// Directory holding mixed.wav (and optionally mixed.json).
    #[arg(long = "in")]
    pub input: PathBuf,

    /// Contrast function: tanh, gauss or cubic.
    #[arg(long, default_value = "tanh", value_parser = parse_str::<Contrast>)]
    pub contrast: Contrast,

    /// Convergence tolerance on the change of the unmixing matrix.
    #[arg(long = "tol", default_value_t = 1e-6)]
    pub tolerance: f64,

    /// Iteration limit.
    #[arg(long, default_value_t = 200)]
    pub max_iter: usize,

    /// Output directory for the separated WAV files and separation.json.
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    /// A WAV file, a separation output directory, or a directory of WAV files.
    #[arg(long = "in")]
    pub input: PathBuf,

    /// Feature methods, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "rms-psd", value_parser = parse_str::<FeatureMethod>)]
    pub method: Vec<FeatureMethod>,

    /// Split each signal into consecutive blocks of this many samples.
    #[arg(long)]
    pub block_length: Option<usize>,

    /// Class of every input signal, overriding any recorded label.
    #[arg(long, value_parser = parse_str::<SourceClass>)]
    pub label: Option<SourceClass>,

    /// Output file; `.json` selects JSON, anything else CSV.
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Labelled feature file (CSV or JSON).
    #[arg(long)]
    pub feats: PathBuf,

    /// Classifier: svm or knn.
    #[arg(long, value_parser = parse_str::<ClassifierKind>)]
    pub model: ClassifierKind,

    /// Feature method to train on when the file holds several.
    #[arg(long, value_parser = parse_str::<FeatureMethod>)]
    pub method: Option<FeatureMethod>,

    /// SVM box constraint.
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,

    /// KNN neighbour count.
    #[arg(short, long, default_value_t = 5)]
    pub k: usize,

    /// Output model file (JSON).
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Model written by `train`.
    #[arg(long)]
    pub model: PathBuf,

    /// Feature file (CSV or JSON).
    #[arg(long)]
    pub feats: PathBuf,

    /// Prediction CSV; printed to stdout when omitted.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Experiment configuration (JSON); built-in defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Report formats to write, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "text,csv,json", value_parser = parse_str::<ReportFormat>)]
    pub format: Vec<ReportFormat>,

    /// Output directory for report.txt, report.csv and report.json.
    #[arg(short, long)]
    pub output: PathBuf,
}

fn parse_str<T>(s: &str) -> Result<T, String>
where
    T: std::str::FromStr,
    T::Err: std::fmt::Display,
{
    s.parse::<T>().map_err(|e| e.to_string())
}
