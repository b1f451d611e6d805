//! `clsvm`: synthetic data, feature extraction, rank recovery, training,
//! prediction, evaluation and weight inspection from one executable.

mod commands;
mod model_file;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(
    name = "clsvm",
    version,
    about = "Attribute-mediated score prediction with a continuous latent SVM"
)]
struct Cli {
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic train/test split with known ground truth.
    Synth(SynthArgs),
    /// Turn PGM face images into feature vectors.
    ExtractFeatures(ExtractArgs),
    /// Recover absolute scores from k-wise rankings.
    RankScores(RankArgs),
    /// Train a model.
    Train(TrainArgs),
    /// Predict scores (and attributes where the method has them).
    Predict(PredictArgs),
    /// Compare predictions with ground truth.
    Eval(EvalArgs),
    /// Rank attributes by their learned score weight.
    InspectWeights(InspectArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct SynthArgs {
    /// Generator spec JSON; missing fields take defaults
    /// (d 50, n 19, m_train 600, m_test 200, noise_a 0.1, noise_y 0.3, attribute_mediation 0.9).
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    /// Seed; overrides the spec. Falls back to the spec, then CLSVM_SEED, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug, Serialize)]
pub struct ExtractArgs {
    /// Directory of binary PGM (P5) images; every *.pgm is used, in name order.
    #[arg(long)]
    pub images: PathBuf,
    /// JSON table {"<image file name>": [x, y, w, h]}. Without it each image
    /// needs a sidecar <stem>.json holding {"face_box": [x, y, w, h]}.
    #[arg(long)]
    pub boxes: Option<PathBuf>,
    /// PCA file: written with --fit-pca, read otherwise.
    #[arg(long)]
    pub pca: PathBuf,
    /// Fit the PCA on these images before extracting.
    #[arg(long, default_value_t = false)]
    pub fit_pca: bool,
    /// Images used for PCA fitting, evenly spaced over the directory.
    #[arg(long, default_value_t = 50)]
    pub fit_images: usize,
    /// Comma-separated descriptors used when fitting.
    #[arg(long, default_value = "gabor,hog,lbp")]
    pub descriptors: String,
    /// PCA dimensions kept per descriptor when fitting.
    #[arg(long, default_value_t = 200)]
    pub gabor_dims: usize,
    #[arg(long, default_value_t = 200)]
    pub hog_dims: usize,
    #[arg(long, default_value_t = 40)]
    pub lbp_dims: usize,
    /// JSONL of {"id": <image stem>, "a": [...], "y": ...} to attach.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Output dataset (JSONL).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct RankArgs {
    /// JSONL of {"annotator": ..., "items": [best, ..., worst]}.
    #[arg(long)]
    pub annotations: PathBuf,
    /// Scores and diagnostics (JSON).
    #[arg(long)]
    pub out: PathBuf,
    /// L2 weight on the free scores.
    #[arg(long, default_value_t = 0.01)]
    pub reg: f64,
    /// Subgradient steps.
    #[arg(long, default_value_t = 5000)]
    pub steps: usize,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Method {
    #[value(name = "clsvm")]
    #[serde(rename = "clsvm")]
    Clsvm,
    #[value(name = "f-s")]
    #[serde(rename = "f-s")]
    Fs,
    #[value(name = "f-a-s")]
    #[serde(rename = "f-a-s")]
    Fas,
}

#[derive(Args, Debug, Serialize)]
pub struct TrainArgs {
    /// Learning method.
    #[arg(long, value_enum, default_value = "clsvm")]
    pub method: Method,
    /// Training dataset (JSONL).
    #[arg(long)]
    pub data: PathBuf,
    /// Method config JSON; missing fields take defaults. clsvm: gamma 0.01,
    /// epsilon 0.5, delta_scale 1, outer_rounds 3, subgrad_steps 100,
    /// step_rule decaying(0.1, 50), svr {c 1, epsilon_tube 0.1, max_epochs 200, tol 1e-4},
    /// attribute_svr {epsilon_tube 0.45}. f-s: an svr block. f-a-s: svr,
    /// attribute_svr, stage_one_output binary, stage_two_on_ground_truth false.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Attribute schema JSON [default: the 19-slot person schema].
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Model JSON.
    #[arg(long)]
    pub out: PathBuf,
    /// clsvm only: keep latent attributes at their annotations.
    #[arg(long, default_value_t = false)]
    pub pin_attributes: bool,
    /// clsvm only: half-width of the correct-score band [default: 0.5].
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// clsvm only: regularization weight [default: 0.01].
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Seed; falls back to the config file, then CLSVM_SEED, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug, Serialize)]
pub struct PredictArgs {
    /// Model JSON written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// Dataset (JSONL); a and y may be absent.
    #[arg(long)]
    pub data: PathBuf,
    /// Predictions (JSONL).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct EvalArgs {
    /// Predictions JSONL written by `predict`.
    #[arg(long)]
    pub preds: PathBuf,
    /// Annotated dataset (JSONL).
    #[arg(long)]
    pub truth: PathBuf,
    /// Attribute schema JSON [default: the 19-slot person schema].
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Report JSON.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct InspectArgs {
    /// A clsvm or f-a-s model.
    #[arg(long)]
    pub model: PathBuf,
    /// CSV: rank,slot,index,weight.
    #[arg(long)]
    pub out: PathBuf,
}

/// Exit status for each error category; clap usage errors exit with 2.
fn exit_code(category: &str) -> u8 {
    match category {
        "usage" => 2,
        "io" => 3,
        "parse" => 4,
        "schema" => 5,
        "validation" => 6,
        "dimension" => 7,
        "invalid-argument" => 8,
        "numerical" => 9,
        "model" => 10,
        _ => 1,
    }
}

fn fail(category: &str, message: &str) -> ExitCode {
    let one_line = message.split_whitespace().collect::<Vec<_>>().join(" ");
    eprintln!("error[{category}]: {one_line}");
    ExitCode::from(exit_code(category))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("bad usage").trim_start_matches("error: ");
            return fail("usage", first);
        }
    };
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            return fail("invalid-argument", &e.to_string());
        }
    }
    let result = match &cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::ExtractFeatures(a) => commands::extract_features(a),
        Command::RankScores(a) => commands::rank_scores(a),
        Command::Train(a) => commands::train(a),
        Command::Predict(a) => commands::predict(a),
        Command::Eval(a) => commands::eval(a),
        Command::InspectWeights(a) => commands::inspect_weights(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.category(), &e.to_string()),
    }
}
