use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use annoteq::error::{DesignError, EquivalenceError, MatrixError};
use annoteq::matrix::Scale;
use annoteq::substitution::RandomLabels;
use annoteq::SampleSize;
use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod fetch;

/// Exit codes.
const EQUIVALENT: u8 = 0;
const NOT_EQUIVALENT: u8 = 1;
const USAGE: u8 = 2;
const DATA: u8 = 3;

/// A configuration or usage problem (exit code 2).
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser)]
#[command(name = "annoteq", version, about = "Test whether a candidate annotator can replace human annotators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the substitution test and write a report under --out.
    Evaluate(EvaluateArgs),
    /// Minimum bootstrap sample and corpus sizes.
    Plan(PlanArgs),
    /// Pick a group size from the elbow of the alpha-change curve.
    Elbow(ElbowArgs),
    /// Krippendorff's alpha of one annotation file.
    Alpha(AlphaArgs),
    /// Write a synthetic human population and candidates.
    Synth(SynthArgs),
    /// Request candidate labels from a remote annotator service.
    Fetch(FetchArgs),
}

#[derive(Args)]
struct DataArgs {
    /// TOML configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Human annotations in long format (annotator_id,item_id,label).
    #[arg(long)]
    human: Option<PathBuf>,
    /// nominal, ordinal or interval [default: interval if every label is numeric, else nominal]
    #[arg(long)]
    scale: Option<Scale>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Candidate annotations in long format, or "self" to replace every annotator with itself.
    #[arg(long)]
    candidate: Option<String>,
    /// Bootstrap iterations per trial [default: 300]
    #[arg(long = "B")]
    iterations: Option<usize>,
    /// Items per bootstrap sample, or "auto" for 40% of the items [default: auto]
    #[arg(long = "N")]
    sample_size: Option<SampleSize>,
    /// Share of the human-to-human alpha gap used as the margin [default: 0.5]
    #[arg(long)]
    fraction: Option<f64>,
    /// [default: 0.05]
    #[arg(long)]
    sig_level: Option<f64>,
    /// [default: 10]
    #[arg(long)]
    trials: Option<usize>,
    /// Trial t uses schedule seed seed + t [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Also test random labels as a negative control.
    #[arg(long)]
    control: bool,
    /// uniform or marginal [default: uniform]
    #[arg(long, value_parser = parse_random_labels)]
    random_labels: Option<RandomLabels>,
    /// Extra values of B to report, comma-separated.
    #[arg(long = "B-sweep", value_delimiter = ',')]
    b_sweep: Option<Vec<usize>>,
    /// Fixed margin instead of one estimated from the human groups.
    #[arg(long)]
    margin: Option<f64>,
    /// Group A annotator ids, comma-separated.
    #[arg(long, value_delimiter = ',')]
    group_a: Option<Vec<String>>,
    /// Group B annotator ids, comma-separated.
    #[arg(long, value_delimiter = ',')]
    group_b: Option<Vec<String>>,
    /// Choose both groups with the automatic filter, at this size each.
    #[arg(long)]
    group_size: Option<usize>,
    /// Filter: items that must survive [default: 40]
    #[arg(long)]
    min_items: Option<usize>,
    /// Filter: labels per item required from each group [default: 2]
    #[arg(long)]
    min_coders: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Used as given in the formula [default: 0.95]
    #[arg(long)]
    z: Option<f64>,
    /// Smallest alpha the study must support [default: 0.8]
    #[arg(long)]
    alpha_min: Option<f64>,
    /// Chance agreement probability [default: 0.17]
    #[arg(long)]
    p_c: Option<f64>,
    /// Print JSON instead of text.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ElbowArgs {
    #[command(flatten)]
    data: DataArgs,
    /// CSV with columns x,y; skips the curve computation.
    #[arg(long)]
    curve: Option<PathBuf>,
    /// Candidate annotations, or "random" [default: random]
    #[arg(long)]
    candidate: Option<String>,
    /// Group sizes, comma-separated [default: 2 up to the number of annotators]
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    /// [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for elbow.json and curve.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AlphaArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 100)]
    items: usize,
    #[arg(long, default_value_t = 20)]
    annotators: usize,
    #[arg(long, default_value_t = 4)]
    cue_dim: usize,
    /// Alphabet size; labels are "1".."K".
    #[arg(long, default_value_t = 5)]
    labels: usize,
    /// Spread of annotator weights around the shared weights.
    #[arg(long, default_value_t = 0.3)]
    weight_sd: f64,
    #[arg(long, default_value_t = 0.5)]
    noise_sd: f64,
    /// Log-scale spread of noise levels across annotators.
    #[arg(long, default_value_t = 0.0)]
    noise_spread: f64,
    /// Probability that a human cell is left blank.
    #[arg(long, default_value_t = 0.0)]
    missing: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Writes human.csv, candidate.csv and orthogonal.csv here.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FetchArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// URL receiving POST {"system": ..., "user": ...}.
    #[arg(long)]
    endpoint: Option<String>,
    /// Prompt template with --SYSTEM-- and --USER-- sections and an {items} placeholder.
    #[arg(long)]
    template: Option<PathBuf>,
    /// CSV with columns item_id,description.
    #[arg(long)]
    items: Option<PathBuf>,
    /// Items per request [default: 100]
    #[arg(long)]
    batch_size: Option<usize>,
    /// Annotator id written to the candidate file [default: candidate]
    #[arg(long)]
    annotator: Option<String>,
    /// Accepted labels, comma-separated.
    #[arg(long, value_delimiter = ',')]
    labels: Option<Vec<String>>,
    /// First retry delay in milliseconds, doubled per retry [default: 1000]
    #[arg(long)]
    backoff_ms: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_random_labels(s: &str) -> Result<RandomLabels, String> {
    match s {
        "uniform" => Ok(RandomLabels::Uniform),
        "marginal" => Ok(RandomLabels::Marginal),
        other => Err(format!("expected uniform or marginal, got {other:?}")),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return USAGE;
        }
        if let Some(e) = cause.downcast_ref::<annoteq::Error>() {
            return if e.is_data_error() { DATA } else { USAGE };
        }
        if let Some(MatrixError::InvalidFilter(_) | MatrixError::UnknownScale(_)) = cause.downcast_ref() {
            return USAGE;
        }
        if let Some(DesignError::Parameter(_)) = cause.downcast_ref() {
            return USAGE;
        }
        if let Some(EquivalenceError::Fraction(_) | EquivalenceError::SigLevel(_)) = cause.downcast_ref() {
            return USAGE;
        }
    }
    DATA
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { USAGE } else { EQUIVALENT });
        }
    };
    let result = match cli.command {
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Plan(a) => commands::plan(a),
        Command::Elbow(a) => commands::elbow(a),
        Command::Alpha(a) => commands::alpha(a),
        Command::Synth(a) => commands::synth(a),
        Command::Fetch(a) => commands::fetch(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
