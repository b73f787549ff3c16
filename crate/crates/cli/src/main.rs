mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Failure classes, each with its own exit status.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, configuration or option values. Exit status 1.
    Usage(String),
    /// Unreadable or malformed input data. Exit status 2.
    Data(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) => f.write_str(m),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "lexpcfg", version, about = "Head-lexicalized PCFG training, parsing and frame induction")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Flat `key = value` configuration file; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, short, global = true)]
    pub verbose: bool,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Validate a grammar and print it, optionally with state rules added.
    Compile(CompileArgs),
    /// Estimate a model from a tagged corpus.
    Train(TrainArgs),
    /// Parse a tagged corpus with a trained model.
    Parse(ParseArgs),
    /// Print frame distributions or evaluate them against a gold lexicon.
    Frames(FramesArgs),
    /// Compare hand-judged frame samples with each other and the model.
    Entropy(EntropyArgs),
    /// Sample a synthetic corpus.
    #[command(hide = true)]
    Synth(SynthArgs),
}

#[derive(Args, Debug)]
pub struct CompileArgs {
    pub grammar: PathBuf,
    /// Phrasal categories to build state rules over, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub emit_state_rules: Vec<String>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub grammar: Option<PathBuf>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Where to write the model.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Plain EM for this many iterations with smoothing frozen.
    #[arg(long)]
    pub classical: Option<usize>,
    #[arg(long)]
    pub passes: Option<usize>,
    /// Tokens per incremental segment.
    #[arg(long)]
    pub segment_size: Option<usize>,
    #[arg(long)]
    pub heldout_fraction: Option<f64>,
    #[arg(long)]
    pub no_bootstrap: bool,
    #[arg(long)]
    pub no_fit_lambda: bool,
    /// Tab-separated per-segment log; stderr when absent.
    #[arg(long)]
    pub telemetry: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseMode {
    Viterbi,
    Summax,
    ForestStats,
}

#[derive(Args, Debug)]
pub struct ParseArgs {
    #[arg(long)]
    pub grammar: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "viterbi")]
    pub mode: ParseMode,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct FramesArgs {
    #[arg(long)]
    pub grammar: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Print the frame distribution of this head.
    #[arg(long, conflicts_with = "eval")]
    pub word: Option<String>,
    /// Phrasal category whose rules define the frames.
    #[arg(long)]
    pub cat: Option<String>,
    /// Set cutoffs on the dev words and score the test words.
    #[arg(long)]
    pub eval: bool,
    /// Gold lexicon: `word : frame, frame`, or dictionary codes with --map.
    #[arg(long)]
    pub gold: Option<PathBuf>,
    /// `code -> frame|DROP` lines translating the gold dictionary.
    #[arg(long)]
    pub map: Option<PathBuf>,
    #[arg(long, requires = "test")]
    pub dev: Option<PathBuf>,
    #[arg(long, requires = "dev")]
    pub test: Option<PathBuf>,
    /// Word list split into dev and test halves with the seed.
    #[arg(long, conflicts_with_all = ["dev", "test"])]
    pub words: Option<PathBuf>,
    /// Warn about heads seen less often than this.
    #[arg(long)]
    pub min_freq: Option<f64>,
}

#[derive(Args, Debug)]
pub struct EntropyArgs {
    #[arg(long)]
    pub grammar: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub word: String,
    #[arg(long)]
    pub cat: Option<String>,
    /// `LABEL=PATH` with `frame<TAB>sentence` lines; repeatable.
    #[arg(long = "sample", required = true)]
    pub samples: Vec<String>,
    /// Weight of the Poisson component.
    #[arg(long)]
    pub mix: Option<f64>,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long)]
    pub grammar: Option<PathBuf>,
    /// Sample from this model instead of a random one.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Save the random model used.
    #[arg(long)]
    pub model_out: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub sentences: usize,
    #[arg(long, default_value_t = 20)]
    pub max_depth: usize,
    /// Peakedness of the random model.
    #[arg(long, default_value_t = 1.0)]
    pub skew: f64,
    #[arg(long)]
    pub all_tags: bool,
    /// Corpus output; stdout when absent.
    #[arg(long)]
    pub corpus_out: Option<PathBuf>,
    #[arg(long)]
    pub trees_out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
