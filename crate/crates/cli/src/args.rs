use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use charsurp::ingestion::Measure;
use charsurp::marginal::Method;
use charsurp::regression::VarianceSource;
use charsurp::text::{Convention, FocalSpec};

#[derive(Debug, Parser)]
#[command(name = "charsurp", version, about = "Character-level surprisal of focal areas and its predictive power for reading measures")]
pub struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the focal-area yields of every region.
    Segment(SegmentArgs),
    /// Learn a BPE vocabulary from a line-per-string corpus.
    BpeTrain(BpeTrainArgs),
    /// Train an n-gram model over BPE tokens and report held-out perplexity.
    LmTrain(LmTrainArgs),
    /// Compute focal-area surprisal for every stimulus.
    Surprisal(SurprisalArgs),
    /// Cross-validated regression report over focal specs.
    Regress(RegressArgs),
    /// Compare beam summing against exact enumeration on random strings.
    OracleCheck(OracleArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Segment(_) => "segment",
            Command::BpeTrain(_) => "bpe-train",
            Command::LmTrain(_) => "lm-train",
            Command::Surprisal(_) => "surprisal",
            Command::Regress(_) => "regress",
            Command::OracleCheck(_) => "oracle-check",
        }
    }

    pub fn out(&self) -> &PathBuf {
        match self {
            Command::Segment(a) => &a.out,
            Command::BpeTrain(a) => &a.out,
            Command::LmTrain(a) => &a.out,
            Command::Surprisal(a) => &a.out,
            Command::Regress(a) => &a.out,
            Command::OracleCheck(a) => &a.out,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConventionArg {
    Leading,
    Trailing,
    Both,
}

impl ConventionArg {
    pub fn conventions(self) -> Vec<Convention> {
        match self {
            ConventionArg::Leading => vec![Convention::LeadingWhitespace],
            ConventionArg::Trailing => vec![Convention::TrailingWhitespace],
            ConventionArg::Both => Convention::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Exact,
    Beam,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LogBase {
    E,
    #[value(name = "2")]
    Two,
}

impl LogBase {
    pub fn value(self) -> f64 {
        match self {
            LogBase::E => std::f64::consts::E,
            LogBase::Two => 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VarianceArg {
    Training,
    Test,
}

impl From<VarianceArg> for VarianceSource {
    fn from(v: VarianceArg) -> Self {
        match v {
            VarianceArg::Training => VarianceSource::Training,
            VarianceArg::Test => VarianceSource::Test,
        }
    }
}

/// Comma-separated focal specs; `all` expands to the standard ten and an
/// empty string to none.
pub fn parse_specs(s: &str) -> Result<Vec<FocalSpec>, String> {
    match s.trim() {
        "all" => Ok(FocalSpec::standard()),
        "" => Ok(Vec::new()),
        list => FocalSpec::parse_list(list).map_err(|e| e.to_string()),
    }
}

fn parse_measures(s: &str) -> Result<Vec<Measure>, String> {
    if s.trim() == "all" {
        return Ok(Measure::ALL.to_vec());
    }
    s.split(',').map(|m| m.trim().parse()).collect()
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("input").required(true).args(["text", "stimuli"]))]
pub struct SegmentArgs {
    /// A single stimulus given inline.
    #[arg(long)]
    pub text: Option<String>,
    /// Stimulus CSV with `stimulus_id` and `text` columns.
    #[arg(long)]
    pub stimuli: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "both")]
    pub convention: ConventionArg,
    #[arg(long, default_value = "all", value_parser = parse_specs)]
    pub specs: ::std::vec::Vec<FocalSpec>,
    /// Output directory; receives `focal_table.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BpeTrainArgs {
    /// Plain text, one training string per non-empty line.
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub vocab_size: usize,
    /// Output directory; receives `vocab.txt` and `merges.txt`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LmTrainArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Held-out strings. Without it every tenth corpus line is held out.
    #[arg(long)]
    pub heldout: Option<PathBuf>,
    #[arg(long)]
    pub vocab: PathBuf,
    #[arg(long)]
    pub merges: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub order: usize,
    #[arg(long, default_value_t = 0.1)]
    pub smoothing: f64,
    /// Output directory; receives `lm.json` and `lm_summary.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long)]
    pub vocab: PathBuf,
    #[arg(long)]
    pub merges: PathBuf,
    /// An n-gram model file, or `external` for the server named by
    /// `CHARSURP_LM_ENDPOINT`.
    #[arg(long)]
    pub lm: String,
}

#[derive(Debug, Args)]
pub struct SurprisalArgs {
    #[arg(long)]
    pub stimuli: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum, default_value = "both")]
    pub convention: ConventionArg,
    #[arg(long, default_value = "all", value_parser = parse_specs)]
    pub specs: ::std::vec::Vec<FocalSpec>,
    #[arg(long, value_enum, default_value = "beam")]
    pub method: MethodArg,
    #[arg(long, default_value_t = 5)]
    pub beam_width: usize,
    #[arg(long, value_enum, default_value = "e")]
    pub log_base: LogBase,
    /// Treat the end of the stimulus as part of the last focal areas.
    #[arg(long)]
    pub append_eos: bool,
    /// Output directory; receives `surprisal.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

impl SurprisalArgs {
    pub fn method(&self) -> Result<Method, String> {
        match self.method {
            MethodArg::Exact => Ok(Method::Exact),
            MethodArg::Beam => charsurp::marginal::BeamConfig::new(self.beam_width).map(Method::Beam).map_err(|e| e.to_string()),
        }
    }
}

#[derive(Debug, Args)]
pub struct RegressArgs {
    /// A file written by `surprisal`; must include `full` rows.
    #[arg(long)]
    pub surprisal: PathBuf,
    #[arg(long)]
    pub stimuli: PathBuf,
    #[arg(long)]
    pub measurements: PathBuf,
    /// CSV with `word` and `count` columns.
    #[arg(long)]
    pub frequencies: PathBuf,
    /// Defaults to the conventions present in the surprisal file.
    #[arg(long, value_enum)]
    pub convention: Option<ConventionArg>,
    /// Defaults to the specs present in the surprisal file.
    #[arg(long, value_parser = parse_specs)]
    pub specs: Option<::std::vec::Vec<FocalSpec>>,
    #[arg(long, default_value = "all", value_parser = parse_measures)]
    pub measures: ::std::vec::Vec<Measure>,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long, default_value_t = 10)]
    pub seeds: usize,
    #[arg(long, default_value_t = 10_000)]
    pub permutations: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Residual variance of the Gaussian likelihood.
    #[arg(long, value_enum, default_value = "training")]
    pub variance: VarianceArg,
    /// Output directory; receives `report.json`, `report.csv` and `plot.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 8)]
    pub max_len: usize,
    #[arg(long, default_value_t = 8)]
    pub max_width: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Adds this many nats to every beam result (negative control).
    #[arg(long, hide = true, default_value_t = 0.0, allow_negative_numbers = true)]
    pub test_beam_offset: f64,
    /// Output directory; receives `oracle.json`.
    #[arg(long)]
    pub out: PathBuf,
}
