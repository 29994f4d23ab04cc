//! Command-line surface.

use std::path::PathBuf;

use clap::{ArgAction, ArgGroup, Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "subaug",
    version,
    about = "Subword tokenizers, back-off n-gram models and generation-based corpus augmentation"
)]
pub struct Cli {
    /// Seed for every random choice made by the command.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for parallel stages (results do not depend on it).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Print machine-readable JSON on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    /// More log output on stderr; repeat for more.
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Write the synthetic agglutinative dataset (train/valid/eval/heldout).
    Synth(SynthArgs),
    /// Train or apply a subword tokenizer.
    #[command(subcommand)]
    Tokenize(TokenizeCommand),
    /// Train, prune or score back-off n-gram models.
    #[command(subcommand)]
    Lm(LmCommand),
    /// Sample an augmentation corpus from an n-gram generator, or ingest
    /// text produced by an external generator.
    Generate(GenerateArgs),
    /// Interpolate models with EM-optimized or given weights.
    Mix(MixArgs),
    /// Evaluate a model and print a JSON report.
    Eval(EvalArgs),
    /// Run a grid of augmentation experiments from a JSON plan.
    Experiment(ExperimentArgs),
    /// Re-execute a run from its manifest and verify the output checksums.
    Replay(ReplayArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 50_000)]
    pub train_tokens: usize,
    #[arg(long, default_value_t = 5_000)]
    pub valid_tokens: usize,
    #[arg(long, default_value_t = 5_000)]
    pub eval_tokens: usize,
    #[arg(long, default_value_t = 250_000)]
    pub heldout_tokens: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algo {
    Bpe,
    Morfessor,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TokenizeCommand {
    /// Learn a BPE merge file or a morph lexicon from a word corpus.
    Train(TokenizeTrainArgs),
    /// Segment a word corpus into `+`-tagged subword text.
    Apply(TokenizeApplyArgs),
    /// Join `+`-tagged subword text back into words.
    Detag(DetagArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct TokenizeTrainArgs {
    #[arg(long, value_enum)]
    pub algo: Algo,
    /// Target inventory (alphabet plus merges) for BPE.
    #[arg(long, required_if_eq("algo", "bpe"))]
    pub inventory: Option<usize>,
    /// Weight of the corpus cost against the lexicon cost for the segmenter.
    #[arg(long, default_value_t = 1.0)]
    pub corpus_weight: f64,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct TokenizeApplyArgs {
    /// Tokenizer file written by `tokenize train`.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct DetagArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LmCommand {
    /// Estimate a modified Kneser-Ney model and write it as ARPA.
    Train(LmTrainArgs),
    /// Prune a model to a byte budget or a relative-entropy threshold.
    Prune(LmPruneArgs),
    /// Perplexity of a model on a test corpus.
    Score(LmScoreArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct LmTrainArgs {
    /// Word corpus (or tagged subword text with --subword-input).
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value_t = 4)]
    pub order: usize,
    /// Keep only the most frequent tokens.
    #[arg(long)]
    pub vocab_cap: Option<usize>,
    /// Build the token list from these corpora instead of the input: the
    /// first ranked by frequency, then tokens only the second contains.
    /// Models that will be interpolated must share one list.
    #[arg(long, num_args = 1..=2)]
    pub vocab_from: Vec<PathBuf>,
    /// Segment the word corpora with this tokenizer first.
    #[arg(long, conflicts_with = "subword_input")]
    pub tokenizer: Option<PathBuf>,
    /// The input is already `+`-tagged subword text.
    #[arg(long)]
    pub subword_input: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
#[command(group(ArgGroup::new("criterion").required(true).args(["budget", "threshold"])))]
pub struct LmPruneArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Footprint budget in bytes; K, M and G suffixes are powers of 1000.
    #[arg(long, value_parser = parse_bytes)]
    pub budget: Option<u64>,
    /// Remove n-grams whose relative-entropy cost is below this value.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct LmScoreArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Word corpus, segmented with --tokenizer when given.
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub tokenizer: Option<PathBuf>,
    /// Normalize by scored tokens instead of words.
    #[arg(long)]
    pub per_token: bool,
    /// Write the scores as JSON here too.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
#[command(group(ArgGroup::new("generator").required(true).args(["model", "external"])))]
pub struct GenerateArgs {
    /// ARPA model used as the generator.
    #[arg(long, requires = "source")]
    pub model: Option<PathBuf>,
    /// Text written by another generator; it is validated and normalized.
    #[arg(long)]
    pub external: Option<PathBuf>,
    /// Corpus the prompt prefixes are drawn from.
    #[arg(long)]
    pub source: Option<PathBuf>,
    /// Generation settings as JSON; the flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of tokens to generate.
    #[arg(long)]
    pub tokens: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct MixArgs {
    /// Component models sharing one token list.
    #[arg(long, num_args = 2.., required = true)]
    pub models: Vec<PathBuf>,
    /// Tuning corpus for EM.
    #[arg(long, required_unless_present = "weights")]
    pub tune: Option<PathBuf>,
    /// Segment the tuning corpus with this tokenizer.
    #[arg(long)]
    pub tokenizer: Option<PathBuf>,
    /// Fixed comma-separated weights instead of EM.
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,
    /// EM stops when the per-event log-likelihood gains less than this.
    #[arg(long, default_value_t = subaug::mix::DEFAULT_TOLERANCE)]
    pub tolerance: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
#[command(group(ArgGroup::new("oov").multiple(true).args(["references", "hypotheses"]).requires_all(["references", "hypotheses", "train"])))]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Word-level test corpus.
    #[arg(long)]
    pub test: PathBuf,
    /// Tokenizer of a subword model.
    #[arg(long)]
    pub tokenizer: Option<PathBuf>,
    /// Report per-word perplexity (the default).
    #[arg(long, default_value_t = true, overrides_with = "per_token")]
    pub per_word: bool,
    /// Also report per-token perplexity.
    #[arg(long)]
    pub per_token: bool,
    /// In-domain training text: defines OOV words and prices the spelling
    /// of `<unk>` events for the open-vocabulary perplexity.
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Reference transcripts, one sentence per line.
    #[arg(long)]
    pub references: Option<PathBuf>,
    /// Hypotheses aligned line by line with the references.
    #[arg(long)]
    pub hypotheses: Option<PathBuf>,
    /// Write the report here as well as to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub plan: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Skip runs whose manifest matches the current plan and inputs.
    #[arg(long)]
    #[serde(skip)]
    pub cache: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
}

/// Byte counts with optional decimal K/M/G suffixes.
pub fn parse_bytes(s: &str) -> Result<u64, String> {
    let s = s.trim();
    let upper = s.to_ascii_uppercase();
    let digits = upper.trim_end_matches('B');
    let (num, scale) = match digits.chars().last() {
        Some('K') => (&digits[..digits.len() - 1], 1_000),
        Some('M') => (&digits[..digits.len() - 1], 1_000_000),
        Some('G') => (&digits[..digits.len() - 1], 1_000_000_000),
        _ => (digits, 1),
    };
    let n: u64 = num.parse().map_err(|_| format!("not a byte count: {s:?}"))?;
    n.checked_mul(scale).ok_or_else(|| format!("byte count overflows: {s:?}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn definitions_are_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn byte_suffixes() {
        assert_eq!(parse_bytes("20MB"), Ok(20_000_000));
        assert_eq!(parse_bytes("512k"), Ok(512_000));
        assert_eq!(parse_bytes("1234"), Ok(1234));
        assert!(parse_bytes("lots").is_err());
    }
}
