use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "lmstego",
    version,
    about = "Hide bits in language-model text and seek them back",
    args_override_self = true
)]
pub struct Cli {
    /// TOML file whose keys are long flag names; explicit flags and STEG_*
    /// variables take precedence over it.
    #[arg(long, global = true, env = "STEG_CONFIG")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train an n-gram model on a text corpus.
    Train(TrainArgs),
    /// Generate stegotext carrying a bit string.
    Hide(HideArgs),
    /// Recover the bit string from stegotext.
    Seek(SeekArgs),
    /// Per-step divergence experiment over sampled prefixes.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TokenizeArg {
    Words,
    Chars,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, env = "STEG_CORPUS")]
    pub corpus: PathBuf,
    #[arg(long, env = "STEG_ORDER", default_value_t = 3)]
    pub order: usize,
    #[arg(long, env = "STEG_ALPHA", default_value_t = lmstego::ngram::DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, env = "STEG_TOKENIZE", value_enum, default_value_t = TokenizeArg::Words)]
    pub tokenize: TokenizeArg,
    /// Extra vocabulary entries that need not occur in the corpus.
    #[arg(long = "special", env = "STEG_SPECIAL", value_delimiter = ',')]
    pub specials: Vec<String>,
    #[arg(long, env = "STEG_OUT")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[group(id = "backend", required = true, multiple = false)]
pub struct ModelArgs {
    /// Model file written by `train`.
    #[arg(long, env = "STEG_MODEL")]
    pub model: Option<PathBuf>,
    /// Shell command starting an external model speaking the stdio bridge
    /// protocol.
    #[arg(long, env = "STEG_BRIDGE_CMD")]
    pub bridge_cmd: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlgoArg {
    Bins,
    Vlc,
    Patient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DivergenceArg {
    Tvd,
    Kl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WeightsArg {
    Exact,
    Quantized,
}

#[derive(Debug, Args)]
pub struct CodecArgs {
    #[arg(long, env = "STEG_ALGO", value_enum, default_value_t = AlgoArg::Vlc)]
    pub algo: AlgoArg,
    /// Bits per token for `bins`.
    #[arg(long, env = "STEG_K", default_value_t = 3)]
    pub k: u32,
    /// Divergence threshold for `patient`.
    #[arg(long, env = "STEG_DELTA", default_value_t = 0.1, value_parser = positive_f64)]
    pub delta: f64,
    #[arg(long, env = "STEG_DIVERGENCE", value_enum, default_value_t = DivergenceArg::Tvd)]
    pub divergence: DivergenceArg,
    #[arg(long, env = "STEG_PARTITION_SEED", default_value_t = 0)]
    pub partition_seed: u64,
    #[arg(long, env = "STEG_RNG_SEED", default_value_t = 0)]
    pub rng_seed: u64,
    /// Carry the payload length in a 32-bit header instead of out of band.
    #[arg(long, env = "STEG_LENGTH_HEADER")]
    pub length_header: bool,
    #[arg(long, env = "STEG_HUFFMAN_WEIGHTS", value_enum, default_value_t = WeightsArg::Exact)]
    pub huffman_weights: WeightsArg,
    /// Text the stegotext continues; must be shared with the receiver.
    #[arg(long, env = "STEG_SEED_TEXT", default_value = "")]
    pub seed_text: String,
    /// XOR the payload with a key-derived stream before hiding (and after
    /// seeking).
    #[arg(long, env = "STEG_XOR_KEY", hide_env_values = true)]
    pub xor_key: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BitsFormat {
    /// Bytes, most significant bit first.
    Raw,
    /// Hexadecimal text.
    Hex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StegoFormat {
    Text,
    Ids,
}

#[derive(Debug, Args)]
pub struct HideArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub codec: CodecArgs,
    /// Payload file; `-` reads stdin.
    #[arg(long, env = "STEG_BITS_IN")]
    pub bits_in: PathBuf,
    #[arg(long, env = "STEG_BITS_FORMAT", value_enum, default_value_t = BitsFormat::Raw)]
    pub bits_format: BitsFormat,
    /// Payload length in bits when it is not the whole input.
    #[arg(long, env = "STEG_BITS_LEN")]
    pub bits_len: Option<usize>,
    #[arg(long, env = "STEG_STEGOTEXT", value_enum, default_value_t = StegoFormat::Text)]
    pub stegotext: StegoFormat,
    /// Plain samples appended after the payload.
    #[arg(long, env = "STEG_TRAILING_TOKENS", default_value_t = 0)]
    pub trailing_tokens: usize,
    /// Stegotext destination; stdout when absent.
    #[arg(long, env = "STEG_OUT")]
    pub out: Option<PathBuf>,
    /// Per-step diagnostics CSV; defaults to `<out>.diag.csv`.
    #[arg(long, env = "STEG_DIAGNOSTICS_OUT")]
    pub diagnostics_out: Option<PathBuf>,
    #[arg(long, env = "STEG_NO_DIAGNOSTICS", conflicts_with = "diagnostics_out")]
    pub no_diagnostics: bool,
}

#[derive(Debug, Args)]
pub struct SeekArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub codec: CodecArgs,
    /// Stegotext file; `-` reads stdin.
    #[arg(long, env = "STEG_STEGOTEXT_IN")]
    pub stegotext_in: PathBuf,
    #[arg(long, env = "STEG_STEGOTEXT", value_enum, default_value_t = StegoFormat::Text)]
    pub stegotext: StegoFormat,
    /// Payload length in bits; required unless `--length-header`.
    #[arg(long, env = "STEG_BITS_LEN")]
    pub bits_len: Option<usize>,
    /// Destination of the recovered bits; stdout when absent.
    #[arg(long, env = "STEG_BITS_OUT")]
    pub bits_out: Option<PathBuf>,
    #[arg(long, env = "STEG_BITS_FORMAT", value_enum, default_value_t = BitsFormat::Raw)]
    pub bits_format: BitsFormat,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, env = "STEG_PREFIXES", default_value_t = 50)]
    pub prefixes: usize,
    #[arg(long, env = "STEG_STEPS", default_value_t = 40)]
    pub steps: usize,
    /// Bins sizes to measure, comma separated.
    #[arg(long, env = "STEG_K", value_delimiter = ',', default_value = "3")]
    pub k: Vec<u32>,
    #[arg(long, env = "STEG_NO_VLC")]
    pub no_vlc: bool,
    #[arg(long, env = "STEG_PARTITION_SEED", default_value_t = 0)]
    pub partition_seed: u64,
    #[arg(long, env = "STEG_RNG_SEED", default_value_t = 0)]
    pub rng_seed: u64,
    /// Seed texts, one per line, used instead of sampled prefixes.
    #[arg(long, env = "STEG_PREFIX_FILE")]
    pub prefix_file: Option<PathBuf>,
    /// Per-step table; stdout when absent.
    #[arg(long, env = "STEG_OUT")]
    pub out: Option<PathBuf>,
    #[arg(long, env = "STEG_SUMMARY_OUT")]
    pub summary_out: Option<PathBuf>,
    #[arg(long, env = "STEG_HISTOGRAM_OUT")]
    pub histogram_out: Option<PathBuf>,
    #[arg(long, env = "STEG_HISTOGRAM_BINS",
          default_value_t = lmstego::analysis::DEFAULT_HISTOGRAM_BINS)]
    pub histogram_bins: usize,
}

fn positive_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("must be a positive number, got {s}"))
    }
}
