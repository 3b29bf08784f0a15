//! Hiding a bit string in generated text and seeking it back.
//!
//! Three algorithms share one driver:
//!
//! * **Bins** splits the payload into k-bit blocks; block `a` draws the next
//!   token from the model restricted to bin `a` of a seeded partition.
//! * **VLC** builds the Huffman tree of each next-token distribution and walks
//!   it with payload bits.
//! * **Patient** is VLC that only embeds when the Huffman distribution is
//!   within `delta` of the model (TVD or KL); otherwise it samples from the
//!   model and embeds nothing.
//!
//! The receiver replays the model along the observed tokens with the same
//! configuration and inverts each step. Final partial blocks and tree descents
//! are zero-padded; the receiver truncates to the payload length, which is
//! either shared out of band or carried in a 32-bit big-endian header.

mod bins;
mod huffman_steps;
mod keystream;

use rand::RngCore;
use thiserror::Error;

use crate::bits::BitString;
use crate::huffman::{HuffmanError, WeightMode};
use crate::lm::{sample_token, LanguageModel, LmError, Prefix, TokenId};
use crate::metrics::{accumulate, CumulativeBound, MetricsError, StepDiagnostics};
use crate::partition::{BinPartition, PartitionError};
use crate::sampling::codec_rng;

pub use bins::{bins_decode_step, bins_effective, bins_encode_step, bins_step_kl, sample_in_bin};
pub use huffman_steps::{
    patient_decode_step, patient_encode_step, vlc_decode_step, vlc_encode_step, HuffmanDivergence,
};
pub use keystream::keystream_xor;

/// Width of the optional in-band length header.
pub const HEADER_BITS: usize = 32;

/// Default cap on consecutive steps that embed nothing before `hide` gives up.
pub const DEFAULT_MAX_IDLE_STEPS: usize = 100_000;

#[derive(Debug, Error)]
pub enum CodecError {
    #[error(transparent)]
    Lm(#[from] LmError),
    #[error(transparent)]
    Huffman(#[from] HuffmanError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("invalid codec configuration: {0}")]
    InvalidConfig(String),
    #[error("payload of {0} bits does not fit the 32-bit length header")]
    PayloadTooLong(usize),
    #[error(
        "no payload embedded for {steps} consecutive steps; delta is too strict for this model"
    )]
    Stalled { steps: usize },
    #[error("ciphertext length must be given when the length header is disabled")]
    MissingLength,
    #[error("truncated stegotext: recovered {recovered} bits, need {needed}")]
    Truncated { needed: usize, recovered: usize },
    #[error("keystream key must not be empty")]
    EmptyKey,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DivergenceKind {
    #[default]
    Tvd,
    Kl,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Algorithm {
    Bins {
        k: u32,
        partition_seed: u64,
    },
    Vlc,
    Patient {
        delta: f64,
        divergence: DivergenceKind,
    },
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Bins { .. } => "bins",
            Algorithm::Vlc => "vlc",
            Algorithm::Patient { .. } => "patient",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LengthMode {
    /// The receiver is told the payload length separately.
    #[default]
    OutOfBand,
    /// A 32-bit big-endian length is embedded ahead of the payload.
    Header32,
}

/// Parameters shared by sender and receiver. Only `rng_seed` may differ
/// between the two sides.
#[derive(Debug, Clone, PartialEq)]
pub struct CodecConfig {
    pub algorithm: Algorithm,
    pub length_mode: LengthMode,
    pub rng_seed: u64,
    /// Extra tokens sampled from the model after the last payload bit.
    pub trailing_tokens: usize,
    pub weight_mode: WeightMode,
    pub max_idle_steps: usize,
}

impl CodecConfig {
    pub fn new(algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            length_mode: LengthMode::OutOfBand,
            rng_seed: 0,
            trailing_tokens: 0,
            weight_mode: WeightMode::Exact,
            max_idle_steps: DEFAULT_MAX_IDLE_STEPS,
        }
    }

    pub fn bins(k: u32, partition_seed: u64) -> Self {
        Self::new(Algorithm::Bins { k, partition_seed })
    }

    pub fn vlc() -> Self {
        Self::new(Algorithm::Vlc)
    }

    pub fn patient(delta: f64, divergence: DivergenceKind) -> Self {
        Self::new(Algorithm::Patient { delta, divergence })
    }

    pub fn with_length_mode(mut self, mode: LengthMode) -> Self {
        self.length_mode = mode;
        self
    }

    pub fn with_rng_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    pub fn with_trailing_tokens(mut self, n: usize) -> Self {
        self.trailing_tokens = n;
        self
    }

    pub fn with_weight_mode(mut self, mode: WeightMode) -> Self {
        self.weight_mode = mode;
        self
    }

    /// True if a receiver using `self` can decode a sender using `other`.
    pub fn compatible_with(&self, other: &CodecConfig) -> bool {
        let mut a = self.clone();
        a.rng_seed = other.rng_seed;
        a == *other
    }

    pub fn validate(&self, vocab_size: usize) -> Result<(), CodecError> {
        if vocab_size < 2 {
            return Err(CodecError::InvalidConfig(format!(
                "vocabulary of size {vocab_size} cannot carry bits"
            )));
        }
        match self.algorithm {
            Algorithm::Bins { k, partition_seed } => {
                // surfaces BadK / TooManyBins
                BinPartition::new(partition_seed, vocab_size, k).map(|_| ())?;
            }
            Algorithm::Vlc => {}
            Algorithm::Patient { delta, .. } => huffman_steps::check_delta(delta)?,
        }
        Ok(())
    }
}

/// Output of [`hide`].
#[derive(Debug, Clone, PartialEq)]
pub struct StegoResult {
    /// Generated tokens, excluding the seed prefix.
    pub stegotext_tokens: Vec<TokenId>,
    /// One entry per generated token, including skip and trailing steps.
    pub diagnostics: Vec<StepDiagnostics>,
    /// Ciphertext bits delivered (`C`), excluding any length header.
    pub bits_embedded_total: usize,
    /// Header bits delivered ahead of the ciphertext.
    pub header_bits: usize,
}

impl StegoResult {
    pub fn cumulative(&self) -> CumulativeBound {
        accumulate(&self.diagnostics)
    }
}

enum Stepper {
    Bins(BinPartition),
    Vlc,
    Patient {
        delta: f64,
        divergence: DivergenceKind,
    },
}

impl Stepper {
    fn new(config: &CodecConfig, vocab_size: usize) -> Result<Self, CodecError> {
        config.validate(vocab_size)?;
        Ok(match config.algorithm {
            Algorithm::Bins { k, partition_seed } => {
                Stepper::Bins(BinPartition::new(partition_seed, vocab_size, k)?)
            }
            Algorithm::Vlc => Stepper::Vlc,
            Algorithm::Patient { delta, divergence } => Stepper::Patient { delta, divergence },
        })
    }
}

fn build_payload(config: &CodecConfig, ciphertext: &BitString) -> Result<BitString, CodecError> {
    match config.length_mode {
        LengthMode::OutOfBand => Ok(ciphertext.clone()),
        LengthMode::Header32 => {
            let len = u32::try_from(ciphertext.len())
                .map_err(|_| CodecError::PayloadTooLong(ciphertext.len()))?;
            let mut payload = BitString::from_uint(len as u64, HEADER_BITS);
            payload.extend_from(ciphertext);
            Ok(payload)
        }
    }
}

/// Hides `ciphertext` using a generator seeded from `config.rng_seed`.
pub fn hide<M: LanguageModel + ?Sized>(
    model: &M,
    config: &CodecConfig,
    seed_prefix: &Prefix,
    ciphertext: &BitString,
) -> Result<StegoResult, CodecError> {
    hide_with_rng(
        model,
        config,
        seed_prefix,
        ciphertext,
        &mut codec_rng(config.rng_seed),
    )
}

/// Generates tokens after `seed_prefix` until every payload bit is embedded,
/// then `config.trailing_tokens` plain samples.
pub fn hide_with_rng<M, R>(
    model: &M,
    config: &CodecConfig,
    seed_prefix: &Prefix,
    ciphertext: &BitString,
    rng: &mut R,
) -> Result<StegoResult, CodecError>
where
    M: LanguageModel + ?Sized,
    R: RngCore + ?Sized,
{
    let vocab_size = model.vocab_size();
    let stepper = Stepper::new(config, vocab_size)?;
    model.check_context(seed_prefix.tokens())?;
    let payload = build_payload(config, ciphertext)?;

    let mut context = seed_prefix.tokens().to_vec();
    let mut reader = payload.reader();
    let mut tokens = Vec::new();
    let mut diagnostics = Vec::new();
    let warn_after = 10 * payload.len();
    let mut idle = 0usize;

    while !reader.is_exhausted() {
        let p = model.next_distribution(&context)?;
        let before = reader.position();
        let (token, mut diag) = match &stepper {
            Stepper::Bins(partition) => {
                let block = reader.read_uint(partition.k() as usize) as u32;
                bins_encode_step(&p, partition, block, rng)?
            }
            Stepper::Vlc => {
                let code = huffman_steps::build(&p, config.weight_mode)?;
                huffman_steps::vlc_step(&p, &code, &mut reader)?
            }
            Stepper::Patient { delta, divergence } => {
                let code = huffman_steps::build(&p, config.weight_mode)?;
                huffman_steps::patient_step(&p, &code, &mut reader, *delta, *divergence, rng)?
            }
        };
        diag.step_index = diagnostics.len();
        diag.bits_embedded = reader.position() - before;
        if diag.bits_embedded == 0 {
            idle += 1;
            if idle == warn_after {
                log::warn!(
                    "no payload embedded for {idle} consecutive steps ({} of {} bits done)",
                    reader.position(),
                    payload.len()
                );
            }
            if idle > config.max_idle_steps {
                return Err(CodecError::Stalled { steps: idle });
            }
        } else {
            idle = 0;
        }
        context.push(token);
        tokens.push(token);
        diagnostics.push(diag);
    }

    for _ in 0..config.trailing_tokens {
        let p = model.next_distribution(&context)?;
        let token = sample_token(&p, rng);
        diagnostics.push(StepDiagnostics {
            step_index: diagnostics.len(),
            kl_bits: 0.0,
            tvd: 0.0,
            bits_embedded: 0,
            encoded: false,
        });
        context.push(token);
        tokens.push(token);
    }

    let header_bits = payload.len() - ciphertext.len();
    Ok(StegoResult {
        stegotext_tokens: tokens,
        diagnostics,
        bits_embedded_total: ciphertext.len(),
        header_bits,
    })
}

/// Recovers the ciphertext from `stegotext_tokens`.
///
/// `ciphertext_len` is required with [`LengthMode::OutOfBand`] and ignored
/// with [`LengthMode::Header32`].
pub fn seek<M: LanguageModel + ?Sized>(
    model: &M,
    config: &CodecConfig,
    seed_prefix: &Prefix,
    stegotext_tokens: &[TokenId],
    ciphertext_len: Option<usize>,
) -> Result<BitString, CodecError> {
    let vocab_size = model.vocab_size();
    let stepper = Stepper::new(config, vocab_size)?;
    model.check_context(seed_prefix.tokens())?;
    model.check_context(stegotext_tokens)?;

    let mut target = match config.length_mode {
        LengthMode::OutOfBand => Some(ciphertext_len.ok_or(CodecError::MissingLength)?),
        LengthMode::Header32 => None,
    };
    let header = match config.length_mode {
        LengthMode::OutOfBand => 0,
        LengthMode::Header32 => HEADER_BITS,
    };

    let mut context = seed_prefix.tokens().to_vec();
    let mut recovered = BitString::new();
    for &token in stegotext_tokens {
        if let Some(c) = target {
            if recovered.len() >= header + c {
                break;
            }
        }
        let bits = match &stepper {
            // bin membership alone identifies the block
            Stepper::Bins(partition) => bins_decode_step(partition, token)?,
            Stepper::Vlc => {
                let p = model.next_distribution(&context)?;
                let code = huffman_steps::build(&p, config.weight_mode)?;
                huffman_steps::codeword(&code, token)?
            }
            Stepper::Patient { delta, divergence } => {
                let p = model.next_distribution(&context)?;
                let code = huffman_steps::build(&p, config.weight_mode)?;
                huffman_steps::patient_decode_with(&p, &code, token, *delta, *divergence)?
            }
        };
        recovered.extend_from(&bits);
        context.push(token);
        if target.is_none() && recovered.len() >= HEADER_BITS {
            target = recovered.read_uint(0, HEADER_BITS).map(|v| v as usize);
        }
    }

    let needed = header + target.unwrap_or(0);
    if target.is_none() || recovered.len() < needed {
        return Err(CodecError::Truncated {
            needed: needed.max(header),
            recovered: recovered.len(),
        });
    }
    Ok(recovered.slice(header, needed))
}
