//! Hiding bit strings in text sampled from a language model.
//!
//! The crate provides three encoders with matching decoders, all driven one
//! token at a time by a [`LanguageModel`]:
//!
//! * **Bins**: each k-bit block picks one of `2^k` seeded vocabulary bins and
//!   the token is drawn from the model restricted to that bin.
//! * **VLC**: payload bits walk the Huffman tree of each next-token
//!   distribution.
//! * **Patient-Huffman**: VLC that only embeds when the Huffman distribution
//!   is within a threshold of the model, otherwise it samples normally.
//!
//! Every generated token comes with [`StepDiagnostics`]: the exact KL
//! divergence and total variation distance between the model's next-token
//! distribution and the codec's effective distribution at that step. Summed
//! with [`accumulate`], they bound how far the whole stegotext distribution
//! drifts from the model.
//!
//! ```
//! use lmstego::{hide, seek, BitString, CodecConfig, NgramModel, Prefix, Tokenization};
//!
//! let model = NgramModel::train(
//!     "the cat sat on the mat and the dog sat on the rug",
//!     Tokenization::Words,
//!     2,
//!     0.01,
//!     &[],
//! )
//! .unwrap();
//! let secret = BitString::parse_binary("1011001110").unwrap();
//! let config = CodecConfig::vlc();
//! let out = hide(&model, &config, &Prefix::empty(), &secret).unwrap();
//! let back = seek(&model, &config, &Prefix::empty(), &out.stegotext_tokens, Some(10)).unwrap();
//! assert_eq!(back, secret);
//! ```

pub mod analysis;
pub mod bits;
pub mod bridge;
pub mod codec;
pub mod huffman;
pub mod lm;
pub mod metrics;
pub mod ngram;
pub mod partition;
pub mod sampling;

pub use analysis::{
    emit_histogram, run_experiment, DiagnosticsTable, ExperimentSpec, PrefixSource,
};
pub use bits::{BitReader, BitString};
pub use bridge::BridgeModel;
pub use codec::{
    hide, hide_with_rng, keystream_xor, seek, Algorithm, CodecConfig, CodecError, DivergenceKind,
    LengthMode, StegoResult,
};
pub use huffman::{build_huffman, huffman_distribution, HuffmanCode, WeightMode};
pub use lm::{
    next_distribution, sample_token, LanguageModel, LmError, NextTokenDistribution, Prefix,
    StaticModel, TokenId, Vocabulary,
};
pub use metrics::{
    accumulate, entropy, kl_divergence, partition_entropy, pinsker_bound, tvd, CumulativeBound,
    StepDiagnostics,
};
pub use ngram::{NgramError, NgramModel, Tokenization};
pub use partition::{make_partition, BinPartition};

/// CSV of per-step diagnostics with running cumulative bounds.
///
/// Columns: `step,kl_bits,tvd,bits_embedded,encoded,cum_kl_bits,pinsker_bound,tvd_sum,reported_bound`.
pub fn diagnostics_csv(diagnostics: &[StepDiagnostics]) -> String {
    use std::fmt::Write as _;
    let mut s = String::from(
        "step,kl_bits,tvd,bits_embedded,encoded,cum_kl_bits,pinsker_bound,tvd_sum,reported_bound\n",
    );
    let mut bound = CumulativeBound::default();
    for d in diagnostics {
        bound.push(d);
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            d.step_index,
            d.kl_bits,
            d.tvd,
            d.bits_embedded,
            d.encoded as u8,
            bound.kl_sum_bits,
            bound.pinsker_bound,
            bound.tvd_sum,
            bound.reported()
        )
        .unwrap();
    }
    s
}
