//! Fixed-length coding: each k-bit block selects a bin, and the token is drawn
//! from the language model restricted to that bin.

use rand::RngCore;

use crate::bits::BitString;
use crate::lm::{NextTokenDistribution, TokenId};
use crate::metrics::{partition_entropy, tvd, StepDiagnostics};
use crate::partition::BinPartition;
use crate::sampling::unit_interval;

use super::CodecError;

/// Single-step distribution induced by Bins when the block is uniform:
/// `q(s) = 2^-k · p(s) / P(bin of s)`.
pub fn bins_effective(p: &[f64], partition: &BinPartition) -> Vec<f64> {
    let masses = partition.bin_masses(p);
    let scale = 1.0 / partition.num_bins() as f64;
    p.iter()
        .enumerate()
        .map(|(s, &ps)| scale * ps / masses[partition.bin_of(TokenId(s as u32)) as usize])
        .collect()
}

/// Closed-form per-step KL for Bins, `k - H(B)`, clamped to `[0, k]`.
pub fn bins_step_kl(p: &[f64], partition: &BinPartition) -> f64 {
    let k = partition.k() as f64;
    (k - partition_entropy(p, partition)).clamp(0.0, k)
}

pub(super) fn bins_diagnostics(
    p: &[f64],
    partition: &BinPartition,
) -> Result<StepDiagnostics, CodecError> {
    let effective = bins_effective(p, partition);
    Ok(StepDiagnostics {
        step_index: 0,
        kl_bits: bins_step_kl(p, partition),
        tvd: tvd(p, &effective)?,
        bits_embedded: partition.k() as usize,
        encoded: true,
    })
}

/// Draws a token from `p` restricted to bin `block` by inverse CDF over the
/// bin's members in ascending id.
pub fn sample_in_bin<R: RngCore + ?Sized>(
    p: &[f64],
    partition: &BinPartition,
    block: u32,
    rng: &mut R,
) -> TokenId {
    let members = partition.bin(block);
    let mass: f64 = members.iter().map(|t| p[t.index()]).sum();
    let target = unit_interval(rng) * mass;
    let mut acc = 0.0;
    for &t in members {
        acc += p[t.index()];
        if target < acc {
            return t;
        }
    }
    *members.last().expect("bins are non-empty")
}

/// Encodes one k-bit `block` (big-endian value in `[0, 2^k)`).
///
/// The returned diagnostics report `bits_embedded = k`; callers embedding a
/// zero-padded final block overwrite it with the real bit count.
pub fn bins_encode_step<R: RngCore + ?Sized>(
    p: &NextTokenDistribution,
    partition: &BinPartition,
    block: u32,
    rng: &mut R,
) -> Result<(TokenId, StepDiagnostics), CodecError> {
    check_vocab(p, partition)?;
    if block as usize >= partition.num_bins() {
        return Err(CodecError::InvalidConfig(format!(
            "block {block} does not fit in {} bits",
            partition.k()
        )));
    }
    let diag = bins_diagnostics(p.probs(), partition)?;
    Ok((sample_in_bin(p.probs(), partition, block, rng), diag))
}

/// The bin index of `observed` as `k` big-endian bits.
pub fn bins_decode_step(
    partition: &BinPartition,
    observed: TokenId,
) -> Result<BitString, CodecError> {
    if observed.index() >= partition.vocab_size() {
        return Err(crate::lm::LmError::TokenOutOfRange {
            id: observed.0,
            vocab_size: partition.vocab_size(),
        }
        .into());
    }
    Ok(BitString::from_uint(
        partition.bin_of(observed) as u64,
        partition.k() as usize,
    ))
}

fn check_vocab(p: &NextTokenDistribution, partition: &BinPartition) -> Result<(), CodecError> {
    if p.len() != partition.vocab_size() {
        return Err(CodecError::InvalidConfig(format!(
            "partition covers {} tokens but the distribution has {}",
            partition.vocab_size(),
            p.len()
        )));
    }
    Ok(())
}
