//! Variable-length coding over a per-step Huffman tree, and its patient
//! variant that only embeds when the tree's dyadic distribution is close
//! enough to the model's.

use rand::RngCore;

use crate::bits::{BitReader, BitString};
use crate::huffman::{huffman_distribution, HuffmanCode, WeightMode};
use crate::lm::{sample_token, LmError, NextTokenDistribution, TokenId};
use crate::metrics::{kl_divergence, tvd, StepDiagnostics};

use super::{CodecError, DivergenceKind};

/// KL (bits) and TVD between `p` and the Huffman distribution of `code`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HuffmanDivergence {
    pub kl_bits: f64,
    pub tvd: f64,
}

impl HuffmanDivergence {
    pub fn measure(p: &[f64], code: &HuffmanCode) -> Result<Self, CodecError> {
        let m = huffman_distribution(code);
        Ok(Self {
            kl_bits: kl_divergence(p, m.mass())?,
            tvd: tvd(p, m.mass())?,
        })
    }

    pub fn get(&self, kind: DivergenceKind) -> f64 {
        match kind {
            DivergenceKind::Tvd => self.tvd,
            DivergenceKind::Kl => self.kl_bits,
        }
    }
}

pub(super) fn build(
    p: &NextTokenDistribution,
    mode: WeightMode,
) -> Result<HuffmanCode, CodecError> {
    Ok(HuffmanCode::from_weights(p.probs(), mode)?)
}

pub(super) fn vlc_step(
    p: &NextTokenDistribution,
    code: &HuffmanCode,
    bits: &mut BitReader<'_>,
) -> Result<(TokenId, StepDiagnostics), CodecError> {
    let div = HuffmanDivergence::measure(p.probs(), code)?;
    let decoded = code.decode_token(bits);
    Ok((
        decoded.token,
        StepDiagnostics {
            step_index: 0,
            kl_bits: div.kl_bits,
            tvd: div.tvd,
            bits_embedded: decoded.real_bits,
            encoded: true,
        },
    ))
}

pub(super) fn patient_step<R: RngCore + ?Sized>(
    p: &NextTokenDistribution,
    code: &HuffmanCode,
    bits: &mut BitReader<'_>,
    delta: f64,
    kind: DivergenceKind,
    rng: &mut R,
) -> Result<(TokenId, StepDiagnostics), CodecError> {
    let div = HuffmanDivergence::measure(p.probs(), code)?;
    if div.get(kind) < delta {
        let decoded = code.decode_token(bits);
        Ok((
            decoded.token,
            StepDiagnostics {
                step_index: 0,
                kl_bits: div.kl_bits,
                tvd: div.tvd,
                bits_embedded: decoded.real_bits,
                encoded: true,
            },
        ))
    } else {
        // Sampling from p leaves this step's effective distribution equal to p.
        Ok((
            sample_token(p, rng),
            StepDiagnostics {
                step_index: 0,
                kl_bits: 0.0,
                tvd: 0.0,
                bits_embedded: 0,
                encoded: false,
            },
        ))
    }
}

pub(super) fn codeword(code: &HuffmanCode, observed: TokenId) -> Result<BitString, CodecError> {
    if observed.index() >= code.vocab_size() {
        return Err(LmError::TokenOutOfRange {
            id: observed.0,
            vocab_size: code.vocab_size(),
        }
        .into());
    }
    Ok(code.encode_token(observed))
}

/// Walks the Huffman tree of `p` with ciphertext bits (zero-padded once the
/// reader runs dry). Diagnostics carry `KL(p || m_c)`, `TVD(p, m_c)` and the
/// number of real bits consumed.
pub fn vlc_encode_step(
    p: &NextTokenDistribution,
    bits: &mut BitReader<'_>,
) -> Result<(TokenId, StepDiagnostics), CodecError> {
    vlc_step(p, &build(p, WeightMode::Exact)?, bits)
}

/// Codeword of `observed` in the Huffman tree of `p`.
pub fn vlc_decode_step(
    p: &NextTokenDistribution,
    observed: TokenId,
) -> Result<BitString, CodecError> {
    codeword(&build(p, WeightMode::Exact)?, observed)
}

/// One patient-Huffman step: embed as VLC when the chosen divergence between
/// `p` and its Huffman distribution is below `delta`, otherwise sample from
/// `p` and embed nothing.
pub fn patient_encode_step<R: RngCore + ?Sized>(
    p: &NextTokenDistribution,
    bits: &mut BitReader<'_>,
    delta: f64,
    kind: DivergenceKind,
    rng: &mut R,
) -> Result<(TokenId, StepDiagnostics), CodecError> {
    check_delta(delta)?;
    patient_step(p, &build(p, WeightMode::Exact)?, bits, delta, kind, rng)
}

/// Receiver side of [`patient_encode_step`]: replays the threshold test and
/// returns the codeword of `observed` if the step carried payload, else an
/// empty bit string.
pub fn patient_decode_step(
    p: &NextTokenDistribution,
    observed: TokenId,
    delta: f64,
    kind: DivergenceKind,
) -> Result<BitString, CodecError> {
    check_delta(delta)?;
    patient_decode_with(p, &build(p, WeightMode::Exact)?, observed, delta, kind)
}

pub(super) fn patient_decode_with(
    p: &NextTokenDistribution,
    code: &HuffmanCode,
    observed: TokenId,
    delta: f64,
    kind: DivergenceKind,
) -> Result<BitString, CodecError> {
    let div = HuffmanDivergence::measure(p.probs(), code)?;
    if div.get(kind) < delta {
        codeword(code, observed)
    } else {
        if observed.index() >= code.vocab_size() {
            return Err(LmError::TokenOutOfRange {
                id: observed.0,
                vocab_size: code.vocab_size(),
            }
            .into());
        }
        Ok(BitString::new())
    }
}

pub(super) fn check_delta(delta: f64) -> Result<(), CodecError> {
    if delta > 0.0 && !delta.is_nan() {
        Ok(())
    } else {
        Err(CodecError::InvalidConfig(format!(
            "delta must be > 0, got {delta}"
        )))
    }
}
