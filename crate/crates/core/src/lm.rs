//! Language-model contract shared by every codec and metric.
//!
//! A [`LanguageModel`] maps a context (a sequence of [`TokenId`]s) to a dense
//! [`NextTokenDistribution`]. Sender and receiver must obtain bit-identical
//! distributions for equal contexts, otherwise Huffman trees and bin masses
//! diverge and decoding fails. Every backend distribution is therefore passed
//! through the same floor-and-renormalize step, summed in ascending token
//! order.

use std::fmt;

use rand::RngCore;
use thiserror::Error;

use crate::sampling::unit_interval;

/// Smallest probability any token may carry after normalization.
pub const PROB_FLOOR: f64 = 1e-10;

/// Tolerance on the raw mass handed to [`NextTokenDistribution::new`].
pub const MASS_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum LmError {
    #[error("token id {id} out of range for vocabulary of size {vocab_size}")]
    TokenOutOfRange { id: u32, vocab_size: usize },
    #[error("probability vector has length {got}, expected {expected}")]
    LengthMismatch { got: usize, expected: usize },
    #[error("probability vector sums to {0}, outside 1 \u{b1} {MASS_TOLERANCE}")]
    BadMass(f64),
    #[error("probability entry {index} is {value}, must be finite and non-negative")]
    BadEntry { index: usize, value: f64 },
    #[error("vocabulary must contain at least one token")]
    EmptyVocabulary,
    #[error("unknown token {0:?}")]
    UnknownToken(String),
    #[error("backend failure: {0}")]
    Backend(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Index of a token in a [`Vocabulary`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TokenId(pub u32);

impl TokenId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<u32> for TokenId {
    fn from(id: u32) -> Self {
        TokenId(id)
    }
}

impl fmt::Display for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Ordered token surface forms; entry `i` renders `TokenId(i)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    surface_forms: Vec<String>,
}

impl Vocabulary {
    pub fn new(surface_forms: Vec<String>) -> Result<Self, LmError> {
        if surface_forms.is_empty() {
            return Err(LmError::EmptyVocabulary);
        }
        Ok(Self { surface_forms })
    }

    pub fn len(&self) -> usize {
        self.surface_forms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.surface_forms.is_empty()
    }

    pub fn surface(&self, id: TokenId) -> Option<&str> {
        self.surface_forms.get(id.index()).map(String::as_str)
    }

    pub fn surface_forms(&self) -> &[String] {
        &self.surface_forms
    }

    /// Linear lookup; callers needing many lookups should build their own index.
    pub fn id_of(&self, surface: &str) -> Option<TokenId> {
        self.surface_forms
            .iter()
            .position(|s| s == surface)
            .map(|i| TokenId(i as u32))
    }

    pub fn check(&self, id: TokenId) -> Result<TokenId, LmError> {
        check_token(id, self.len())
    }
}

pub(crate) fn check_token(id: TokenId, vocab_size: usize) -> Result<TokenId, LmError> {
    if id.index() < vocab_size {
        Ok(id)
    } else {
        Err(LmError::TokenOutOfRange {
            id: id.0,
            vocab_size,
        })
    }
}

/// A context of previously generated tokens. May be empty.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Prefix {
    tokens: Vec<TokenId>,
}

impl Prefix {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds a prefix, validating every id against `vocab_size`.
    pub fn new(tokens: Vec<TokenId>, vocab_size: usize) -> Result<Self, LmError> {
        for &t in &tokens {
            check_token(t, vocab_size)?;
        }
        Ok(Self { tokens })
    }

    pub fn tokens(&self) -> &[TokenId] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Dense next-token probability vector, floored at [`PROB_FLOOR`] and
/// renormalized.
#[derive(Debug, Clone, PartialEq)]
pub struct NextTokenDistribution {
    probs: Vec<f64>,
}

impl NextTokenDistribution {
    /// Validates `probs` (non-negative, finite, mass within
    /// [`MASS_TOLERANCE`] of 1), then floors and renormalizes.
    pub fn new(probs: Vec<f64>) -> Result<Self, LmError> {
        validate_entries(&probs)?;
        let total = ascending_sum(&probs);
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(LmError::BadMass(total));
        }
        Ok(Self {
            probs: floor_and_renormalize(probs, total),
        })
    }

    /// Normalizes arbitrary non-negative weights (at least one positive).
    pub fn from_weights(weights: Vec<f64>) -> Result<Self, LmError> {
        validate_entries(&weights)?;
        let total = ascending_sum(&weights);
        if total.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) || !total.is_finite() {
            return Err(LmError::BadMass(total));
        }
        Ok(Self {
            probs: floor_and_renormalize(weights, total),
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn prob(&self, id: TokenId) -> f64 {
        self.probs[id.index()]
    }
}

fn validate_entries(probs: &[f64]) -> Result<(), LmError> {
    if probs.is_empty() {
        return Err(LmError::EmptyVocabulary);
    }
    for (index, &value) in probs.iter().enumerate() {
        if !value.is_finite() || value < 0.0 {
            return Err(LmError::BadEntry { index, value });
        }
    }
    Ok(())
}

fn ascending_sum(values: &[f64]) -> f64 {
    values.iter().sum()
}

/// Raises every entry to at least `PROB_FLOOR` and rescales the remaining
/// entries so that the vector sums to one. Floored entries are pinned at
/// exactly `PROB_FLOOR`; the loop re-runs while rescaling pushes new entries
/// under the floor.
fn floor_and_renormalize(mut probs: Vec<f64>, total: f64) -> Vec<f64> {
    for p in probs.iter_mut() {
        *p /= total;
    }
    let n = probs.len();
    if n == 1 {
        probs[0] = 1.0;
        return probs;
    }
    let mut pinned = vec![false; n];
    loop {
        let mut changed = false;
        for (p, pin) in probs.iter_mut().zip(pinned.iter_mut()) {
            if !*pin && *p < PROB_FLOOR {
                *pin = true;
                changed = true;
            }
        }
        let pinned_count = pinned.iter().filter(|&&b| b).count();
        let free_mass: f64 = probs
            .iter()
            .zip(&pinned)
            .filter(|(_, &pin)| !pin)
            .map(|(p, _)| *p)
            .sum();
        let target = 1.0 - pinned_count as f64 * PROB_FLOOR;
        let scale = target / free_mass;
        for (p, &pin) in probs.iter_mut().zip(&pinned) {
            *p = if pin { PROB_FLOOR } else { *p * scale };
        }
        if !changed {
            break;
        }
    }
    probs
}

/// Backend-independent language model.
///
/// Implementations must be deterministic: equal contexts yield bit-identical
/// distributions. Handles are shared read-only across threads.
pub trait LanguageModel: Send + Sync {
    fn vocab_size(&self) -> usize;

    fn next_distribution(&self, context: &[TokenId]) -> Result<NextTokenDistribution, LmError>;

    fn tokenize(&self, text: &str) -> Result<Vec<TokenId>, LmError>;

    fn detokenize(&self, tokens: &[TokenId]) -> Result<String, LmError>;

    fn check_context(&self, context: &[TokenId]) -> Result<(), LmError> {
        let v = self.vocab_size();
        for &t in context {
            check_token(t, v)?;
        }
        Ok(())
    }
}

impl<M: LanguageModel + ?Sized> LanguageModel for &M {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }
    fn next_distribution(&self, context: &[TokenId]) -> Result<NextTokenDistribution, LmError> {
        (**self).next_distribution(context)
    }
    fn tokenize(&self, text: &str) -> Result<Vec<TokenId>, LmError> {
        (**self).tokenize(text)
    }
    fn detokenize(&self, tokens: &[TokenId]) -> Result<String, LmError> {
        (**self).detokenize(tokens)
    }
}

impl<M: LanguageModel + ?Sized> LanguageModel for Box<M> {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }
    fn next_distribution(&self, context: &[TokenId]) -> Result<NextTokenDistribution, LmError> {
        (**self).next_distribution(context)
    }
    fn tokenize(&self, text: &str) -> Result<Vec<TokenId>, LmError> {
        (**self).tokenize(text)
    }
    fn detokenize(&self, tokens: &[TokenId]) -> Result<String, LmError> {
        (**self).detokenize(tokens)
    }
}

/// Queries `model` after validating `prefix` against its vocabulary.
pub fn next_distribution<M: LanguageModel + ?Sized>(
    model: &M,
    prefix: &Prefix,
) -> Result<NextTokenDistribution, LmError> {
    model.check_context(prefix.tokens())?;
    model.next_distribution(prefix.tokens())
}

/// Inverse-CDF draw over ascending token ids.
pub fn sample_token<R: RngCore + ?Sized>(dist: &NextTokenDistribution, rng: &mut R) -> TokenId {
    let u = unit_interval(rng);
    TokenId(inverse_cdf(dist.probs(), u) as u32)
}

/// First index whose cumulative mass exceeds `u`; the last index absorbs any
/// rounding shortfall.
pub(crate) fn inverse_cdf(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Context-free model returning the same distribution at every step.
///
/// Useful for synthetic experiments (uniform or near-point-mass sources) and
/// tests.
#[derive(Debug, Clone)]
pub struct StaticModel {
    vocabulary: Vocabulary,
    dist: NextTokenDistribution,
}

impl StaticModel {
    pub fn new(dist: NextTokenDistribution) -> Self {
        let forms = (0..dist.len()).map(|i| format!("t{i}")).collect();
        Self {
            vocabulary: Vocabulary {
                surface_forms: forms,
            },
            dist,
        }
    }

    pub fn uniform(vocab_size: usize) -> Result<Self, LmError> {
        Ok(Self::new(NextTokenDistribution::from_weights(vec![
            1.0;
            vocab_size
        ])?))
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }
}

impl LanguageModel for StaticModel {
    fn vocab_size(&self) -> usize {
        self.dist.len()
    }

    fn next_distribution(&self, context: &[TokenId]) -> Result<NextTokenDistribution, LmError> {
        self.check_context(context)?;
        Ok(self.dist.clone())
    }

    fn tokenize(&self, text: &str) -> Result<Vec<TokenId>, LmError> {
        text.split_whitespace()
            .map(|w| {
                self.vocabulary
                    .id_of(w)
                    .ok_or_else(|| LmError::UnknownToken(w.to_string()))
            })
            .collect()
    }

    fn detokenize(&self, tokens: &[TokenId]) -> Result<String, LmError> {
        let words = tokens
            .iter()
            .map(|&t| {
                self.vocabulary
                    .check(t)
                    .map(|t| self.vocabulary.surface_forms[t.index()].as_str())
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(words.join(" "))
    }
}
