//! Add-alpha smoothed n-gram language model.
//!
//! Counts are kept for every context length from `0` to `order - 1`. A query
//! backs off to the longest suffix of the context that was observed during
//! training, then scores every token as
//! `(count(context, s) + alpha) / (total(context) + alpha * V)`.

mod format;

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use thiserror::Error;

use crate::lm::{LanguageModel, LmError, NextTokenDistribution, TokenId, Vocabulary};

pub use format::{FORMAT_VERSION, MAGIC};

pub const DEFAULT_ALPHA: f64 = 0.01;

#[derive(Debug, Error)]
pub enum NgramError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("order must be at least 1")]
    BadOrder,
    #[error("alpha must be positive and finite, got {0}")]
    BadAlpha(f64),
    #[error("not an n-gram model file (bad magic)")]
    BadMagic,
    #[error(
        "unsupported model format version {found} (this build reads version {FORMAT_VERSION})"
    )]
    UnsupportedVersion { found: u16 },
    #[error("model file is truncated")]
    Truncated,
    #[error("model file checksum mismatch (stored {stored:08x}, computed {computed:08x})")]
    ChecksumMismatch { stored: u32, computed: u32 },
    #[error("malformed model file: {0}")]
    Malformed(String),
    #[error(transparent)]
    Lm(#[from] LmError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// How raw text is split into tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tokenization {
    /// Whitespace-separated words, rendered joined by a single space.
    Words,
    /// Unicode scalar values, rendered concatenated.
    Chars,
}

impl Tokenization {
    fn split<'a>(self, text: &'a str) -> Box<dyn Iterator<Item = String> + 'a> {
        match self {
            Tokenization::Words => Box::new(text.split_whitespace().map(str::to_owned)),
            Tokenization::Chars => Box::new(text.chars().map(String::from)),
        }
    }

    fn separator(self) -> &'static str {
        match self {
            Tokenization::Words => " ",
            Tokenization::Chars => "",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct ContextCounts {
    pub(crate) total: u64,
    /// `(token, count)` sorted by token.
    pub(crate) counts: Vec<(u32, u64)>,
}

#[derive(Debug, Clone)]
pub struct NgramModel {
    order: usize,
    alpha: f64,
    /// Decimal form of `alpha` as written to disk; parsing it yields `alpha`.
    alpha_text: String,
    tokenization: Tokenization,
    vocabulary: Vocabulary,
    index: HashMap<String, u32>,
    counts: BTreeMap<Vec<u32>, ContextCounts>,
}

impl NgramModel {
    /// Trains on raw text. The vocabulary is the corpus alphabet in order of
    /// first appearance followed by any `specials` not already present.
    pub fn train(
        corpus: &str,
        tokenization: Tokenization,
        order: usize,
        alpha: f64,
        specials: &[String],
    ) -> Result<Self, NgramError> {
        let mut forms: Vec<String> = Vec::new();
        let mut index: HashMap<String, u32> = HashMap::new();
        let mut tokens = Vec::new();
        for piece in tokenization.split(corpus) {
            let next = forms.len() as u32;
            let id = *index.entry(piece.clone()).or_insert_with(|| {
                forms.push(piece);
                next
            });
            tokens.push(TokenId(id));
        }
        if tokens.is_empty() {
            return Err(NgramError::EmptyCorpus);
        }
        for s in specials {
            if !index.contains_key(s) {
                index.insert(s.clone(), forms.len() as u32);
                forms.push(s.clone());
            }
        }
        Self::train_tokens(Vocabulary::new(forms)?, &tokens, tokenization, order, alpha)
    }

    /// Trains on an already tokenized sequence over `vocabulary`.
    pub fn train_tokens(
        vocabulary: Vocabulary,
        tokens: &[TokenId],
        tokenization: Tokenization,
        order: usize,
        alpha: f64,
    ) -> Result<Self, NgramError> {
        if tokens.is_empty() {
            return Err(NgramError::EmptyCorpus);
        }
        if order == 0 {
            return Err(NgramError::BadOrder);
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(NgramError::BadAlpha(alpha));
        }
        for &t in tokens {
            vocabulary.check(t)?;
        }
        let mut raw: BTreeMap<Vec<u32>, BTreeMap<u32, u64>> = BTreeMap::new();
        for i in 0..tokens.len() {
            let target = tokens[i].0;
            for len in 0..=(order - 1).min(i) {
                let ctx: Vec<u32> = tokens[i - len..i].iter().map(|t| t.0).collect();
                *raw.entry(ctx).or_default().entry(target).or_insert(0) += 1;
            }
        }
        let counts = raw
            .into_iter()
            .map(|(ctx, m)| {
                let counts: Vec<(u32, u64)> = m.into_iter().collect();
                let total = counts.iter().map(|&(_, c)| c).sum();
                (ctx, ContextCounts { total, counts })
            })
            .collect();
        Self::from_parts(order, format!("{alpha}"), tokenization, vocabulary, counts)
    }

    pub(crate) fn from_parts(
        order: usize,
        alpha_text: String,
        tokenization: Tokenization,
        vocabulary: Vocabulary,
        counts: BTreeMap<Vec<u32>, ContextCounts>,
    ) -> Result<Self, NgramError> {
        let alpha: f64 = alpha_text
            .parse()
            .map_err(|_| NgramError::Malformed(format!("alpha {alpha_text:?} is not a number")))?;
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(NgramError::BadAlpha(alpha));
        }
        if order == 0 {
            return Err(NgramError::BadOrder);
        }
        if !counts.contains_key(&Vec::new()) {
            return Err(NgramError::EmptyCorpus);
        }
        let index = vocabulary
            .surface_forms()
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i as u32))
            .collect();
        Ok(Self {
            order,
            alpha,
            alpha_text,
            tokenization,
            vocabulary,
            index,
            counts,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn tokenization(&self) -> Tokenization {
        self.tokenization
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    /// Number of stored contexts (all lengths).
    pub fn num_contexts(&self) -> usize {
        self.counts.len()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), NgramError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, NgramError> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        format::encode(self)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, NgramError> {
        format::decode(bytes)
    }

    fn backoff(&self, context: &[TokenId]) -> &ContextCounts {
        let max_len = (self.order - 1).min(context.len());
        let mut key: Vec<u32> = Vec::with_capacity(max_len);
        for len in (0..=max_len).rev() {
            key.clear();
            key.extend(context[context.len() - len..].iter().map(|t| t.0));
            if let Some(c) = self.counts.get(&key) {
                if c.total > 0 {
                    return c;
                }
            }
        }
        unreachable!("the empty context is always present")
    }
}

impl LanguageModel for NgramModel {
    fn vocab_size(&self) -> usize {
        self.vocabulary.len()
    }

    fn next_distribution(&self, context: &[TokenId]) -> Result<NextTokenDistribution, LmError> {
        self.check_context(context)?;
        let v = self.vocab_size();
        let ctx = self.backoff(context);
        let denom = ctx.total as f64 + self.alpha * v as f64;
        let mut probs = vec![self.alpha / denom; v];
        for &(t, c) in &ctx.counts {
            probs[t as usize] = (c as f64 + self.alpha) / denom;
        }
        NextTokenDistribution::new(probs)
    }

    fn tokenize(&self, text: &str) -> Result<Vec<TokenId>, LmError> {
        self.tokenization
            .split(text)
            .map(|piece| {
                self.index
                    .get(&piece)
                    .map(|&i| TokenId(i))
                    .ok_or(LmError::UnknownToken(piece))
            })
            .collect()
    }

    fn detokenize(&self, tokens: &[TokenId]) -> Result<String, LmError> {
        let pieces = tokens
            .iter()
            .map(|&t| {
                self.vocabulary
                    .check(t)
                    .map(|t| self.vocabulary.surface_forms()[t.index()].as_str())
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(pieces.join(self.tokenization.separator()))
    }
}
