//! Deterministic Huffman coding over a next-token distribution.
//!
//! Construction order is fully specified so that two parties holding the same
//! probability vector build the same tree:
//!
//! * leaves enter the queue in ascending token id with creation indices
//!   `0..V`;
//! * the queue pops by `(weight, creation index)` ascending;
//! * each merged node takes the next creation index;
//! * the first popped child becomes the `0` branch.
//!
//! The tree is stored as an arena: leaves are nodes `0..V` (equal to their
//! token id) and internal nodes follow in creation order, so the root is node
//! `2V - 2`.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::bits::{BitReader, BitString};
use crate::lm::{NextTokenDistribution, TokenId};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HuffmanError {
    #[error("a binary prefix code needs at least 2 symbols, got {0}")]
    TooFewSymbols(usize),
}

/// How probabilities are turned into merge weights.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum WeightMode {
    /// Use the probabilities as given.
    #[default]
    Exact,
    /// Round every weight to a multiple of 2^-32 (minimum one unit), making
    /// merges exact integer arithmetic.
    Quantized,
}

const QUANTUM: f64 = 4294967296.0; // 2^32

impl WeightMode {
    fn apply(self, p: f64) -> f64 {
        match self {
            WeightMode::Exact => p,
            WeightMode::Quantized => (p * QUANTUM).round().max(1.0) / QUANTUM,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct QueueEntry {
    weight: f64,
    node: u32,
}

impl PartialEq for QueueEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for QueueEntry {}

impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for QueueEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.weight
            .total_cmp(&other.weight)
            .then(self.node.cmp(&other.node))
    }
}

const NO_PARENT: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HuffmanCode {
    depths: Vec<u32>,
    /// `children[i]` holds the `[zero, one]` children of internal node `V + i`.
    children: Vec<[u32; 2]>,
    parent: Vec<u32>,
}

/// Result of walking the tree with a [`BitReader`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecodedToken {
    pub token: TokenId,
    /// Depth of the reached leaf.
    pub bits_consumed: usize,
    /// Bits that came from the real payload rather than padding.
    pub real_bits: usize,
}

impl HuffmanCode {
    /// Builds the code for `weights` (any non-negative reals, one per token).
    pub fn from_weights(weights: &[f64], mode: WeightMode) -> Result<Self, HuffmanError> {
        let v = weights.len();
        if v < 2 {
            return Err(HuffmanError::TooFewSymbols(v));
        }
        let mut heap: BinaryHeap<Reverse<QueueEntry>> = weights
            .iter()
            .enumerate()
            .map(|(i, &w)| {
                Reverse(QueueEntry {
                    weight: mode.apply(w),
                    node: i as u32,
                })
            })
            .collect();
        let mut children = Vec::with_capacity(v - 1);
        let mut parent = vec![NO_PARENT; 2 * v - 1];
        while heap.len() > 1 {
            let Reverse(zero) = heap.pop().expect("len > 1");
            let Reverse(one) = heap.pop().expect("len > 1");
            let node = (v + children.len()) as u32;
            children.push([zero.node, one.node]);
            parent[zero.node as usize] = node;
            parent[one.node as usize] = node;
            heap.push(Reverse(QueueEntry {
                weight: zero.weight + one.weight,
                node,
            }));
        }

        // Parents are created after their children, so a reverse sweep over
        // the internal nodes visits every parent before its children.
        let mut node_depth = vec![0u32; 2 * v - 1];
        for i in (0..children.len()).rev() {
            let d = node_depth[v + i] + 1;
            for c in children[i] {
                node_depth[c as usize] = d;
            }
        }
        node_depth.truncate(v);
        let code = Self {
            depths: node_depth,
            children,
            parent,
        };
        debug_assert!((code.kraft_sum() - 1.0).abs() < 1e-12);
        Ok(code)
    }

    pub fn vocab_size(&self) -> usize {
        self.depths.len()
    }

    pub fn depths(&self) -> &[u32] {
        &self.depths
    }

    pub fn depth(&self, token: TokenId) -> u32 {
        self.depths[token.index()]
    }

    pub fn max_depth(&self) -> u32 {
        self.depths.iter().copied().max().unwrap_or(0)
    }

    fn root(&self) -> u32 {
        (2 * self.vocab_size() - 2) as u32
    }

    /// Σ 2^-depth over all leaves; exactly 1 for a full binary tree.
    pub fn kraft_sum(&self) -> f64 {
        self.depths.iter().map(|&d| dyadic(d)).sum()
    }

    /// Σ p(s)·depth(s).
    pub fn expected_length(&self, probs: &[f64]) -> f64 {
        probs
            .iter()
            .zip(&self.depths)
            .map(|(&p, &d)| p * d as f64)
            .sum()
    }

    /// Follows bits from the root until a leaf is reached.
    pub fn decode_token(&self, reader: &mut BitReader<'_>) -> DecodedToken {
        let v = self.vocab_size() as u32;
        let start = reader.position();
        let mut node = self.root();
        let mut consumed = 0;
        while node >= v {
            let bit = reader.read_bit();
            node = self.children[(node - v) as usize][bit as usize];
            consumed += 1;
        }
        DecodedToken {
            token: TokenId(node),
            bits_consumed: consumed,
            real_bits: reader.position() - start,
        }
    }

    /// The codeword of `token`, root to leaf.
    pub fn encode_token(&self, token: TokenId) -> BitString {
        let v = self.vocab_size() as u32;
        let mut node = token.0;
        assert!(node < v, "token {node} out of range");
        let mut rev = Vec::with_capacity(self.depths[node as usize] as usize);
        while self.parent[node as usize] != NO_PARENT {
            let p = self.parent[node as usize];
            rev.push(self.children[(p - v) as usize][1] == node);
            node = p;
        }
        rev.into_iter().rev().collect()
    }

    pub fn codewords(&self) -> Vec<BitString> {
        (0..self.vocab_size() as u32)
            .map(|t| self.encode_token(TokenId(t)))
            .collect()
    }
}

/// Builds the Huffman code of `p` with exact weights.
pub fn build_huffman(p: &NextTokenDistribution) -> Result<HuffmanCode, HuffmanError> {
    HuffmanCode::from_weights(p.probs(), WeightMode::Exact)
}

/// Dyadic distribution induced by a code: mass 2^-depth per token.
#[derive(Debug, Clone, PartialEq)]
pub struct HuffmanDistribution {
    mass: Vec<f64>,
}

impl HuffmanDistribution {
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }
}

pub fn huffman_distribution(code: &HuffmanCode) -> HuffmanDistribution {
    HuffmanDistribution {
        mass: code.depths.iter().map(|&d| dyadic(d)).collect(),
    }
}

fn dyadic(depth: u32) -> f64 {
    2f64.powi(-(depth as i32))
}
