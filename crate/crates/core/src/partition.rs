//! Seeded partition of the vocabulary into `2^k` near-equal bins.

use thiserror::Error;

use crate::lm::TokenId;
use crate::sampling::{codec_rng, uniform_below};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PartitionError {
    #[error("k must be between 1 and 31, got {0}")]
    BadK(u32),
    #[error("2^{k} bins exceed vocabulary size {vocab_size}; some bin would be empty")]
    TooManyBins { k: u32, vocab_size: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinPartition {
    k: u32,
    seed: u64,
    assignment: Vec<u32>,
    /// Members of each bin in ascending token id.
    bins: Vec<Vec<TokenId>>,
}

impl BinPartition {
    /// Fisher–Yates shuffle of `0..V` driven by `seed`, then round-robin
    /// slicing: the `i`-th shuffled token lands in bin `i mod 2^k`.
    pub fn new(seed: u64, vocab_size: usize, k: u32) -> Result<Self, PartitionError> {
        if k == 0 || k > 31 {
            return Err(PartitionError::BadK(k));
        }
        let num_bins = 1usize << k;
        if num_bins > vocab_size {
            return Err(PartitionError::TooManyBins { k, vocab_size });
        }
        let mut order: Vec<u32> = (0..vocab_size as u32).collect();
        let mut rng = codec_rng(seed);
        for i in (1..vocab_size).rev() {
            let j = uniform_below(&mut rng, i as u64 + 1) as usize;
            order.swap(i, j);
        }
        let mut assignment = vec![0u32; vocab_size];
        for (i, &token) in order.iter().enumerate() {
            assignment[token as usize] = (i % num_bins) as u32;
        }
        Ok(Self::from_assignment_unchecked(k, seed, assignment))
    }

    /// Builds a partition from an explicit assignment (token -> bin). Used for
    /// hand-specified bins in tests and experiments; `seed` is recorded as 0.
    pub fn from_assignment(k: u32, assignment: Vec<u32>) -> Result<Self, PartitionError> {
        if k == 0 || k > 31 {
            return Err(PartitionError::BadK(k));
        }
        let num_bins = 1u32 << k;
        let vocab_size = assignment.len();
        let mut sizes = vec![0usize; num_bins as usize];
        for &b in &assignment {
            if b >= num_bins {
                return Err(PartitionError::TooManyBins { k, vocab_size });
            }
            sizes[b as usize] += 1;
        }
        if sizes.contains(&0) {
            return Err(PartitionError::TooManyBins { k, vocab_size });
        }
        Ok(Self::from_assignment_unchecked(k, 0, assignment))
    }

    fn from_assignment_unchecked(k: u32, seed: u64, assignment: Vec<u32>) -> Self {
        let mut bins = vec![Vec::new(); 1usize << k];
        for (token, &b) in assignment.iter().enumerate() {
            bins[b as usize].push(TokenId(token as u32));
        }
        Self {
            k,
            seed,
            assignment,
            bins,
        }
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn num_bins(&self) -> usize {
        self.bins.len()
    }

    pub fn vocab_size(&self) -> usize {
        self.assignment.len()
    }

    pub fn bin_of(&self, token: TokenId) -> u32 {
        self.assignment[token.index()]
    }

    pub fn bin(&self, index: u32) -> &[TokenId] {
        &self.bins[index as usize]
    }

    pub fn bins(&self) -> &[Vec<TokenId>] {
        &self.bins
    }

    pub fn assignment(&self) -> &[u32] {
        &self.assignment
    }

    /// Probability mass of each bin under `probs`, summed in ascending token
    /// order within the bin.
    pub fn bin_masses(&self, probs: &[f64]) -> Vec<f64> {
        self.bins
            .iter()
            .map(|members| members.iter().map(|t| probs[t.index()]).sum())
            .collect()
    }
}

pub fn make_partition(
    seed: u64,
    vocab_size: usize,
    k: u32,
) -> Result<BinPartition, PartitionError> {
    BinPartition::new(seed, vocab_size, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singleton_bins() {
        let p = make_partition(7, 8, 3).unwrap();
        assert!(p.bins().iter().all(|b| b.len() == 1));
        let mut seen: Vec<u32> = p.assignment().to_vec();
        seen.sort();
        assert_eq!(seen, (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn near_equal_sizes() {
        let p = make_partition(1, 10, 2).unwrap();
        let sizes: Vec<usize> = p.bins().iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![3, 3, 2, 2]);
        for (b, members) in p.bins().iter().enumerate() {
            for &t in members {
                assert_eq!(p.bin_of(t), b as u32);
            }
        }
    }

    #[test]
    fn deterministic_in_seed() {
        assert_eq!(make_partition(42, 100, 3), make_partition(42, 100, 3));
        assert_ne!(
            make_partition(42, 100, 3).unwrap().assignment(),
            make_partition(43, 100, 3).unwrap().assignment()
        );
    }

    #[test]
    fn rejects_too_many_bins() {
        assert_eq!(
            make_partition(0, 7, 3),
            Err(PartitionError::TooManyBins {
                k: 3,
                vocab_size: 7
            })
        );
        assert_eq!(make_partition(0, 7, 0), Err(PartitionError::BadK(0)));
    }

    #[test]
    fn explicit_assignment() {
        let p = BinPartition::from_assignment(1, vec![0, 0, 1, 1]).unwrap();
        assert_eq!(p.bin(1), &[TokenId(2), TokenId(3)]);
        assert_eq!(
            p.bin_masses(&[0.7, 0.1, 0.1, 0.1]),
            vec![0.7999999999999999, 0.2]
        );
        assert!(BinPartition::from_assignment(1, vec![0, 0, 0]).is_err());
    }
}
