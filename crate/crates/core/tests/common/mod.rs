#![allow(dead_code)]

use lmstego::{NgramModel, TokenId, Tokenization, Vocabulary};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

/// Successor slots for choice-point words: a ruler sequence giving the four
/// successors counts 8, 4, 2, 1, with the sixteenth slot left to chance.
const RULER: [usize; 16] = [0, 1, 0, 2, 0, 1, 0, 3, 0, 1, 0, 2, 0, 1, 0, 4];

/// Token stream over `vocab_size` words. Words `w % 3 == 0` are choice points
/// with geometric successor counts, `w % 3 == 1` mostly repeat a favourite,
/// the rest draw from a skewed global distribution.
pub fn synthetic_corpus(vocab_size: usize, seed: u64) -> Vec<TokenId> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = vocab_size as u32;
    let global = |rng: &mut ChaCha8Rng| {
        let r: f64 = rng.random();
        ((r * r) * v as f64) as u32 % v
    };
    let succ: Vec<Vec<u32>> = (0..v)
        .map(|_| {
            let mut s: Vec<u32> = Vec::new();
            while s.len() < 4.min(vocab_size) {
                let c = rng.random_range(0..v);
                if !s.contains(&c) {
                    s.push(c);
                }
            }
            s
        })
        .collect();
    let mut turn = vec![0usize; vocab_size];
    let mut tokens: Vec<TokenId> = (0..v).map(TokenId).collect();
    let mut prev = 0u32;
    for _ in 0..(40 * vocab_size).max(20_000) {
        let w = prev as usize;
        let next = match w % 3 {
            0 => {
                let slot = RULER[turn[w] % 16];
                turn[w] += 1;
                match succ[w].get(slot) {
                    Some(&s) => s,
                    None => global(&mut rng),
                }
            }
            1 if rng.random_bool(0.7) => succ[w][0],
            _ => global(&mut rng),
        };
        tokens.push(TokenId(next));
        prev = next;
    }
    tokens
}

/// Word-level n-gram model trained on [`synthetic_corpus`].
pub fn synthetic_model(vocab_size: usize, order: usize, seed: u64) -> NgramModel {
    let forms: Vec<String> = (0..vocab_size).map(|i| format!("w{i}")).collect();
    NgramModel::train_tokens(
        Vocabulary::new(forms).unwrap(),
        &synthetic_corpus(vocab_size, seed),
        Tokenization::Words,
        order,
        1e-3,
    )
    .unwrap()
}

/// A random distribution of length `n` with all entries positive.
pub fn random_dist<R: Rng>(rng: &mut R, n: usize, concentration: f64) -> Vec<f64> {
    let g = Gamma::new(concentration, 1.0).unwrap();
    let mut w: Vec<f64> = (0..n).map(|_| g.sample(rng).max(1e-300)).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    w
}
