//! Information-theoretic measurements, all in bits.
//!
//! KL divergence and entropy use base-2 logarithms; the Pinsker bound carries
//! the `ln 2` factor explicitly: `tvd <= sqrt(ln2 / 2 * kl_bits)`.
//!
//! Sums over at least [`COMPENSATED_THRESHOLD`] terms use Neumaier
//! compensated summation.

use std::f64::consts::LN_2;

use thiserror::Error;

use crate::partition::BinPartition;

pub const COMPENSATED_THRESHOLD: usize = 10_000;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("distributions differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("q assigns zero mass to index {index} where p has mass {p}")]
    SupportViolation { index: usize, p: f64 },
    #[error("KL divergence must be non-negative, got {0}")]
    NegativeKl(f64),
}

/// Neumaier summation; plain summation below the threshold.
pub(crate) fn sum_terms<I>(len: usize, terms: I) -> f64
where
    I: Iterator<Item = f64>,
{
    if len < COMPENSATED_THRESHOLD {
        return terms.sum();
    }
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for t in terms {
        let s = sum + t;
        if sum.abs() >= t.abs() {
            comp += (sum - s) + t;
        } else {
            comp += (t - s) + sum;
        }
        sum = s;
    }
    sum + comp
}

fn same_len(p: &[f64], q: &[f64]) -> Result<(), MetricsError> {
    if p.len() != q.len() {
        return Err(MetricsError::LengthMismatch(p.len(), q.len()));
    }
    Ok(())
}

/// `D_KL(p || q)` in bits. Terms with `p(s) = 0` contribute nothing; tiny
/// negative results from rounding are clamped to zero.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64, MetricsError> {
    same_len(p, q)?;
    if let Some((index, &pv)) = p
        .iter()
        .enumerate()
        .find(|(i, &pv)| pv > 0.0 && q[*i] <= 0.0)
    {
        return Err(MetricsError::SupportViolation { index, p: pv });
    }
    let kl = sum_terms(
        p.len(),
        p.iter().zip(q).map(
            |(&pv, &qv)| {
                if pv > 0.0 {
                    pv * (pv / qv).log2()
                } else {
                    0.0
                }
            },
        ),
    );
    Ok(kl.max(0.0))
}

/// Total variation distance, `½ Σ |p - q|`.
pub fn tvd(p: &[f64], q: &[f64]) -> Result<f64, MetricsError> {
    same_len(p, q)?;
    let l1 = sum_terms(p.len(), p.iter().zip(q).map(|(&a, &b)| (a - b).abs()));
    Ok((0.5 * l1).min(1.0))
}

/// Shannon entropy in bits.
pub fn entropy(p: &[f64]) -> f64 {
    let h = sum_terms(
        p.len(),
        p.iter().map(|&x| if x > 0.0 { -x * x.log2() } else { 0.0 }),
    );
    h.max(0.0)
}

/// Entropy of the bin-mass pushforward of `p`.
pub fn partition_entropy(p: &[f64], partition: &BinPartition) -> f64 {
    entropy(&partition.bin_masses(p))
}

/// Pinsker's inequality: an upper bound on TVD from KL in bits.
pub fn pinsker_bound(kl_bits: f64) -> Result<f64, MetricsError> {
    if kl_bits < 0.0 || kl_bits.is_nan() {
        return Err(MetricsError::NegativeKl(kl_bits));
    }
    Ok((LN_2 / 2.0 * kl_bits).sqrt())
}

/// Per-step divergence between the base next-token distribution and the
/// effective one induced by a codec.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub step_index: usize,
    pub kl_bits: f64,
    pub tvd: f64,
    pub bits_embedded: usize,
    /// Whether the step carried payload (always true for Bins and VLC).
    pub encoded: bool,
}

impl StepDiagnostics {
    /// Per-step Pinsker check with a `1e-9` slack.
    pub fn satisfies_pinsker(&self) -> bool {
        self.tvd <= (LN_2 / 2.0 * self.kl_bits).sqrt() + 1e-9
    }
}

/// Running totals bounding the TVD between base and effective LMs over a
/// whole text, via KL additivity + Pinsker and via TVD sub-additivity.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CumulativeBound {
    pub kl_sum_bits: f64,
    pub pinsker_bound: f64,
    pub tvd_sum: f64,
    pub steps: usize,
}

impl CumulativeBound {
    pub fn push(&mut self, diag: &StepDiagnostics) {
        self.kl_sum_bits += diag.kl_bits;
        self.tvd_sum += diag.tvd;
        self.steps += 1;
        self.pinsker_bound = (LN_2 / 2.0 * self.kl_sum_bits).sqrt();
    }

    /// `min(1, pinsker_bound, tvd_sum)`.
    pub fn reported(&self) -> f64 {
        self.pinsker_bound.min(self.tvd_sum).min(1.0)
    }
}

pub fn accumulate<'a, I>(diagnostics: I) -> CumulativeBound
where
    I: IntoIterator<Item = &'a StepDiagnostics>,
{
    let mut bound = CumulativeBound::default();
    for d in diagnostics {
        bound.push(d);
    }
    bound
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn step(kl_bits: f64, tvd: f64) -> StepDiagnostics {
        StepDiagnostics {
            step_index: 0,
            kl_bits,
            tvd,
            bits_embedded: 0,
            encoded: true,
        }
    }

    #[test]
    fn kl_examples() {
        assert_eq!(kl_divergence(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        let oracle = 0.9 * 1.8f64.log2() + 0.1 * 0.2f64.log2();
        let kl = kl_divergence(&[0.9, 0.1], &[0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(kl, oracle, epsilon = 1e-12);
        assert_abs_diff_eq!(kl, 0.531, epsilon = 5e-4);
        assert_eq!(kl_divergence(&[1.0, 0.0], &[0.5, 0.5]).unwrap(), 1.0);
    }

    #[test]
    fn kl_errors() {
        assert_eq!(
            kl_divergence(&[0.5, 0.5], &[1.0, 0.0]),
            Err(MetricsError::SupportViolation { index: 1, p: 0.5 })
        );
        assert!(matches!(
            kl_divergence(&[1.0], &[0.5, 0.5]),
            Err(MetricsError::LengthMismatch(1, 2))
        ));
    }

    #[test]
    fn tvd_examples() {
        assert_eq!(tvd(&[0.2, 0.8], &[0.2, 0.8]).unwrap(), 0.0);
        assert_eq!(tvd(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert_abs_diff_eq!(tvd(&[0.9, 0.1], &[0.5, 0.5]).unwrap(), 0.4, epsilon = 1e-12);
    }

    #[test]
    fn entropy_examples() {
        assert_abs_diff_eq!(entropy(&[0.125; 8]), 3.0, epsilon = 1e-12);
        assert_eq!(entropy(&[1.0, 0.0, 0.0]), 0.0);
        assert_abs_diff_eq!(entropy(&[0.5, 0.25, 0.25]), 1.5, epsilon = 1e-12);
    }

    #[test]
    fn partition_entropy_examples() {
        let bins = BinPartition::from_assignment(1, vec![0, 0, 1, 1]).unwrap();
        assert_abs_diff_eq!(partition_entropy(&[0.25; 4], &bins), 1.0, epsilon = 1e-12);
        assert_eq!(partition_entropy(&[0.5, 0.5, 0.0, 0.0], &bins), 0.0);
        let oracle = -(0.8f64 * 0.8f64.log2() + 0.2 * 0.2f64.log2());
        let h = partition_entropy(&[0.7, 0.1, 0.1, 0.1], &bins);
        assert_abs_diff_eq!(h, oracle, epsilon = 1e-12);
        assert_abs_diff_eq!(h, 0.7219, epsilon = 5e-5);
    }

    #[test]
    fn pinsker_examples() {
        assert_eq!(pinsker_bound(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(pinsker_bound(1.0).unwrap(), 0.5887, epsilon = 5e-5);
        assert_abs_diff_eq!(pinsker_bound(2.885).unwrap(), 1.0, epsilon = 1e-3);
        assert!(pinsker_bound(-0.1).is_err());
    }

    #[test]
    fn accumulate_examples() {
        let empty = accumulate(&[]);
        assert_eq!(empty.reported(), 0.0);
        assert_eq!(empty.steps, 0);

        let ten = vec![step(0.7, 0.5); 10];
        let b = accumulate(&ten);
        assert_abs_diff_eq!(b.pinsker_bound, (LN_2 / 2.0 * 7.0).sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(b.pinsker_bound, 1.557, epsilon = 1e-3);
        assert_eq!(b.reported(), 1.0);

        let small = vec![step(0.5, 0.01); 10];
        let b = accumulate(&small);
        assert_abs_diff_eq!(b.tvd_sum, 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(b.reported(), 0.1, epsilon = 1e-12);
    }

    #[test]
    fn bounds_are_monotone() {
        let mut b = CumulativeBound::default();
        let mut last = (0.0, 0.0);
        for i in 0..50 {
            b.push(&step((i % 7) as f64 * 0.1, (i % 3) as f64 * 0.01));
            assert!(b.pinsker_bound >= last.0 && b.tvd_sum >= last.1);
            last = (b.pinsker_bound, b.tvd_sum);
        }
    }

    #[test]
    fn compensated_sum_matches_exact_on_large_input() {
        // 20000 copies of 0.1 plus 1.0: plain summation drifts, compensated does not.
        let n = 20_000;
        let terms = std::iter::once(1.0).chain(std::iter::repeat_n(0.1, n));
        let s = sum_terms(n + 1, terms);
        assert_abs_diff_eq!(s, 2001.0, epsilon = 1e-10);
    }
}
