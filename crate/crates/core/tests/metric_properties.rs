mod common;

use approx::assert_abs_diff_eq;
use lmstego::metrics::StepDiagnostics;
use lmstego::{accumulate, kl_divergence, pinsker_bound, tvd, NextTokenDistribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::random_dist;

fn floored<R: Rng>(rng: &mut R, n: usize, a: f64) -> Vec<f64> {
    NextTokenDistribution::from_weights(random_dist(rng, n, a))
        .unwrap()
        .probs()
        .to_vec()
}

#[test]
fn pinsker_symmetry_triangle_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for i in 0..10_000 {
        let n = 2 + i % 40;
        let a = [0.1, 0.5, 1.0, 3.0][i % 4];
        let p = floored(&mut rng, n, a);
        let q = floored(&mut rng, n, a);
        let r = floored(&mut rng, n, a);

        let kl = kl_divergence(&p, &q).unwrap();
        let d = tvd(&p, &q).unwrap();
        assert!(kl >= 0.0);
        assert!((0.0..=1.0).contains(&d));
        assert!(d <= pinsker_bound(kl).unwrap() + 1e-9, "tvd {d} kl {kl}");
        assert_eq!(d, tvd(&q, &p).unwrap());
        assert!(d <= tvd(&p, &r).unwrap() + tvd(&r, &q).unwrap() + 1e-12);
    }
}

#[test]
fn identical_distributions() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for n in 2..50 {
        let p = floored(&mut rng, n, 0.7);
        assert_abs_diff_eq!(kl_divergence(&p, &p).unwrap(), 0.0, epsilon = 1e-12);
        assert_eq!(tvd(&p, &p).unwrap(), 0.0);
    }
}

#[test]
fn ten_steps_of_point_seven_bits_is_vacuous() {
    let steps: Vec<StepDiagnostics> = (0..10)
        .map(|i| StepDiagnostics {
            step_index: i,
            kl_bits: 0.7,
            tvd: 0.3,
            bits_embedded: 3,
            encoded: true,
        })
        .collect();
    let b = accumulate(&steps);
    assert_abs_diff_eq!(b.kl_sum_bits, 7.0, epsilon = 1e-12);
    let raw = (std::f64::consts::LN_2 / 2.0 * 7.0).sqrt();
    assert_abs_diff_eq!(raw, 1.557, epsilon = 1e-3);
    assert_eq!(b.reported(), 1.0);
}

#[test]
fn large_sums_are_compensated() {
    // 1e5 terms of a value with no exact binary form
    let n = 100_000;
    let p = vec![1.0 / n as f64; n];
    let mut q = p.clone();
    q[0] += 1e-9;
    q[1] -= 1e-9;
    let d = tvd(&p, &q).unwrap();
    assert_abs_diff_eq!(d, 1e-9, epsilon = 1e-18);
}
