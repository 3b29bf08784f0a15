//! Per-step divergence measurements over sampled rollouts.
//!
//! For each prefix the model is rolled forward `steps_per_prefix` times with a
//! seeded sampler. At every step the next-token distribution is scored against
//! the effective distribution of Bins (for each configured `k`, with one fixed
//! partition per `k`) and of VLC, giving one row per (step, algorithm).
//!
//! Output files:
//!
//! * rows: `prefix,step,algo,param,kl_bits,tvd`
//! * summary: `algo,param,metric,count,mean,median,min,max`
//! * histogram: `algo,param,metric,bin,lower,upper,count`
//!
//! `param` is `k=<k>` for Bins and `huffman` for VLC.

use std::fmt::Write as _;

use rayon::prelude::*;
use thiserror::Error;

use crate::codec::{bins_effective, bins_step_kl, HuffmanDivergence};
use crate::huffman::build_huffman;
use crate::lm::{sample_token, LanguageModel, LmError, Prefix, TokenId};
use crate::metrics::tvd;
use crate::partition::{make_partition, BinPartition};
use crate::sampling::codec_rng;

pub const DEFAULT_HISTOGRAM_BINS: usize = 30;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Lm(#[from] LmError),
    #[error(transparent)]
    Codec(#[from] crate::codec::CodecError),
    #[error(transparent)]
    Partition(#[from] crate::partition::PartitionError),
    #[error(transparent)]
    Huffman(#[from] crate::huffman::HuffmanError),
    #[error(transparent)]
    Metrics(#[from] crate::metrics::MetricsError),
    #[error("invalid experiment: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum PrefixSource {
    /// Roll out from the empty context.
    Sampled,
    /// Roll out from each given prefix in turn.
    Given(Vec<Prefix>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub num_prefixes: usize,
    pub steps_per_prefix: usize,
    pub bins_k: Vec<u32>,
    pub include_vlc: bool,
    pub partition_seed: u64,
    pub rng_seed: u64,
    pub prefixes: PrefixSource,
}

impl Default for ExperimentSpec {
    /// 50 rollouts of 40 steps, Bins with 8 bins, and VLC.
    fn default() -> Self {
        Self {
            num_prefixes: 50,
            steps_per_prefix: 40,
            bins_k: vec![3],
            include_vlc: true,
            partition_seed: 0,
            rng_seed: 0,
            prefixes: PrefixSource::Sampled,
        }
    }
}

impl ExperimentSpec {
    pub fn total_steps(&self) -> usize {
        self.num_prefixes * self.steps_per_prefix
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRow {
    pub prefix: usize,
    pub step: usize,
    pub algo: &'static str,
    pub param: String,
    pub kl_bits: f64,
    pub tvd: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DiagnosticsTable {
    pub rows: Vec<ExperimentRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Kl,
    Tvd,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Kl => "kl_bits",
            Metric::Tvd => "tvd",
        }
    }

    fn of(self, row: &ExperimentRow) -> f64 {
        match self {
            Metric::Kl => row.kl_bits,
            Metric::Tvd => row.tvd,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub algo: &'static str,
    pub param: String,
    pub metric: Metric,
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// `bins + 1` edges spanning `[0, upper]`.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl DiagnosticsTable {
    /// Distinct `(algo, param)` series in first-appearance order.
    pub fn series(&self) -> Vec<(&'static str, String)> {
        let mut out: Vec<(&'static str, String)> = Vec::new();
        for r in &self.rows {
            if !out.iter().any(|(a, p)| *a == r.algo && *p == r.param) {
                out.push((r.algo, r.param.clone()));
            }
        }
        out
    }

    pub fn column(&self, algo: &str, param: &str, metric: Metric) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.algo == algo && r.param == param)
            .map(|r| metric.of(r))
            .collect()
    }

    pub fn summaries(&self) -> Vec<Summary> {
        let mut out = Vec::new();
        for (algo, param) in self.series() {
            for metric in [Metric::Kl, Metric::Tvd] {
                let col = self.column(algo, &param, metric);
                if let Some(s) = summarize(&col) {
                    out.push(Summary {
                        algo,
                        param: param.clone(),
                        metric,
                        count: col.len(),
                        mean: s.0,
                        median: s.1,
                        min: s.2,
                        max: s.3,
                    });
                }
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("prefix,step,algo,param,kl_bits,tvd\n");
        for r in &self.rows {
            writeln!(
                s,
                "{},{},{},{},{},{}",
                r.prefix, r.step, r.algo, r.param, r.kl_bits, r.tvd
            )
            .unwrap();
        }
        s
    }

    pub fn summary_csv(&self) -> String {
        let mut s = String::from("algo,param,metric,count,mean,median,min,max\n");
        for m in self.summaries() {
            writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                m.algo,
                m.param,
                m.metric.name(),
                m.count,
                m.mean,
                m.median,
                m.min,
                m.max
            )
            .unwrap();
        }
        s
    }

    /// Histograms of every series and metric over each metric's theoretical
    /// range: `[0, k]` for Bins KL, `[0, 1]` for VLC KL and for TVD.
    pub fn histogram_csv(&self, bins: usize) -> String {
        let mut s = String::from("algo,param,metric,bin,lower,upper,count\n");
        for (algo, param) in self.series() {
            for metric in [Metric::Kl, Metric::Tvd] {
                let col = self.column(algo, &param, metric);
                if col.is_empty() {
                    continue;
                }
                let upper = theoretical_max(algo, &param, metric);
                let h = emit_histogram(&col, bins, upper);
                for (i, c) in h.counts.iter().enumerate() {
                    writeln!(
                        s,
                        "{algo},{param},{},{i},{},{},{c}",
                        metric.name(),
                        h.edges[i],
                        h.edges[i + 1]
                    )
                    .unwrap();
                }
            }
        }
        s
    }
}

fn theoretical_max(algo: &str, param: &str, metric: Metric) -> Option<f64> {
    match (metric, algo) {
        (Metric::Tvd, _) => Some(1.0),
        (Metric::Kl, "vlc") => Some(1.0),
        (Metric::Kl, "bins") => param.strip_prefix("k=").and_then(|k| k.parse().ok()),
        _ => None,
    }
}

/// `(mean, median, min, max)`, or `None` for an empty column.
fn summarize(col: &[f64]) -> Option<(f64, f64, f64, f64)> {
    if col.is_empty() {
        return None;
    }
    let mut sorted = col.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    let mean = sorted.iter().sum::<f64>() / n as f64;
    Some((mean, median, sorted[0], sorted[n - 1]))
}

/// Fixed-width histogram over `[0, upper]`; `upper` defaults to the column
/// maximum. Values at or beyond `upper` land in the last bin. A degenerate
/// range (all zeros) puts everything in the first bin.
pub fn emit_histogram(values: &[f64], bins: usize, upper: Option<f64>) -> Histogram {
    let bins = bins.max(1);
    let upper = upper.unwrap_or_else(|| values.iter().copied().fold(0.0, f64::max));
    let width = upper / bins as f64;
    let edges = (0..=bins).map(|i| i as f64 * width).collect();
    let mut counts = vec![0usize; bins];
    for &v in values {
        let idx = if width > 0.0 {
            ((v / width).floor().max(0.0) as usize).min(bins - 1)
        } else {
            0
        };
        counts[idx] += 1;
    }
    Histogram { edges, counts }
}

/// Runs the experiment. Rollouts are independent and run in parallel; each
/// uses its own stream of the seeded generator, so the table is identical for
/// a fixed spec regardless of scheduling.
pub fn run_experiment<M: LanguageModel + ?Sized>(
    model: &M,
    spec: &ExperimentSpec,
) -> Result<DiagnosticsTable, AnalysisError> {
    let v = model.vocab_size();
    if v < 2 {
        return Err(AnalysisError::InvalidSpec(format!(
            "vocabulary of size {v} is too small"
        )));
    }
    let partitions = spec
        .bins_k
        .iter()
        .map(|&k| make_partition(spec.partition_seed, v, k))
        .collect::<Result<Vec<_>, _>>()?;
    let starts: Vec<Vec<TokenId>> = match &spec.prefixes {
        PrefixSource::Sampled => vec![Vec::new(); spec.num_prefixes],
        PrefixSource::Given(list) => {
            if list.is_empty() {
                return Err(AnalysisError::InvalidSpec("no prefixes given".into()));
            }
            (0..spec.num_prefixes)
                .map(|i| list[i % list.len()].tokens().to_vec())
                .collect()
        }
    };

    let per_prefix = starts
        .into_par_iter()
        .enumerate()
        .map(|(i, start)| rollout(model, spec, &partitions, i, start))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DiagnosticsTable {
        rows: per_prefix.into_iter().flatten().collect(),
    })
}

fn rollout<M: LanguageModel + ?Sized>(
    model: &M,
    spec: &ExperimentSpec,
    partitions: &[BinPartition],
    prefix_index: usize,
    mut context: Vec<TokenId>,
) -> Result<Vec<ExperimentRow>, AnalysisError> {
    model.check_context(&context)?;
    let mut rng = codec_rng(spec.rng_seed);
    rng.set_stream(prefix_index as u64);
    let mut rows = Vec::new();
    for step in 0..spec.steps_per_prefix {
        let p = model.next_distribution(&context)?;
        for part in partitions {
            rows.push(ExperimentRow {
                prefix: prefix_index,
                step,
                algo: "bins",
                param: format!("k={}", part.k()),
                kl_bits: bins_step_kl(p.probs(), part),
                tvd: tvd(p.probs(), &bins_effective(p.probs(), part))?,
            });
        }
        if spec.include_vlc {
            let div = HuffmanDivergence::measure(p.probs(), &build_huffman(&p)?)?;
            rows.push(ExperimentRow {
                prefix: prefix_index,
                step,
                algo: "vlc",
                param: "huffman".into(),
                kl_bits: div.kl_bits,
                tvd: div.tvd,
            });
        }
        context.push(sample_token(&p, &mut rng));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm::{NextTokenDistribution, StaticModel};

    fn small_spec() -> ExperimentSpec {
        ExperimentSpec {
            num_prefixes: 4,
            steps_per_prefix: 5,
            bins_k: vec![1, 3],
            ..ExperimentSpec::default()
        }
    }

    #[test]
    fn default_matches_reference_methodology() {
        let s = ExperimentSpec::default();
        assert_eq!(s.total_steps(), 2000);
        assert_eq!(s.bins_k, vec![3]);
    }

    #[test]
    fn uniform_source_with_equal_bins_has_zero_bins_kl() {
        let m = StaticModel::uniform(8).unwrap();
        let t = run_experiment(&m, &small_spec()).unwrap();
        assert_eq!(t.rows.len(), 4 * 5 * 3);
        for k in ["k=1", "k=3"] {
            for v in t.column("bins", k, Metric::Kl) {
                assert!(v.abs() < 1e-12);
            }
        }
        // uniform over a power of two is dyadic
        for v in t.column("vlc", "huffman", Metric::Kl) {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn near_point_mass_pushes_kl_to_maxima() {
        let mut w = vec![1e-7; 16];
        w[5] = 1.0;
        let m = StaticModel::new(NextTokenDistribution::from_weights(w).unwrap());
        let t = run_experiment(&m, &small_spec()).unwrap();
        for v in t.column("bins", "k=3", Metric::Kl) {
            assert!(v > 3.0 - 1e-4 && v <= 3.0);
        }
        for v in t.column("vlc", "huffman", Metric::Kl) {
            assert!(v > 0.99 && v <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn deterministic_and_ordered() {
        let m = StaticModel::new(
            NextTokenDistribution::from_weights((1..=20).map(f64::from).collect()).unwrap(),
        );
        let spec = small_spec();
        let a = run_experiment(&m, &spec).unwrap();
        let b = run_experiment(&m, &spec).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        let keys: Vec<(usize, usize)> = a.rows.iter().map(|r| (r.prefix, r.step)).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }

    #[test]
    fn histogram_examples() {
        let h = emit_histogram(&[0.0; 10], 30, None);
        assert_eq!(h.counts[0], 10);
        assert_eq!(h.counts.iter().sum::<usize>(), 10);

        let h = emit_histogram(&[0.1, 0.9], 2, Some(1.0));
        assert_eq!(h.counts, vec![1, 1]);
        assert_eq!(h.edges, vec![0.0, 0.5, 1.0]);

        let h = emit_histogram(&[1.0, 2.5], 4, Some(1.0));
        assert_eq!(h.counts, vec![0, 0, 0, 2]);
    }

    #[test]
    fn summary_values() {
        let s = summarize(&[3.0, 1.0, 2.0, 10.0]).unwrap();
        assert_eq!(s, (4.0, 2.5, 1.0, 10.0));
        assert!(summarize(&[]).is_none());
    }

    #[test]
    fn csv_headers() {
        let m = StaticModel::uniform(4).unwrap();
        let t = run_experiment(
            &m,
            &ExperimentSpec {
                num_prefixes: 1,
                steps_per_prefix: 1,
                bins_k: vec![1],
                ..ExperimentSpec::default()
            },
        )
        .unwrap();
        assert!(t
            .to_csv()
            .starts_with("prefix,step,algo,param,kl_bits,tvd\n0,0,bins,k=1,"));
        assert!(t.summary_csv().contains("\nbins,k=1,kl_bits,1,"));
        let hist = t.histogram_csv(3);
        assert_eq!(hist.lines().count(), 1 + 2 * 2 * 3);
    }

    #[test]
    fn given_prefixes_cycle() {
        let m = StaticModel::uniform(4).unwrap();
        let spec = ExperimentSpec {
            num_prefixes: 3,
            steps_per_prefix: 2,
            bins_k: vec![1],
            prefixes: PrefixSource::Given(vec![Prefix::new(vec![TokenId(1)], 4).unwrap()]),
            ..ExperimentSpec::default()
        };
        assert_eq!(run_experiment(&m, &spec).unwrap().rows.len(), 3 * 2 * 2);
        let bad = ExperimentSpec {
            prefixes: PrefixSource::Given(vec![]),
            ..spec
        };
        assert!(run_experiment(&m, &bad).is_err());
    }
}
