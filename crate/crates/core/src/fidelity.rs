//! Sample-stream quality estimators and the combined report.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::distribution_shaping::{ShapingPipeline, ShapingPipelineSpec, TailTruncation};
use crate::entropy_sources::{apply_nonidealities, NonidealitySpec, NonidealityState};
use crate::error::{domain, Result};
use crate::rng::CounterRng;
use crate::special::normal_cdf;

/// A stream of real-valued samples under test.
pub trait SampleStream {
    fn next_sample(&mut self) -> f64;

    /// Tail mass clamped by the generator, if it truncates.
    fn tail_truncation(&self) -> Option<TailTruncation> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    /// Unbiased (n - 1) variance.
    pub variance: f64,
    /// `None` for zero-variance input.
    pub skewness: Option<f64>,
    /// `None` for zero-variance input or n < 4.
    pub excess_kurtosis: Option<f64>,
}

pub fn moments(samples: &[f64]) -> Result<Moments> {
    let n = samples.len();
    if n < 2 {
        return domain(format!("moments need n >= 2, got {n}"));
    }
    let nf = n as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in samples {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let variance = m2 / (nf - 1.0);
    let (m2, m3, m4) = (m2 / nf, m3 / nf, m4 / nf);
    let degenerate = m2 == 0.0;
    Ok(Moments {
        mean,
        variance,
        skewness: (!degenerate).then(|| m3 / m2.powf(1.5)),
        excess_kurtosis: (!degenerate && n >= 4).then(|| m4 / (m2 * m2) - 3.0),
    })
}

/// Asymptotic one-sample KS critical value `sqrt(-ln(a/2) / (2n))`.
pub fn ks_critical_value(n: usize, significance: f64) -> Result<f64> {
    if !(significance > 0.0 && significance < 1.0) {
        return domain(format!("significance must lie in (0, 1), got {significance}"));
    }
    if n == 0 {
        return domain("ks critical value needs n >= 1");
    }
    Ok((-(significance / 2.0).ln() / (2.0 * n as f64)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub critical: f64,
    pub pass: bool,
}

/// One-sample Kolmogorov–Smirnov test against `cdf`.
pub fn ks_test<F: Fn(f64) -> f64>(samples: &[f64], cdf: F, significance: f64) -> Result<KsResult> {
    let n = samples.len();
    if n < 10 {
        return domain(format!("ks_test needs n >= 10, got {n}"));
    }
    let critical = ks_critical_value(n, significance)?;
    if samples.iter().any(|x| x.is_nan()) {
        return domain("ks_test input contains NaN");
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let nf = n as f64;
    let statistic = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            ((i + 1) as f64 / nf - f).abs().max((f - i as f64 / nf).abs())
        })
        .fold(0.0f64, f64::max);
    Ok(KsResult {
        statistic,
        critical,
        pass: statistic < critical,
    })
}

/// Sample autocorrelation for lags `1..=max_lag`; `None` for constant input.
pub fn autocorrelation(samples: &[f64], max_lag: usize) -> Result<Option<Vec<f64>>> {
    let n = samples.len();
    if max_lag == 0 || n <= 4 * max_lag {
        return domain(format!(
            "autocorrelation needs max_lag >= 1 and n > 4 * max_lag (n={n}, max_lag={max_lag})"
        ));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = samples.iter().map(|x| x - mean).collect();
    let denom: f64 = centered.iter().map(|d| d * d).sum();
    if denom == 0.0 {
        return Ok(None);
    }
    Ok(Some(
        (1..=max_lag)
            .map(|lag| {
                centered
                    .iter()
                    .zip(&centered[lag..])
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    / denom
            })
            .collect(),
    ))
}

/// Most-common-value min-entropy estimate, bits per symbol.
///
/// Uses the upper 99% confidence bound on the most frequent symbol's
/// probability.
pub fn min_entropy<T: Eq + std::hash::Hash>(symbols: &[T]) -> Result<f64> {
    let n = symbols.len();
    if n < 1000 {
        return domain(format!("min_entropy needs n >= 1000, got {n}"));
    }
    let mut counts: HashMap<&T, usize> = HashMap::new();
    for s in symbols {
        *counts.entry(s).or_default() += 1;
    }
    let max = counts.values().copied().max().unwrap_or(0);
    Ok(min_entropy_from_max_count(max, n))
}

pub(crate) fn min_entropy_from_max_count(max_count: usize, n: usize) -> f64 {
    let nf = n as f64;
    let p = max_count as f64 / nf;
    let upper = (p + 2.576 * (p * (1.0 - p) / nf).sqrt()).min(1.0);
    // -log2(1) is -0.0
    (-upper.log2()).max(0.0)
}

/// Reference distribution for a fidelity run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    Normal { mu: f64, sigma: f64 },
    Uniform { lo: f64, hi: f64 },
    Bernoulli { p: f64 },
}

impl TargetSpec {
    pub fn standard_normal() -> Self {
        TargetSpec::Normal { mu: 0.0, sigma: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            TargetSpec::Normal { sigma, .. } if !(sigma > 0.0) => {
                domain("normal target needs sigma > 0")
            }
            TargetSpec::Uniform { lo, hi } if !(lo < hi) => domain("uniform target needs lo < hi"),
            TargetSpec::Bernoulli { p } if !(0.0..=1.0).contains(&p) => {
                domain("bernoulli target needs p in [0, 1]")
            }
            _ => Ok(()),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            TargetSpec::Normal { mu, sigma } => normal_cdf((x - mu) / sigma),
            TargetSpec::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            TargetSpec::Bernoulli { p } => {
                if x < 0.0 {
                    0.0
                } else if x < 1.0 {
                    1.0 - p
                } else {
                    1.0
                }
            }
        }
    }

    /// Symbolizes a sample for min-entropy estimation: bits for Bernoulli
    /// targets, otherwise the probability-integral transform quantized to
    /// `symbol_bits` bits.
    fn symbol(&self, x: f64, symbol_bits: u32) -> u32 {
        match self {
            TargetSpec::Bernoulli { .. } => u32::from(x >= 0.5),
            _ => {
                let levels = 1u64 << symbol_bits;
                let q = (self.cdf(x) * levels as f64) as u64;
                q.min(levels - 1) as u32
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FidelityConfig {
    pub significance: f64,
    pub max_lag: usize,
    pub symbol_bits: u32,
    pub min_samples: usize,
    pub max_samples: usize,
}

impl Default for FidelityConfig {
    fn default() -> Self {
        FidelityConfig {
            significance: 0.01,
            max_lag: 8,
            symbol_bits: 8,
            min_samples: 1_000,
            max_samples: 100_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub n: usize,
    pub target: TargetSpec,
    pub mean: f64,
    pub variance: f64,
    pub skewness: Option<f64>,
    pub excess_kurtosis: Option<f64>,
    pub ks_statistic: f64,
    pub ks_critical: f64,
    pub ks_pass: bool,
    pub significance: f64,
    /// Lags `1..=max_lag`; `None` for a constant stream.
    pub autocorr: Option<Vec<f64>>,
    pub min_entropy_per_sample: f64,
    pub symbol_bits: u32,
    pub tail_truncation: Option<TailTruncation>,
}

/// Draws `n` samples from `stream` and runs every estimator on them.
pub fn fidelity_report(
    stream: &mut dyn SampleStream,
    n: usize,
    target: TargetSpec,
    config: &FidelityConfig,
) -> Result<FidelityReport> {
    if n < config.min_samples || n > config.max_samples {
        return domain(format!(
            "n must lie in [{}, {}], got {n}",
            config.min_samples, config.max_samples
        ));
    }
    if !(1..=16).contains(&config.symbol_bits) {
        return domain("symbol_bits must lie in [1, 16]");
    }
    target.validate()?;
    let samples: Vec<f64> = (0..n).map(|_| stream.next_sample()).collect();
    report_from_samples(&samples, target, config, stream.tail_truncation())
}

pub fn report_from_samples(
    samples: &[f64],
    target: TargetSpec,
    config: &FidelityConfig,
    tail_truncation: Option<TailTruncation>,
) -> Result<FidelityReport> {
    let m = moments(samples)?;
    let ks = ks_test(samples, |x| target.cdf(x), config.significance)?;
    let autocorr = autocorrelation(samples, config.max_lag)?;
    let symbols: Vec<u32> = samples
        .iter()
        .map(|&x| target.symbol(x, config.symbol_bits))
        .collect();
    let h = min_entropy(&symbols)?;
    Ok(FidelityReport {
        n: samples.len(),
        target,
        mean: m.mean,
        variance: m.variance,
        skewness: m.skewness,
        excess_kurtosis: m.excess_kurtosis,
        ks_statistic: ks.statistic,
        ks_critical: ks.critical,
        ks_pass: ks.pass,
        significance: config.significance,
        autocorr,
        min_entropy_per_sample: h,
        symbol_bits: match target {
            TargetSpec::Bernoulli { .. } => 1,
            _ => config.symbol_bits,
        },
        tail_truncation,
    })
}

/// Ideal uniforms shaped by a pipeline, then passed through non-idealities.
#[derive(Debug, Clone)]
pub struct PipelineStream {
    rng: CounterRng,
    pipeline: ShapingPipeline,
    nonideality: NonidealitySpec,
    state: NonidealityState,
}

impl PipelineStream {
    pub fn new(
        shaping: &ShapingPipelineSpec,
        nonideality: NonidealitySpec,
        seed: u64,
        stream_id: u64,
    ) -> Result<Self> {
        nonideality.validate()?;
        Ok(PipelineStream {
            rng: CounterRng::new(seed, stream_id),
            pipeline: shaping.build()?,
            nonideality,
            state: NonidealityState::default(),
        })
    }
}

impl SampleStream for PipelineStream {
    fn next_sample(&mut self) -> f64 {
        let x = self.pipeline.sample(&mut self.rng);
        apply_nonidealities(x, &mut self.state, &self.nonideality)
    }

    fn tail_truncation(&self) -> Option<TailTruncation> {
        self.pipeline.tail_truncation()
    }
}
