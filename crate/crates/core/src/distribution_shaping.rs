//! Maps raw uniforms onto target distributions.
//!
//! Three shaping classes are covered: arithmetic (Box–Muller), lookup
//! (piecewise-linear inverse-CDF tables) and accumulation (central-limit
//! sums), plus Bernoulli thresholding and the reparameterization map.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::rng::UniformSource;
use crate::special::normal_quantile;

/// Standard-normal pair from two uniforms.
///
/// `u1` must lie in `(0, 1]`; map raw `[0, 1)` uniforms through `1 - u`
/// first.
pub fn box_muller(u1: f64, u2: f64) -> Result<(f64, f64)> {
    if !(u1 > 0.0 && u1 <= 1.0) {
        return domain(format!("box_muller requires u1 in (0, 1], got {u1}"));
    }
    let r = (-2.0 * u1.ln()).sqrt();
    let theta = 2.0 * PI * u2;
    Ok((r * theta.cos(), r * theta.sin()))
}

/// `(sum(u) - k/2) / sqrt(k/12)` over `k` uniforms.
pub fn clt_accumulate<S: UniformSource + ?Sized>(src: &mut S, k: u32) -> f64 {
    let sum: f64 = (0..k).map(|_| src.next_uniform()).sum();
    clt_normalize(sum, k)
}

fn clt_normalize(sum: f64, k: u32) -> f64 {
    let k = f64::from(k);
    (sum - k / 2.0) / (k / 12.0).sqrt()
}

/// Same normalization applied to an explicit slice of uniforms.
pub fn clt_from_uniforms(us: &[f64]) -> f64 {
    clt_normalize(us.iter().sum(), us.len() as u32)
}

pub fn bernoulli_from_uniform(u: f64, p: f64) -> Result<u8> {
    if !(0.0..=1.0).contains(&p) {
        return domain(format!("p must lie in [0, 1], got {p}"));
    }
    Ok(u8::from(u < p))
}

/// `mu + sigma * eps`.
pub fn reparameterize(mu: f64, sigma: f64, eps: f64) -> Result<f64> {
    if !(sigma >= 0.0) {
        return domain(format!("sigma must be >= 0, got {sigma}"));
    }
    Ok(mu + sigma * eps)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetFamily {
    StandardNormal,
    Uniform { lo: f64, hi: f64 },
}

impl TargetFamily {
    fn quantile(&self, p: f64) -> f64 {
        match *self {
            TargetFamily::StandardNormal => normal_quantile(p),
            TargetFamily::Uniform { lo, hi } => lo + (hi - lo) * p,
        }
    }
}

/// Probability mass clamped onto the end knots of an inverse-CDF table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailTruncation {
    pub lower_prob: f64,
    pub upper_prob: f64,
    pub lower_value: f64,
    pub upper_value: f64,
}

/// Piecewise-linear inverse CDF through `(p_i, q_i)` knots.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseCdfTable {
    probs: Vec<f64>,
    knots: Vec<f64>,
    truncation: Option<TailTruncation>,
}

impl InverseCdfTable {
    /// Builds an `n_entries` table for `family` at probabilities
    /// `i / (n - 1)`. Families with infinite tails place their end knots at
    /// `0.5 / (n - 1)` and `1 - 0.5 / (n - 1)` instead, and report that
    /// truncation.
    pub fn new(family: TargetFamily, n_entries: usize) -> Result<Self> {
        if n_entries < 2 {
            return domain(format!("n_entries must be >= 2, got {n_entries}"));
        }
        if let TargetFamily::Uniform { lo, hi } = family {
            if !(lo < hi) {
                return domain(format!("uniform target needs lo < hi, got [{lo}, {hi}]"));
            }
        }
        let last = (n_entries - 1) as f64;
        let mut probs: Vec<f64> = (0..n_entries).map(|i| i as f64 / last).collect();
        let mut truncation = None;
        if !family.quantile(0.0).is_finite() || !family.quantile(1.0).is_finite() {
            let edge = 0.5 / last;
            probs[0] = edge;
            probs[n_entries - 1] = 1.0 - edge;
            truncation = Some((edge, 1.0 - edge));
        }
        let knots: Vec<f64> = probs.iter().map(|&p| family.quantile(p)).collect();
        let mut table = Self::from_knots(probs, knots)?;
        table.truncation = truncation.map(|(lo_p, hi_p)| TailTruncation {
            lower_prob: lo_p,
            upper_prob: 1.0 - hi_p,
            lower_value: table.knots[0],
            upper_value: table.knots[n_entries - 1],
        });
        Ok(table)
    }

    /// Builds a table from explicit knots; both sequences must be strictly
    /// increasing and `probs` must lie in `[0, 1]`.
    pub fn from_knots(probs: Vec<f64>, knots: Vec<f64>) -> Result<Self> {
        if probs.len() != knots.len() || probs.len() < 2 {
            return domain("table needs at least two (prob, knot) pairs of equal length");
        }
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return domain("table probabilities must lie in [0, 1]");
        }
        let increasing = |v: &[f64]| v.windows(2).all(|w| w[1] > w[0]);
        if !increasing(&probs) || !increasing(&knots) || knots.iter().any(|k| !k.is_finite()) {
            return Err(Error::Domain(
                "inverse-CDF table must be finite and strictly increasing".into(),
            ));
        }
        Ok(InverseCdfTable {
            probs,
            knots,
            truncation: None,
        })
    }

    pub fn len(&self) -> usize {
        self.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.knots.is_empty()
    }

    pub fn truncation(&self) -> Option<TailTruncation> {
        self.truncation
    }

    /// Interpolated quantile; `u` outside the knot range clamps to the ends.
    pub fn sample(&self, u: f64) -> f64 {
        let n = self.probs.len();
        if u <= self.probs[0] {
            return self.knots[0];
        }
        if u >= self.probs[n - 1] {
            return self.knots[n - 1];
        }
        // knots sit on a uniform grid except possibly the two end knots
        let step = 1.0 / (n - 1) as f64;
        let mut i = ((u / step) as usize).min(n - 2);
        while i > 0 && self.probs[i] > u {
            i -= 1;
        }
        while i + 1 < n - 1 && self.probs[i + 1] <= u {
            i += 1;
        }
        let (p0, p1) = (self.probs[i], self.probs[i + 1]);
        let t = (u - p0) / (p1 - p0);
        self.knots[i] + t * (self.knots[i + 1] - self.knots[i])
    }
}

/// Convenience wrapper around [`InverseCdfTable::sample`].
pub fn inverse_cdf_sample(u: f64, table: &InverseCdfTable) -> f64 {
    table.sample(u)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ShapingMethod {
    BoxMuller,
    InverseCdfTable { n_entries: usize, family: TargetFamily },
    CltAccumulate { k: u32 },
    BernoulliThreshold { p: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapingPipelineSpec {
    pub method: ShapingMethod,
    /// Shaping operations per output sample; `None` uses the method default.
    #[serde(default)]
    pub cost: Option<u32>,
}

impl Default for ShapingPipelineSpec {
    fn default() -> Self {
        ShapingPipelineSpec {
            method: ShapingMethod::BoxMuller,
            cost: None,
        }
    }
}

impl ShapingPipelineSpec {
    pub fn new(method: ShapingMethod) -> Self {
        ShapingPipelineSpec { method, cost: None }
    }

    pub fn validate(&self) -> Result<()> {
        match self.method {
            ShapingMethod::InverseCdfTable { n_entries, .. } if n_entries < 2 => {
                domain(format!("n_entries must be >= 2, got {n_entries}"))
            }
            ShapingMethod::CltAccumulate { k } if k < 1 => domain("k must be >= 1"),
            ShapingMethod::BernoulliThreshold { p } if !(0.0..=1.0).contains(&p) => {
                domain(format!("p must lie in [0, 1], got {p}"))
            }
            _ => Ok(()),
        }
    }

    pub fn ops_per_sample(&self) -> u32 {
        self.cost.unwrap_or(match self.method {
            ShapingMethod::BoxMuller => 8,
            ShapingMethod::InverseCdfTable { .. } => 2,
            ShapingMethod::CltAccumulate { k } => k,
            ShapingMethod::BernoulliThreshold { .. } => 1,
        })
    }

    /// Whether the pipeline output is N(0, 1).
    pub fn is_standard_normal(&self) -> bool {
        match self.method {
            ShapingMethod::BoxMuller | ShapingMethod::CltAccumulate { .. } => true,
            ShapingMethod::InverseCdfTable { family, .. } => {
                family == TargetFamily::StandardNormal
            }
            ShapingMethod::BernoulliThreshold { .. } => false,
        }
    }

    pub fn build(&self) -> Result<ShapingPipeline> {
        self.validate()?;
        let table = match self.method {
            ShapingMethod::InverseCdfTable { n_entries, family } => {
                Some(InverseCdfTable::new(family, n_entries)?)
            }
            _ => None,
        };
        Ok(ShapingPipeline {
            spec: *self,
            table,
            spare: None,
        })
    }
}

/// A built pipeline. Box–Muller's second output is cached for the next call.
#[derive(Debug, Clone)]
pub struct ShapingPipeline {
    spec: ShapingPipelineSpec,
    table: Option<InverseCdfTable>,
    spare: Option<f64>,
}

impl ShapingPipeline {
    pub fn spec(&self) -> &ShapingPipelineSpec {
        &self.spec
    }

    pub fn tail_truncation(&self) -> Option<TailTruncation> {
        self.table.as_ref().and_then(InverseCdfTable::truncation)
    }

    pub fn sample<S: UniformSource + ?Sized>(&mut self, src: &mut S) -> f64 {
        match self.spec.method {
            ShapingMethod::BoxMuller => {
                if let Some(z) = self.spare.take() {
                    return z;
                }
                let u1 = src.next_open_uniform();
                let u2 = src.next_uniform();
                let (z1, z2) = box_muller(u1, u2).expect("u1 in (0, 1]");
                self.spare = Some(z2);
                z1
            }
            ShapingMethod::InverseCdfTable { .. } => {
                let u = src.next_uniform();
                self.table.as_ref().expect("table built").sample(u)
            }
            ShapingMethod::CltAccumulate { k } => clt_accumulate(src, k),
            ShapingMethod::BernoulliThreshold { p } => {
                f64::from(u8::from(src.next_uniform() < p))
            }
        }
    }
}
