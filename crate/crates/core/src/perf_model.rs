//! Closed-form unified data-access throughput model.
//!
//! Deterministic accesses and stochastic samples are two streams served at
//! rates `beta_data` and `beta_rand`. With a fraction `alpha` of all accesses
//! being samples, the effective access rate is the weighted harmonic mean
//!
//! ```text
//! 1 / beta = alpha / beta_rand + (1 - alpha) / beta_data
//! ```
//!
//! and attainable throughput is the roofline `min(pi, ai * beta)`.
//! All rates are expressed per element-access, so both streams share a unit.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Compute and access rates of one architecture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArchParams {
    /// Compute throughput, operations/second.
    pub pi: f64,
    /// Deterministic access throughput, element-accesses/second.
    pub beta_data: f64,
    /// Entropy/sampling throughput, samples/second.
    pub beta_rand: f64,
    /// Bytes per element, only used to convert byte rates.
    pub bytes_per_element: u32,
}

impl Default for ArchParams {
    /// Per-mm² densities: 1e4 GOPS compute, 1e2 GB/s on-chip memory and
    /// 1 GSa/s of Gaussian samples.
    fn default() -> Self {
        ArchParams::from_byte_rate(1e13, 1e11, 1e9, 4)
    }
}

impl ArchParams {
    pub fn new(pi: f64, beta_data: f64, beta_rand: f64) -> Result<Self> {
        let arch = ArchParams {
            pi,
            beta_data,
            beta_rand,
            bytes_per_element: 4,
        };
        arch.validate()?;
        Ok(arch)
    }

    /// Builds params from a deterministic bandwidth given in bytes/second.
    pub fn from_byte_rate(
        pi: f64,
        data_bytes_per_sec: f64,
        beta_rand: f64,
        bytes_per_element: u32,
    ) -> Self {
        ArchParams {
            pi,
            beta_data: data_bytes_per_sec / f64::from(bytes_per_element.max(1)),
            beta_rand,
            bytes_per_element,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("pi", self.pi),
            ("beta_data", self.beta_data),
            ("beta_rand", self.beta_rand),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return domain(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if self.bytes_per_element < 1 {
            return domain("bytes_per_element must be >= 1");
        }
        Ok(())
    }

    /// Returns a copy with every rate multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        ArchParams {
            pi: self.pi * k,
            beta_data: self.beta_data * k,
            beta_rand: self.beta_rand * k,
            bytes_per_element: self.bytes_per_element,
        }
    }
}

/// Which resource limits throughput.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegimeLabel {
    ComputeBound,
    DataBound,
    EntropyBound,
}

impl RegimeLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegimeLabel::ComputeBound => "ComputeBound",
            RegimeLabel::DataBound => "DataBound",
            RegimeLabel::EntropyBound => "EntropyBound",
        }
    }
}

impl std::fmt::Display for RegimeLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RooflinePoint {
    pub ai: f64,
    pub alpha: f64,
    pub beta_eff: f64,
    pub phi: f64,
    pub regime: RegimeLabel,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return domain(format!("alpha must lie in [0, 1], got {alpha}"));
    }
    Ok(())
}

fn check_ai(ai: f64) -> Result<()> {
    if !(ai.is_finite() && ai > 0.0) {
        return domain(format!("ai must be positive and finite, got {ai}"));
    }
    Ok(())
}

/// Effective unified access throughput for stochastic fraction `alpha`.
///
/// The endpoints return the raw rates bit-for-bit.
pub fn effective_beta(alpha: f64, arch: &ArchParams) -> Result<f64> {
    check_alpha(alpha)?;
    arch.validate()?;
    Ok(if alpha == 0.0 {
        arch.beta_data
    } else if alpha == 1.0 {
        arch.beta_rand
    } else {
        1.0 / (alpha / arch.beta_rand + (1.0 - alpha) / arch.beta_data)
    })
}

/// Attainable operations/second: `min(pi, ai * beta(alpha))`.
pub fn system_throughput(ai: f64, alpha: f64, arch: &ArchParams) -> Result<f64> {
    check_ai(ai)?;
    let beta = effective_beta(alpha, arch)?;
    Ok(arch.pi.min(ai * beta))
}

/// Classifies the limiting resource.
///
/// Ties between compute and access go to `ComputeBound`; ties between the
/// two access terms go to `EntropyBound`.
pub fn classify_regime(ai: f64, alpha: f64, arch: &ArchParams) -> Result<RegimeLabel> {
    check_ai(ai)?;
    let beta = effective_beta(alpha, arch)?;
    Ok(regime_from_terms(
        arch.pi <= ai * beta,
        alpha / arch.beta_rand,
        (1.0 - alpha) / arch.beta_data,
    ))
}

pub(crate) fn regime_from_terms(compute_bound: bool, rand_term: f64, data_term: f64) -> RegimeLabel {
    if compute_bound {
        RegimeLabel::ComputeBound
    } else if rand_term >= data_term {
        RegimeLabel::EntropyBound
    } else {
        RegimeLabel::DataBound
    }
}

/// Stochastic fraction at which the access roof meets the compute roof.
///
/// Returns `None` when the rates are equal (no transition) or when the
/// crossing lies outside `[0, 1]`.
pub fn crossover_alpha(ai: f64, arch: &ArchParams) -> Result<Option<f64>> {
    check_ai(ai)?;
    arch.validate()?;
    if arch.beta_rand == arch.beta_data {
        return Ok(None);
    }
    let inv_data = 1.0 / arch.beta_data;
    let alpha = (ai / arch.pi - inv_data) / (1.0 / arch.beta_rand - inv_data);
    Ok((0.0..=1.0).contains(&alpha).then_some(alpha))
}

/// Log-spaced roofline samples over `[ai_min, ai_max]`, both ends included.
pub fn roofline_curve(
    arch: &ArchParams,
    alpha: f64,
    ai_min: f64,
    ai_max: f64,
    n_points: usize,
) -> Result<Vec<RooflinePoint>> {
    if !(ai_min.is_finite() && ai_max.is_finite() && ai_min > 0.0 && ai_min < ai_max) {
        return domain(format!(
            "ai range must satisfy 0 < ai_min < ai_max, got [{ai_min}, {ai_max}]"
        ));
    }
    if n_points < 2 {
        return domain(format!("n_points must be >= 2, got {n_points}"));
    }
    let beta_eff = effective_beta(alpha, arch)?;
    let (lo, hi) = (ai_min.ln(), ai_max.ln());
    let last = (n_points - 1) as f64;
    (0..n_points)
        .map(|i| {
            let ai = match i {
                0 => ai_min,
                i if i == n_points - 1 => ai_max,
                i => (lo + (hi - lo) * i as f64 / last).exp(),
            };
            Ok(RooflinePoint {
                ai,
                alpha,
                beta_eff,
                phi: arch.pi.min(ai * beta_eff),
                regime: classify_regime(ai, alpha, arch)?,
            })
        })
        .collect()
}

/// How many times narrower the effective access roof is than `beta_data`.
pub fn bandwidth_compression(alpha: f64, arch: &ArchParams) -> Result<f64> {
    Ok(arch.beta_data / effective_beta(alpha, arch)?)
}
