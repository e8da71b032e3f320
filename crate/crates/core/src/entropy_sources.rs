//! Parametric hardware entropy sources.
//!
//! Ideal outputs are i.i.d. (uniform, Gaussian or Bernoulli). Non-idealities
//! are layered on top as an AR(1) correlation followed by an additive bias
//! and a linear drift, all of which the fidelity estimators can recover.

use serde::{Deserialize, Serialize};

use crate::distribution_shaping::{ShapingPipeline, ShapingPipelineSpec};
use crate::error::{domain, Result};
use crate::fidelity::SampleStream;
use crate::rng::{CounterRng, UniformSource};

/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380649e-23;

/// Mismatch sigma for a device of relative area `area_wl`.
pub fn pelgrom_sigma(sigma0: f64, area_wl: f64) -> Result<f64> {
    if !(sigma0 >= 0.0) {
        return domain(format!("sigma0 must be >= 0, got {sigma0}"));
    }
    if !(area_wl > 0.0) {
        return domain(format!("area_wl must be > 0, got {area_wl}"));
    }
    Ok(sigma0 / area_wl.sqrt())
}

/// kT/C noise voltage.
pub fn thermal_sigma(temperature: f64, capacitance: f64) -> Result<f64> {
    if !(temperature > 0.0 && capacitance > 0.0) {
        return domain(format!(
            "temperature and capacitance must be > 0, got T={temperature}, C={capacitance}"
        ));
    }
    Ok((BOLTZMANN * temperature / capacitance).sqrt())
}

/// Either physical kT/C parameters or a direct sigma in volts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacitance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

impl ThermalParams {
    pub fn physical(temperature: f64, capacitance: f64) -> Self {
        ThermalParams {
            temperature: Some(temperature),
            capacitance: Some(capacitance),
            sigma: None,
        }
    }

    pub fn direct(sigma: f64) -> Self {
        ThermalParams {
            temperature: None,
            capacitance: None,
            sigma: Some(sigma),
        }
    }

    pub fn sigma(&self) -> Result<f64> {
        match (self.temperature, self.capacitance, self.sigma) {
            (None, None, Some(s)) if s >= 0.0 => Ok(s),
            (None, None, Some(s)) => domain(format!("sigma must be >= 0, got {s}")),
            (Some(t), Some(c), None) => thermal_sigma(t, c),
            _ => domain("thermal source needs either sigma or temperature + capacitance"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceKind {
    PseudoUniform,
    ThermalGaussian(ThermalParams),
    MismatchStatic { sigma0: f64, area_wl: f64 },
    StochasticSwitch { p: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NonidealitySpec {
    /// Additive offset, in output units.
    pub bias: f64,
    /// Lag-1 autocorrelation.
    pub rho: f64,
    /// Mean shift per million samples.
    pub drift: f64,
}

impl NonidealitySpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho.abs() < 1.0) {
            return domain(format!("|rho| must be < 1, got {}", self.rho));
        }
        if !(self.bias.is_finite() && self.drift.is_finite()) {
            return domain("bias and drift must be finite");
        }
        Ok(())
    }

    pub fn is_ideal(&self) -> bool {
        self.bias == 0.0 && self.rho == 0.0 && self.drift == 0.0
    }
}

/// Running state of [`apply_nonidealities`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NonidealityState {
    prev: Option<f64>,
    t: u64,
}

impl NonidealityState {
    pub fn index(&self) -> u64 {
        self.t
    }
}

/// `y_t = rho * y_{t-1} + sqrt(1 - rho^2) * x_t`, then
/// `+ bias + drift * t / 1e6`.
///
/// The recursion starts at `y_0 = x_0`, which is already stationary for
/// unit-variance i.i.d. input.
pub fn apply_nonidealities(x: f64, state: &mut NonidealityState, spec: &NonidealitySpec) -> f64 {
    let y = match state.prev {
        Some(prev) => spec.rho * prev + (1.0 - spec.rho * spec.rho).sqrt() * x,
        None => x,
    };
    state.prev = Some(y);
    let t = state.t;
    state.t += 1;
    y + spec.bias + spec.drift * (t as f64 / 1e6)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub kind: SourceKind,
    #[serde(default)]
    pub nonideality: NonidealitySpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub stream_id: u64,
}

impl SourceSpec {
    pub fn new(kind: SourceKind, seed: u64) -> Self {
        SourceSpec {
            kind,
            nonideality: NonidealitySpec::default(),
            seed,
            stream_id: 0,
        }
    }

    pub fn with_nonideality(mut self, nonideality: NonidealitySpec) -> Self {
        self.nonideality = nonideality;
        self
    }

    pub fn with_stream(mut self, stream_id: u64) -> Self {
        self.stream_id = stream_id;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.nonideality.validate()?;
        self.ideal_sigma().map(|_| ())
    }

    /// Standard deviation of the ideal output, where meaningful.
    pub fn ideal_sigma(&self) -> Result<f64> {
        match self.kind {
            SourceKind::PseudoUniform => Ok((1.0f64 / 12.0).sqrt()),
            SourceKind::ThermalGaussian(t) => t.sigma(),
            SourceKind::MismatchStatic { sigma0, area_wl } => pelgrom_sigma(sigma0, area_wl),
            SourceKind::StochasticSwitch { p } => {
                if !(0.0..=1.0).contains(&p) {
                    return domain(format!("switching probability must lie in [0, 1], got {p}"));
                }
                Ok((p * (1.0 - p)).sqrt())
            }
        }
    }
}

/// A seeded stream from one source. Single owner; clone to fork.
#[derive(Debug, Clone)]
pub struct EntropySource {
    spec: SourceSpec,
    sigma: f64,
    rng: CounterRng,
    normals: ShapingPipeline,
    state: NonidealityState,
}

pub fn create_source(spec: SourceSpec) -> Result<EntropySource> {
    spec.validate()?;
    Ok(EntropySource {
        sigma: spec.ideal_sigma()?,
        rng: CounterRng::new(spec.seed, spec.stream_id),
        normals: ShapingPipelineSpec::default().build()?,
        state: NonidealityState::default(),
        spec,
    })
}

impl EntropySource {
    pub fn spec(&self) -> &SourceSpec {
        &self.spec
    }

    /// Next sample: uniform for `PseudoUniform`, volts for the Gaussian
    /// kinds, a 0/1 bit for `StochasticSwitch`.
    ///
    /// Correlation acts around the ideal mean so it leaves the mean and
    /// variance unchanged. For a switch, non-idealities act on the latent
    /// uniform before thresholding, so `bias` shifts the probability of a 1.
    pub fn next_raw(&mut self) -> f64 {
        let ni = &self.spec.nonideality;
        match self.spec.kind {
            SourceKind::PseudoUniform => {
                let u = self.rng.next_uniform();
                0.5 + apply_nonidealities(u - 0.5, &mut self.state, ni)
            }
            SourceKind::ThermalGaussian(_) | SourceKind::MismatchStatic { .. } => {
                let x = self.sigma * self.normals.sample(&mut self.rng);
                apply_nonidealities(x, &mut self.state, ni)
            }
            SourceKind::StochasticSwitch { p } => {
                // 1 iff 0.5 - u > 0.5 - p in the ideal case, i.e. u < p
                let u = self.rng.next_uniform();
                let v = apply_nonidealities(0.5 - u, &mut self.state, ni);
                f64::from(u8::from(v > 0.5 - p))
            }
        }
    }

    pub fn samples(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.next_raw()).collect()
    }
}

impl SampleStream for EntropySource {
    fn next_sample(&mut self) -> f64 {
        self.next_raw()
    }
}

/// Static per-cell offsets of a device array.
#[derive(Debug, Clone, PartialEq)]
pub struct MismatchArray {
    rows: usize,
    cols: usize,
    offsets: Vec<f64>,
}

impl MismatchArray {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn offset(&self, row: usize, col: usize) -> Option<f64> {
        (row < self.rows && col < self.cols).then(|| self.offsets[row * self.cols + col])
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    /// Population standard deviation of the offsets.
    pub fn std_dev(&self) -> f64 {
        let n = self.offsets.len() as f64;
        let mean = self.offsets.iter().sum::<f64>() / n;
        (self.offsets.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
    }
}

/// Draws Pelgrom-scaled Gaussian offsets once per cell (cells independent).
pub fn mismatch_array(spec: &SourceSpec, rows: usize, cols: usize) -> Result<MismatchArray> {
    let SourceKind::MismatchStatic { sigma0, area_wl } = spec.kind else {
        return domain("mismatch_array requires a MismatchStatic source");
    };
    if rows == 0 || cols == 0 {
        return domain("mismatch array needs rows, cols >= 1");
    }
    let sigma = pelgrom_sigma(sigma0, area_wl)?;
    let mut rng = CounterRng::new(spec.seed, spec.stream_id);
    let mut normals = ShapingPipelineSpec::default().build()?;
    let offsets = (0..rows * cols)
        .map(|_| sigma * normals.sample(&mut rng))
        .collect();
    Ok(MismatchArray {
        rows,
        cols,
        offsets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean(v: &[f64]) -> f64 {
        v.iter().sum::<f64>() / v.len() as f64
    }

    fn var(v: &[f64]) -> f64 {
        let m = mean(v);
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
    }

    #[test]
    fn pelgrom_examples() {
        assert_eq!(pelgrom_sigma(10e-3, 1.0).unwrap(), 10e-3);
        assert!((pelgrom_sigma(10e-3, 4.0).unwrap() - 5e-3).abs() < 1e-18);
        assert_eq!(pelgrom_sigma(0.0, 7.0).unwrap(), 0.0);
        assert!(pelgrom_sigma(1.0, 0.0).is_err());
        assert!(pelgrom_sigma(1.0, -2.0).is_err());
    }

    #[test]
    fn thermal_examples() {
        let s = thermal_sigma(300.0, 1e-15).unwrap();
        assert!((s * s - 4.141947e-6).abs() < 1e-12);
        assert!((s - 2.03518e-3).abs() < 1e-8);
        let s4 = thermal_sigma(300.0, 4e-15).unwrap();
        assert!((s4 - s / 2.0).abs() < 1e-18);
        assert!((s4 - 1.01759e-3).abs() < 1e-8);
        let hot = thermal_sigma(1200.0, 1e-15).unwrap();
        assert!((hot / s - 2.0).abs() < 1e-14);
        assert!(thermal_sigma(0.0, 1e-15).is_err());
        assert!(thermal_sigma(300.0, -1.0).is_err());
    }

    #[test]
    fn determinism() {
        let spec = SourceSpec::new(SourceKind::ThermalGaussian(ThermalParams::direct(1.0)), 11);
        let a = create_source(spec).unwrap().samples(1000);
        let b = create_source(spec).unwrap().samples(1000);
        assert_eq!(a, b);
        let c = create_source(spec.with_stream(1)).unwrap().samples(16);
        assert_ne!(&a[..16], &c[..]);
    }

    #[test]
    fn switch_degenerate() {
        let ones = create_source(SourceSpec::new(SourceKind::StochasticSwitch { p: 1.0 }, 0))
            .unwrap()
            .samples(10_000);
        assert!(ones.iter().all(|&b| b == 1.0));
        let zeros = create_source(SourceSpec::new(SourceKind::StochasticSwitch { p: 0.0 }, 0))
            .unwrap()
            .samples(10_000);
        assert!(zeros.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn switch_frequency() {
        let s = create_source(SourceSpec::new(SourceKind::StochasticSwitch { p: 0.3 }, 4))
            .unwrap()
            .samples(1_000_000);
        assert!((mean(&s) - 0.3).abs() < 0.002);
    }

    #[test]
    fn thermal_mean_bound() {
        let sigma = 2.5e-3;
        let s = create_source(SourceSpec::new(
            SourceKind::ThermalGaussian(ThermalParams::direct(sigma)),
            21,
        ))
        .unwrap()
        .samples(1_000_000);
        assert!(mean(&s).abs() < 4.0 * sigma / 1000.0);
    }

    #[test]
    fn uniform_range() {
        let s = create_source(SourceSpec::new(SourceKind::PseudoUniform, 2))
            .unwrap()
            .samples(100_000);
        assert!(s.iter().all(|u| (0.0..1.0).contains(u)));
    }

    #[test]
    fn nonideality_identity() {
        let mut st = NonidealityState::default();
        let ni = NonidealitySpec::default();
        for x in [0.3, -1.0, 7.5, 0.0] {
            assert_eq!(apply_nonidealities(x, &mut st, &ni), x);
        }
        assert_eq!(st.index(), 4);
    }

    #[test]
    fn nonideality_ar1_keeps_unit_variance() {
        let ni = NonidealitySpec {
            rho: 0.5,
            ..Default::default()
        };
        let spec = SourceSpec::new(SourceKind::ThermalGaussian(ThermalParams::direct(1.0)), 9)
            .with_nonideality(ni);
        let s = create_source(spec).unwrap().samples(1_000_000);
        assert!((var(&s) - 1.0).abs() < 0.02);
    }

    #[test]
    fn nonideality_bias() {
        let ni = NonidealitySpec {
            bias: 0.1,
            ..Default::default()
        };
        let spec = SourceSpec::new(SourceKind::ThermalGaussian(ThermalParams::direct(1.0)), 13)
            .with_nonideality(ni);
        let s = create_source(spec).unwrap().samples(1_000_000);
        assert!((mean(&s) - 0.1).abs() < 0.004);
    }

    #[test]
    fn drift_linearity() {
        let ni = NonidealitySpec {
            drift: 0.5,
            ..Default::default()
        };
        let spec = SourceSpec::new(SourceKind::ThermalGaussian(ThermalParams::direct(1.0)), 17)
            .with_nonideality(ni);
        let s = create_source(spec).unwrap().samples(1_000_000);
        let diff = mean(&s[900_000..]) - mean(&s[..100_000]);
        assert!((diff - 0.5 * 0.9).abs() < 0.01 * 1.0, "diff={diff}");
    }

    #[test]
    fn switch_bias_shifts_probability() {
        let ni = NonidealitySpec {
            bias: 0.1,
            ..Default::default()
        };
        let s = create_source(
            SourceSpec::new(SourceKind::StochasticSwitch { p: 0.3 }, 5).with_nonideality(ni),
        )
        .unwrap()
        .samples(1_000_000);
        assert!((mean(&s) - 0.4).abs() < 0.002);
    }

    #[test]
    fn invalid_specs_rejected() {
        let bad_rho = SourceSpec::new(SourceKind::PseudoUniform, 0).with_nonideality(NonidealitySpec {
            rho: 1.0,
            ..Default::default()
        });
        assert!(create_source(bad_rho).is_err());
        assert!(create_source(SourceSpec::new(SourceKind::StochasticSwitch { p: 1.5 }, 0)).is_err());
        assert!(create_source(SourceSpec::new(
            SourceKind::MismatchStatic {
                sigma0: 1e-3,
                area_wl: 0.0
            },
            0
        ))
        .is_err());
        let both = ThermalParams {
            temperature: Some(300.0),
            capacitance: Some(1e-15),
            sigma: Some(1.0),
        };
        assert!(create_source(SourceSpec::new(SourceKind::ThermalGaussian(both), 0)).is_err());
    }

    #[test]
    fn mismatch_examples() {
        let spec = SourceSpec::new(
            SourceKind::MismatchStatic {
                sigma0: 10e-3,
                area_wl: 1.0,
            },
            3,
        );
        let a = mismatch_array(&spec, 100, 100).unwrap();
        let b = mismatch_array(&spec, 100, 100).unwrap();
        assert_eq!(a, b);
        assert!((a.std_dev() / 10e-3 - 1.0).abs() < 0.05);
        assert_eq!(a.offset(3, 4), b.offset(3, 4));
        assert_eq!(a.offset(100, 0), None);

        let zero = SourceSpec::new(
            SourceKind::MismatchStatic {
                sigma0: 0.0,
                area_wl: 2.0,
            },
            3,
        );
        assert!(mismatch_array(&zero, 10, 10).unwrap().offsets().iter().all(|&o| o == 0.0));

        let wrong = SourceSpec::new(SourceKind::PseudoUniform, 0);
        assert!(mismatch_array(&wrong, 4, 4).is_err());
    }

    #[test]
    fn spec_json_roundtrip() {
        let json = r#"{"kind": {"thermal_gaussian": {"temperature": 300.0, "capacitance": 1e-15}},
                       "nonideality": {"bias": 0.1}, "seed": 5}"#;
        let spec: SourceSpec = serde_json::from_str(json).unwrap();
        assert_eq!(spec.nonideality.bias, 0.1);
        assert_eq!(spec.stream_id, 0);
        let back: SourceSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
    }
}
