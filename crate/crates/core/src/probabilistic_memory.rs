//! Unified probabilistic memory.
//!
//! Every cell holds either a deterministic value or a distribution, and the
//! same primitives (`read`, `write`, `sample`, `read_distribution`,
//! `set_variance`) serve both. A deterministic value is the zero-variance
//! case of sampling. Four backends differ only in what each primitive costs
//! and in which variances they can realise; with the same entropy stream they
//! return identical sample values.
//!
//! Per-operation charges:
//!
//! | op                 | charges                                                         |
//! |--------------------|-----------------------------------------------------------------|
//! | `read`             | 1 read, `bpe` bytes, read energy                                |
//! | `write`            | 1 write, `params * bpe` bytes, write energy, +1 endurance       |
//! | `read_distribution`| 1 read, `params * bpe` bytes, `params` read energies            |
//! | `set_variance`     | 1 write, `bpe` bytes, write energy, +1 endurance                |
//! | `sample`, zero var | same as `read`, no entropy                                      |
//! | `sample`, random   | 1 sample, `bits_per_sample` entropy bits, sample energy, plus:  |
//! |   von Neumann      | parameter reads, transport bytes, pipeline shaping ops          |
//! |   coupled          | `bpe` bytes sensed; a write (+endurance) if write-based         |
//! |   near-memory      | parameter reads, writeback bytes                                |
//! |   in-memory        | parameter reads                                                 |
//!
//! `params` is 2 for a Gaussian and 1 otherwise; `bpe` is bytes per element.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::distribution_shaping::{
    bernoulli_from_uniform, reparameterize, ShapingPipeline, ShapingPipelineSpec,
};
use crate::error::{domain, Error, Result};
use crate::rng::{CounterRng, UniformSource};

/// What a cell returns when sampled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistributionSpec {
    Gaussian { mu: f64, sigma: f64 },
    Bernoulli { p: f64 },
    PointMass { mu: f64 },
}

impl DistributionSpec {
    /// Gaussian with `sigma == 0` canonicalizes to `PointMass`.
    pub fn gaussian(mu: f64, sigma: f64) -> Result<Self> {
        if !mu.is_finite() {
            return domain(format!("mu must be finite, got {mu}"));
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return domain(format!("sigma must be finite and >= 0, got {sigma}"));
        }
        Ok(if sigma == 0.0 {
            DistributionSpec::PointMass { mu }
        } else {
            DistributionSpec::Gaussian { mu, sigma }
        })
    }

    pub fn bernoulli(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return domain(format!("p must lie in [0, 1], got {p}"));
        }
        Ok(DistributionSpec::Bernoulli { p })
    }

    pub fn point_mass(mu: f64) -> Self {
        DistributionSpec::PointMass { mu }
    }

    /// Re-validates and canonicalizes a value that bypassed the constructors.
    pub fn canonical(self) -> Result<Self> {
        match self {
            DistributionSpec::Gaussian { mu, sigma } => Self::gaussian(mu, sigma),
            DistributionSpec::Bernoulli { p } => Self::bernoulli(p),
            DistributionSpec::PointMass { mu } => Self::gaussian(mu, 0.0),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            DistributionSpec::Gaussian { mu, .. } | DistributionSpec::PointMass { mu } => mu,
            DistributionSpec::Bernoulli { p } => p,
        }
    }

    /// True when every sample is the same value.
    pub fn is_deterministic(&self) -> bool {
        match *self {
            DistributionSpec::Gaussian { sigma, .. } => sigma == 0.0,
            DistributionSpec::Bernoulli { p } => p == 0.0 || p == 1.0,
            DistributionSpec::PointMass { .. } => true,
        }
    }

    fn param_count(&self) -> u64 {
        match self {
            DistributionSpec::Gaussian { .. } => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellState {
    Deterministic(f64),
    Distribution(DistributionSpec),
}

impl CellState {
    pub fn gaussian(mu: f64, sigma: f64) -> Result<Self> {
        Ok(CellState::Distribution(DistributionSpec::gaussian(mu, sigma)?))
    }

    fn distribution(&self) -> DistributionSpec {
        match *self {
            CellState::Deterministic(v) => DistributionSpec::PointMass { mu: v },
            CellState::Distribution(d) => d,
        }
    }

    fn param_count(&self) -> u64 {
        self.distribution().param_count()
    }
}

fn default_transport() -> f64 {
    4.0
}
fn default_sigma0() -> f64 {
    0.1
}
fn default_min_frac() -> f64 {
    0.5
}
fn default_max_frac() -> f64 {
    2.0
}
fn default_parallelism() -> u32 {
    32
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendKind {
    /// Separate RNG whose samples share the memory bus.
    VonNeumann {
        /// Samples/second; `None` inherits the architecture's `beta_rand`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rng_rate: Option<f64>,
        #[serde(default = "default_transport")]
        transport_bytes_per_sample: f64,
    },
    /// The storage device is the entropy source;
    /// `sigma_dev(mu) = sigma0 * (1 + gamma * |mu|)`.
    CoupledPcim {
        #[serde(default = "default_sigma0")]
        sigma0: f64,
        #[serde(default)]
        gamma: f64,
        #[serde(default = "default_min_frac")]
        sigma_min_frac: f64,
        #[serde(default = "default_max_frac")]
        sigma_max_frac: f64,
        #[serde(default)]
        write_based_sampling: bool,
    },
    /// Peripheral entropy written back next to the parameters.
    DecoupledNearMemory {
        /// Samples/second; `None` inherits the architecture's `beta_rand`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rng_rate: Option<f64>,
        #[serde(default = "default_transport")]
        writeback_bytes_per_sample: f64,
    },
    /// Entropy generated inside the array, `parallelism` lanes wide.
    DecoupledInMemory {
        /// Samples/second; `None` inherits the architecture's `beta_rand`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rng_rate: Option<f64>,
        #[serde(default = "default_parallelism")]
        parallelism: u32,
    },
}

impl BackendKind {
    pub fn von_neumann() -> Self {
        BackendKind::VonNeumann {
            rng_rate: None,
            transport_bytes_per_sample: default_transport(),
        }
    }

    pub fn coupled() -> Self {
        BackendKind::CoupledPcim {
            sigma0: default_sigma0(),
            gamma: 0.0,
            sigma_min_frac: default_min_frac(),
            sigma_max_frac: default_max_frac(),
            write_based_sampling: false,
        }
    }

    pub fn near_memory() -> Self {
        BackendKind::DecoupledNearMemory {
            rng_rate: None,
            writeback_bytes_per_sample: default_transport(),
        }
    }

    pub fn in_memory(parallelism: u32) -> Self {
        BackendKind::DecoupledInMemory {
            rng_rate: None,
            parallelism,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            BackendKind::VonNeumann { .. } => "von_neumann",
            BackendKind::CoupledPcim { .. } => "coupled_pcim",
            BackendKind::DecoupledNearMemory { .. } => "decoupled_near_memory",
            BackendKind::DecoupledInMemory { .. } => "decoupled_in_memory",
        }
    }

    /// Parses the short names used on the command line.
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "von-neumann" | "von_neumann" | "vn" => Some(Self::von_neumann()),
            "coupled" | "coupled-pcim" | "coupled_pcim" => Some(Self::coupled()),
            "near-memory" | "decoupled-near-memory" | "decoupled_near_memory" => {
                Some(Self::near_memory())
            }
            "in-memory" | "decoupled-in-memory" | "decoupled_in_memory" => {
                Some(Self::in_memory(default_parallelism()))
            }
            _ => None,
        }
    }
}

fn default_read_pj() -> f64 {
    1.0
}
fn default_write_pj() -> f64 {
    5.0
}
fn default_sample_pj() -> f64 {
    2.0
}
fn default_latency() -> u64 {
    1
}
fn default_bits_per_sample() -> u32 {
    32
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    #[serde(default = "default_read_pj")]
    pub read_energy_pj: f64,
    #[serde(default = "default_write_pj")]
    pub write_energy_pj: f64,
    #[serde(default = "default_sample_pj")]
    pub sample_energy_pj: f64,
    /// Cycles per access (one row access for parallel backends).
    #[serde(default = "default_latency")]
    pub latency_cycles: u64,
    /// Entropy bits charged per raw sample.
    #[serde(default = "default_bits_per_sample")]
    pub bits_per_sample: u32,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig::new(BackendKind::von_neumann())
    }
}

impl BackendConfig {
    pub fn new(kind: BackendKind) -> Self {
        BackendConfig {
            kind,
            read_energy_pj: default_read_pj(),
            write_energy_pj: default_write_pj(),
            sample_energy_pj: default_sample_pj(),
            latency_cycles: default_latency(),
            bits_per_sample: default_bits_per_sample(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                domain(format!("{name} must be positive and finite, got {v}"))
            }
        };
        let nonneg = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                domain(format!("{name} must be finite and >= 0, got {v}"))
            }
        };
        positive("read_energy_pj", self.read_energy_pj)?;
        positive("write_energy_pj", self.write_energy_pj)?;
        positive("sample_energy_pj", self.sample_energy_pj)?;
        if self.latency_cycles == 0 {
            return domain("latency_cycles must be >= 1");
        }
        if self.bits_per_sample == 0 {
            return domain("bits_per_sample must be >= 1");
        }
        match self.kind {
            BackendKind::VonNeumann {
                rng_rate,
                transport_bytes_per_sample,
            } => {
                if let Some(r) = rng_rate {
                    positive("rng_rate", r)?;
                }
                nonneg("transport_bytes_per_sample", transport_bytes_per_sample)
            }
            BackendKind::CoupledPcim {
                sigma0,
                gamma,
                sigma_min_frac,
                sigma_max_frac,
                ..
            } => {
                positive("sigma0", sigma0)?;
                nonneg("gamma", gamma)?;
                if !(sigma_min_frac > 0.0 && sigma_min_frac <= 1.0 && sigma_max_frac >= 1.0)
                    || !sigma_max_frac.is_finite()
                {
                    return domain(format!(
                        "coupled tuning window needs 0 < min <= 1 <= max, got [{sigma_min_frac}, {sigma_max_frac}]"
                    ));
                }
                Ok(())
            }
            BackendKind::DecoupledNearMemory {
                rng_rate,
                writeback_bytes_per_sample,
            } => {
                if let Some(r) = rng_rate {
                    positive("rng_rate", r)?;
                }
                nonneg("writeback_bytes_per_sample", writeback_bytes_per_sample)
            }
            BackendKind::DecoupledInMemory {
                rng_rate,
                parallelism,
            } => {
                if let Some(r) = rng_rate {
                    positive("rng_rate", r)?;
                }
                if parallelism == 0 {
                    return domain("parallelism must be >= 1");
                }
                Ok(())
            }
        }
    }
}

/// Cumulative operation counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub total_reads: u64,
    pub total_writes: u64,
    pub total_samples: u64,
    pub bytes_moved: f64,
    pub entropy_bits_consumed: u64,
    pub energy_pj: f64,
    pub shaping_ops: u64,
}

impl std::ops::Add for CostReport {
    type Output = CostReport;

    fn add(self, o: CostReport) -> CostReport {
        CostReport {
            total_reads: self.total_reads + o.total_reads,
            total_writes: self.total_writes + o.total_writes,
            total_samples: self.total_samples + o.total_samples,
            bytes_moved: self.bytes_moved + o.bytes_moved,
            entropy_bits_consumed: self.entropy_bits_consumed + o.entropy_bits_consumed,
            energy_pj: self.energy_pj + o.energy_pj,
            shaping_ops: self.shaping_ops + o.shaping_ops,
        }
    }
}

impl std::ops::AddAssign for CostReport {
    fn add_assign(&mut self, o: CostReport) {
        *self = *self + o;
    }
}

impl CostReport {
    /// `self` repeated `n` times.
    pub fn times(&self, n: u64) -> CostReport {
        let nf = n as f64;
        CostReport {
            total_reads: self.total_reads * n,
            total_writes: self.total_writes * n,
            total_samples: self.total_samples * n,
            bytes_moved: self.bytes_moved * nf,
            entropy_bits_consumed: self.entropy_bits_consumed * n,
            energy_pj: self.energy_pj * nf,
            shaping_ops: self.shaping_ops * n,
        }
    }
}

/// Charge for one stochastic sample of a cell with `params` stored
/// parameters, and whether it physically writes the cell.
pub fn sample_charge(
    backend: &BackendConfig,
    bytes_per_element: f64,
    params: u64,
    shaping_ops: u64,
) -> (CostReport, bool) {
    let mut c = CostReport {
        total_samples: 1,
        entropy_bits_consumed: u64::from(backend.bits_per_sample),
        energy_pj: backend.sample_energy_pj,
        ..Default::default()
    };
    let param_bytes = params as f64 * bytes_per_element;
    let param_energy = params as f64 * backend.read_energy_pj;
    let mut wears = false;
    match backend.kind {
        BackendKind::VonNeumann {
            transport_bytes_per_sample,
            ..
        } => {
            c.bytes_moved = param_bytes + transport_bytes_per_sample;
            c.energy_pj += param_energy;
            c.shaping_ops = shaping_ops;
        }
        BackendKind::CoupledPcim {
            write_based_sampling,
            ..
        } => {
            c.bytes_moved = bytes_per_element;
            if write_based_sampling {
                c.total_writes = 1;
                c.energy_pj += backend.write_energy_pj;
                wears = true;
            }
        }
        BackendKind::DecoupledNearMemory {
            writeback_bytes_per_sample,
            ..
        } => {
            c.bytes_moved = param_bytes + writeback_bytes_per_sample;
            c.energy_pj += param_energy;
        }
        BackendKind::DecoupledInMemory { .. } => {
            c.bytes_moved = param_bytes;
            c.energy_pj += param_energy;
        }
    }
    (c, wears)
}

/// Seeded entropy delivered to a memory: raw uniforms plus standard-normal
/// `eps` from a shaping pipeline.
#[derive(Debug, Clone)]
pub struct EntropyStream {
    rng: CounterRng,
    pipeline: ShapingPipeline,
}

impl EntropyStream {
    /// Box–Muller stream.
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self::with_pipeline(seed, stream_id, &ShapingPipelineSpec::default())
            .expect("box-muller pipeline is valid")
    }

    /// The pipeline must produce standard normals.
    pub fn with_pipeline(seed: u64, stream_id: u64, shaping: &ShapingPipelineSpec) -> Result<Self> {
        if !shaping.is_standard_normal() {
            return domain("entropy stream needs a standard-normal shaping pipeline");
        }
        Ok(EntropyStream {
            rng: CounterRng::new(seed, stream_id),
            pipeline: shaping.build()?,
        })
    }

    pub fn next_eps(&mut self) -> f64 {
        self.pipeline.sample(&mut self.rng)
    }

    pub fn next_uniform(&mut self) -> f64 {
        self.rng.next_uniform()
    }

    pub fn shaping_ops(&self) -> u32 {
        self.pipeline.spec().ops_per_sample()
    }
}

/// An addressable grid of cells bound to one backend.
#[derive(Debug, Clone)]
pub struct PMemArray {
    rows: usize,
    cols: usize,
    cells: Vec<CellState>,
    backend: BackendConfig,
    bytes_per_element: u32,
    counters: CostReport,
    endurance: Vec<u64>,
}

impl PMemArray {
    /// All cells start as `Deterministic(0.0)`.
    pub fn new(rows: usize, cols: usize, backend: BackendConfig) -> Result<Self> {
        Self::with_element_size(rows, cols, backend, 4)
    }

    pub fn with_element_size(
        rows: usize,
        cols: usize,
        backend: BackendConfig,
        bytes_per_element: u32,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return domain("array needs rows, cols >= 1");
        }
        if bytes_per_element == 0 {
            return domain("bytes_per_element must be >= 1");
        }
        backend.validate()?;
        Ok(PMemArray {
            rows,
            cols,
            cells: vec![CellState::Deterministic(0.0); rows * cols],
            backend,
            bytes_per_element,
            counters: CostReport::default(),
            endurance: vec![0; rows * cols],
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn backend(&self) -> &BackendConfig {
        &self.backend
    }

    fn index(&self, (row, col): (usize, usize)) -> Result<usize> {
        if row < self.rows && col < self.cols {
            Ok(row * self.cols + col)
        } else {
            Err(Error::Address {
                row,
                col,
                rows: self.rows,
                cols: self.cols,
            })
        }
    }

    fn bpe(&self) -> f64 {
        f64::from(self.bytes_per_element)
    }

    fn read_charge(&self) -> CostReport {
        CostReport {
            total_reads: 1,
            bytes_moved: self.bpe(),
            energy_pj: self.backend.read_energy_pj,
            ..Default::default()
        }
    }

    fn write_charge(&self, params: u64) -> CostReport {
        CostReport {
            total_writes: 1,
            bytes_moved: params as f64 * self.bpe(),
            energy_pj: self.backend.write_energy_pj,
            ..Default::default()
        }
    }

    pub fn write(&mut self, addr: (usize, usize), state: CellState) -> Result<()> {
        let i = self.index(addr)?;
        let state = match state {
            CellState::Distribution(d) => CellState::Distribution(d.canonical()?),
            CellState::Deterministic(v) if !v.is_finite() => {
                return domain(format!("cell value must be finite, got {v}"))
            }
            s => s,
        };
        self.counters += self.write_charge(state.param_count());
        self.endurance[i] += 1;
        self.cells[i] = state;
        Ok(())
    }

    /// Distribution cells read back their mean.
    pub fn read(&mut self, addr: (usize, usize)) -> Result<f64> {
        let i = self.index(addr)?;
        self.counters += self.read_charge();
        Ok(match self.cells[i] {
            CellState::Deterministic(v) => v,
            CellState::Distribution(d) => d.mean(),
        })
    }

    /// Cell contents as a distribution; deterministic cells report
    /// `PointMass`.
    pub fn read_distribution(&mut self, addr: (usize, usize)) -> Result<DistributionSpec> {
        let i = self.index(addr)?;
        let d = self.cells[i].distribution();
        let params = d.param_count();
        self.counters += CostReport {
            total_reads: 1,
            bytes_moved: params as f64 * self.bpe(),
            energy_pj: params as f64 * self.backend.read_energy_pj,
            ..Default::default()
        };
        Ok(d)
    }

    /// Cell contents without charging anything.
    pub fn peek(&self, addr: (usize, usize)) -> Result<CellState> {
        Ok(self.cells[self.index(addr)?])
    }

    pub fn sample(&mut self, addr: (usize, usize), stream: &mut EntropyStream) -> Result<f64> {
        let i = self.index(addr)?;
        Ok(self.sample_at(i, stream))
    }

    fn sample_at(&mut self, i: usize, stream: &mut EntropyStream) -> f64 {
        let d = self.cells[i].distribution();
        if d.is_deterministic() {
            self.counters += self.read_charge();
            return d.mean();
        }
        let value = match d {
            DistributionSpec::Gaussian { mu, sigma } => {
                reparameterize(mu, sigma, stream.next_eps()).expect("sigma validated on write")
            }
            DistributionSpec::Bernoulli { p } => f64::from(
                bernoulli_from_uniform(stream.next_uniform(), p).expect("p validated on write"),
            ),
            DistributionSpec::PointMass { mu } => mu,
        };
        let shaping = match d {
            DistributionSpec::Gaussian { .. } => u64::from(stream.shaping_ops()),
            _ => 1,
        };
        let charge = self.sample_charge(i, d.param_count(), shaping);
        self.counters += charge;
        value
    }

    fn sample_charge(&mut self, i: usize, params: u64, shaping_ops: u64) -> CostReport {
        let (c, wears) = sample_charge(&self.backend, self.bpe(), params, shaping_ops);
        if wears {
            self.endurance[i] += 1;
        }
        c
    }

    /// Achievable sigma window for a coupled cell with mean `mu`.
    pub fn coupled_sigma_range(&self, mu: f64) -> Option<(f64, f64)> {
        match self.backend.kind {
            BackendKind::CoupledPcim {
                sigma0,
                gamma,
                sigma_min_frac,
                sigma_max_frac,
                ..
            } => {
                let dev = sigma0 * (1.0 + gamma * mu.abs());
                Some((sigma_min_frac * dev, sigma_max_frac * dev))
            }
            _ => None,
        }
    }

    /// Retunes a Gaussian cell. Coupled backends only accept sigmas inside
    /// the device window and report it on rejection.
    pub fn set_variance(&mut self, addr: (usize, usize), sigma_new: f64) -> Result<()> {
        let i = self.index(addr)?;
        let mu = match self.cells[i] {
            CellState::Distribution(DistributionSpec::Gaussian { mu, .. })
            | CellState::Distribution(DistributionSpec::PointMass { mu }) => mu,
            other => {
                return Err(Error::Type(format!(
                    "set_variance needs a Gaussian cell, found {other:?}"
                )))
            }
        };
        if !(sigma_new >= 0.0 && sigma_new.is_finite()) {
            return domain(format!("sigma must be finite and >= 0, got {sigma_new}"));
        }
        if let Some((lo, hi)) = self.coupled_sigma_range(mu) {
            if !(lo..=hi).contains(&sigma_new) {
                return Err(Error::Programmability {
                    requested: sigma_new,
                    lo,
                    hi,
                });
            }
        }
        self.counters += self.write_charge(1);
        self.endurance[i] += 1;
        self.cells[i] = CellState::gaussian(mu, sigma_new)?;
        Ok(())
    }

    pub fn effective_parallelism(&self) -> u64 {
        match self.backend.kind {
            BackendKind::VonNeumann { .. } | BackendKind::DecoupledNearMemory { .. } => 1,
            BackendKind::CoupledPcim { .. } => self.cols as u64,
            BackendKind::DecoupledInMemory { parallelism, .. } => u64::from(parallelism),
        }
    }

    /// Samples every address in order, returning the values and the model
    /// cycles `ceil(n / parallelism) * latency`. Nothing is charged if any
    /// address is out of bounds.
    pub fn batch_sample(
        &mut self,
        addrs: &[(usize, usize)],
        stream: &mut EntropyStream,
    ) -> Result<(Vec<f64>, u64)> {
        let idx = addrs
            .iter()
            .map(|&a| self.index(a))
            .collect::<Result<Vec<_>>>()?;
        let values = idx.into_iter().map(|i| self.sample_at(i, stream)).collect();
        let n = addrs.len() as u64;
        let cycles = n.div_ceil(self.effective_parallelism()) * self.backend.latency_cycles;
        Ok((values, cycles))
    }

    pub fn cost_report(&self) -> CostReport {
        self.counters
    }

    pub fn endurance(&self, addr: (usize, usize)) -> Result<u64> {
        Ok(self.endurance[self.index(addr)?])
    }

    /// Writes the cell table as CSV.
    pub fn store_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut out = out;
        writeln!(out, "# entropy-roofline v1.0 schema=cells")?;
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(["addr_row", "addr_col", "family", "mu", "sigma_or_p"])
            .map_err(io)?;
        for (i, cell) in self.cells.iter().enumerate() {
            let (family, mu, extra) = match *cell {
                CellState::Deterministic(v) => ("deterministic", v, String::new()),
                CellState::Distribution(DistributionSpec::PointMass { mu }) => {
                    ("point_mass", mu, String::new())
                }
                CellState::Distribution(DistributionSpec::Gaussian { mu, sigma }) => {
                    ("gaussian", mu, sigma.to_string())
                }
                CellState::Distribution(DistributionSpec::Bernoulli { p }) => {
                    ("bernoulli", p, p.to_string())
                }
            };
            w.write_record([
                (i / self.cols).to_string(),
                (i % self.cols).to_string(),
                family.to_string(),
                mu.to_string(),
                extra,
            ])
            .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Loads cells from CSV without charging costs. Cells not listed keep
    /// their current state.
    pub fn load_csv<R: Read>(&mut self, input: R) -> Result<()> {
        let mut r = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(input);
        let headers = r.headers().map_err(|e| Error::Io(e.to_string()))?.clone();
        if headers.iter().collect::<Vec<_>>() != ["addr_row", "addr_col", "family", "mu", "sigma_or_p"]
        {
            return Err(Error::Parse {
                line: 1,
                message: format!("unexpected header {:?}", headers),
            });
        }
        for rec in r.records() {
            let rec = rec.map_err(|e| Error::Parse {
                line: e.position().map_or(0, |p| p.line() as usize),
                message: e.to_string(),
            })?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            let bad = |message: String| Error::Parse { line, message };
            let num = |s: &str, what: &str| {
                s.parse::<f64>()
                    .map_err(|_| bad(format!("invalid {what} '{s}'")))
            };
            let row: usize = rec[0].parse().map_err(|_| bad(format!("invalid row '{}'", &rec[0])))?;
            let col: usize = rec[1].parse().map_err(|_| bad(format!("invalid col '{}'", &rec[1])))?;
            let mu = num(&rec[3], "mu")?;
            let state = match &rec[2] {
                "deterministic" => CellState::Deterministic(mu),
                "point_mass" => CellState::Distribution(DistributionSpec::point_mass(mu)),
                "gaussian" => CellState::gaussian(mu, num(&rec[4], "sigma")?)
                    .map_err(|e| bad(e.to_string()))?,
                "bernoulli" => CellState::Distribution(
                    DistributionSpec::bernoulli(num(&rec[4], "p")?).map_err(|e| bad(e.to_string()))?,
                ),
                other => return Err(bad(format!("unknown family '{other}'"))),
            };
            let i = self.index((row, col)).map_err(|e| bad(e.to_string()))?;
            self.cells[i] = state;
        }
        Ok(())
    }
}
