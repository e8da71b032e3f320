//! Rate-based execution of workloads against an architecture and a memory
//! backend.
//!
//! Every resource is a fluid server: time spent on a stream is its count
//! divided by its rate. `Serialized` mode adds the deterministic and
//! stochastic access times, which is exactly the harmonic composition used by
//! [`crate::perf_model`]. `Overlapped` mode lets each resource run
//! concurrently and takes the slowest one; it is an extension of the
//! closed-form model, not a reproduction of it.
//!
//! Sample transport that shares the data bus (von Neumann transport bytes,
//! near-memory writeback) caps the effective sampling rate at
//! `beta_data / transport_elements` in the serialized view and adds to the
//! bus demand in the overlapped view.

use serde::{Deserialize, Serialize};

use crate::distribution_shaping::ShapingPipelineSpec;
use crate::error::{domain, Error, Result};
use crate::perf_model::{classify_regime, regime_from_terms, ArchParams, RegimeLabel};
use crate::probabilistic_memory::{sample_charge, BackendConfig, BackendKind, CostReport};
use crate::workload::{parse_workload, WorkloadSpec};

/// How access streams share time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Deterministic and stochastic accesses take turns.
    #[default]
    Serialized,
    /// Compute, bus and entropy generation proceed concurrently.
    Overlapped,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Serialized => "serialized",
            Mode::Overlapped => "overlapped",
        }
    }

    pub fn from_name(name: &str) -> Option<Mode> {
        match name {
            "serialized" => Some(Mode::Serialized),
            "overlapped" => Some(Mode::Overlapped),
            _ => None,
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct SimConfig {
    pub arch: ArchParams,
    pub backend: BackendConfig,
    pub mode: Mode,
    pub shaping: ShapingPipelineSpec,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(arch: ArchParams, backend: BackendConfig, mode: Mode) -> Self {
        SimConfig {
            arch,
            backend,
            mode,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.arch.validate()?;
        self.backend.validate()?;
        self.shaping.validate()
    }

    /// Shaping operations charged to compute per sample. Only the von Neumann
    /// path shapes in the processor; the other backends deliver shaped
    /// samples from the array or its periphery.
    fn shaping_ops(&self) -> u64 {
        match self.backend.kind {
            BackendKind::VonNeumann { .. } => u64::from(self.shaping.ops_per_sample()),
            _ => 0,
        }
    }

    /// Elements of bus traffic added by each sample.
    fn transport_elements(&self) -> f64 {
        let bpe = f64::from(self.arch.bytes_per_element);
        match self.backend.kind {
            BackendKind::VonNeumann {
                transport_bytes_per_sample: b,
                ..
            }
            | BackendKind::DecoupledNearMemory {
                writeback_bytes_per_sample: b,
                ..
            } => b / bpe,
            _ => 0.0,
        }
    }

    /// Raw generator rate before bus sharing.
    fn generator_rate(&self) -> f64 {
        let inherit = |r: Option<f64>| r.unwrap_or(self.arch.beta_rand);
        match self.backend.kind {
            BackendKind::VonNeumann { rng_rate, .. }
            | BackendKind::DecoupledNearMemory { rng_rate, .. } => inherit(rng_rate),
            BackendKind::CoupledPcim { .. } => self.arch.beta_data,
            BackendKind::DecoupledInMemory {
                rng_rate,
                parallelism,
            } => f64::from(parallelism) * inherit(rng_rate),
        }
    }

    /// Samples per second the bus could carry if it moved nothing else.
    fn transport_rate(&self) -> Option<f64> {
        let e = self.transport_elements();
        (e > 0.0).then(|| self.arch.beta_data / e)
    }
}

/// `(beta_data_eff, beta_rand_eff)` seen by the serialized model.
pub fn backend_effective_rates(config: &SimConfig) -> (f64, f64) {
    let gen = config.generator_rate();
    let br = match config.transport_rate() {
        Some(t) => gen.min(t),
        None => gen,
    };
    (config.arch.beta_data, br)
}

/// The architecture the closed-form model should be evaluated on to predict
/// a serialized run.
pub fn analytic_arch(config: &SimConfig) -> ArchParams {
    let (bd, br) = backend_effective_rates(config);
    ArchParams {
        beta_data: bd,
        beta_rand: br,
        ..config.arch
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub workload: String,
    pub backend: String,
    pub mode: Mode,
    pub seed: u64,
    pub n_ops: u64,
    pub det_accesses: u64,
    pub stoch_accesses: u64,
    pub alpha: f64,
    pub ai: f64,
    pub beta_data_eff: f64,
    pub beta_rand_eff: f64,
    /// Model seconds.
    pub elapsed_time: f64,
    /// Workload operations per second.
    pub achieved_phi: f64,
    /// Element accesses per second.
    pub achieved_beta: f64,
    pub regime_observed: RegimeLabel,
    pub cost: CostReport,
}

/// Counters the workload would accumulate on the configured memory.
fn workload_cost(workload: &WorkloadSpec, config: &SimConfig) -> CostReport {
    let backend = &config.backend;
    let bpe = f64::from(config.arch.bytes_per_element);
    let read = CostReport {
        total_reads: 1,
        bytes_moved: bpe,
        energy_pj: backend.read_energy_pj,
        ..Default::default()
    };
    // Stochastic accesses sample Gaussian cells: mean and spread.
    let (sample, _) = sample_charge(backend, bpe, 2, config.shaping_ops());
    read.times(workload.det_accesses) + sample.times(workload.stoch_accesses)
}

/// Executes one workload. Pure: identical inputs give identical results.
pub fn run(workload: &WorkloadSpec, config: &SimConfig) -> Result<SimResult> {
    config.validate()?;
    let total = workload.total_accesses();
    if total == 0 {
        return Err(Error::Degenerate(format!(
            "workload '{}' has no memory accesses",
            workload.name
        )));
    }
    let det = workload.det_accesses as f64;
    let stoch = workload.stoch_accesses as f64;
    let ops = workload.n_ops as f64 + stoch * config.shaping_ops() as f64;
    let alpha = stoch / total as f64;
    let ai = workload.n_ops as f64 / total as f64;

    let pi = config.arch.pi;
    let (bd, br) = backend_effective_rates(config);
    let t_compute = ops / pi;
    let (elapsed, regime) = match config.mode {
        Mode::Serialized => {
            let t_access = det / bd + stoch / br;
            let arch = analytic_arch(config);
            // Shaping work raises the effective intensity seen by the roofline.
            let regime = classify_regime(ops / total as f64, alpha, &arch)?;
            (t_compute.max(t_access), regime)
        }
        Mode::Overlapped => {
            // Same transport term as the serialized rate cap, so overlapping
            // can never come out slower.
            let t_data = det / bd
                + match config.transport_rate() {
                    Some(t) => stoch / t,
                    None => 0.0,
                };
            let t_rand = stoch / config.generator_rate();
            let t_access = t_data.max(t_rand);
            let regime = regime_from_terms(t_compute >= t_access, t_rand, t_data);
            (t_compute.max(t_access), regime)
        }
    };

    Ok(SimResult {
        workload: workload.name.clone(),
        backend: config.backend.kind.name().to_string(),
        mode: config.mode,
        seed: config.seed,
        n_ops: workload.n_ops,
        det_accesses: workload.det_accesses,
        stoch_accesses: workload.stoch_accesses,
        alpha,
        ai,
        beta_data_eff: bd,
        beta_rand_eff: br,
        elapsed_time: elapsed,
        achieved_phi: workload.n_ops as f64 / elapsed,
        achieved_beta: total as f64 / elapsed,
        regime_observed: regime,
        cost: workload_cost(workload, config),
    })
}

fn default_total_accesses() -> u64 {
    1_000_000
}

/// A backend given either by short name or by full configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BackendEntry {
    Name(String),
    Config(BackendConfig),
}

impl BackendEntry {
    pub fn resolve(&self) -> Result<BackendConfig> {
        match self {
            BackendEntry::Name(n) => BackendKind::from_name(n)
                .map(BackendConfig::new)
                .ok_or_else(|| Error::Config(format!("backend: unknown backend name '{n}'"))),
            BackendEntry::Config(c) => Ok(*c),
        }
    }
}

/// Value lists to sweep. Absent dimensions take the base configuration's
/// value; a dimension that is present must be nonempty.
///
/// When `alpha` or `ai` is given, each point runs a synthetic workload with
/// `total_accesses` accesses; the missing one of the pair is taken from
/// `workload`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    #[serde(default)]
    pub workload: Option<String>,
    #[serde(default)]
    pub alpha: Option<Vec<f64>>,
    #[serde(default)]
    pub ai: Option<Vec<f64>>,
    #[serde(default)]
    pub beta_rand: Option<Vec<f64>>,
    #[serde(default)]
    pub backend: Option<Vec<BackendEntry>>,
    #[serde(default)]
    pub mode: Option<Vec<Mode>>,
    #[serde(default = "default_total_accesses")]
    pub total_accesses: u64,
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid {
            workload: None,
            alpha: None,
            ai: None,
            beta_rand: None,
            backend: None,
            mode: None,
            total_accesses: default_total_accesses(),
        }
    }
}

/// One grid point: the full parameter tuple plus its result.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub index: usize,
    pub beta_rand: f64,
    pub result: SimResult,
}

pub const SWEEP_HEADER_COMMENT: &str = "# entropy-roofline v1.0 schema=sweep";

pub const SWEEP_COLUMNS: [&str; 18] = [
    "index",
    "workload",
    "backend",
    "mode",
    "beta_rand",
    "alpha",
    "ai",
    "n_ops",
    "det_accesses",
    "stoch_accesses",
    "beta_data_eff",
    "beta_rand_eff",
    "elapsed_time",
    "achieved_phi",
    "achieved_beta",
    "regime",
    "bytes_moved",
    "energy_pj",
];

impl SweepRow {
    pub fn fields(&self) -> Vec<String> {
        let r = &self.result;
        vec![
            self.index.to_string(),
            r.workload.clone(),
            r.backend.clone(),
            r.mode.to_string(),
            self.beta_rand.to_string(),
            r.alpha.to_string(),
            r.ai.to_string(),
            r.n_ops.to_string(),
            r.det_accesses.to_string(),
            r.stoch_accesses.to_string(),
            r.beta_data_eff.to_string(),
            r.beta_rand_eff.to_string(),
            r.elapsed_time.to_string(),
            r.achieved_phi.to_string(),
            r.achieved_beta.to_string(),
            r.regime_observed.to_string(),
            r.cost.bytes_moved.to_string(),
            r.cost.energy_pj.to_string(),
        ]
    }
}

fn dimension<T: Clone>(name: &str, values: &Option<Vec<T>>, base: T) -> Result<Vec<T>> {
    match values {
        None => Ok(vec![base]),
        Some(v) if v.is_empty() => Err(Error::Config(format!("grid dimension '{name}' is empty"))),
        Some(v) => Ok(v.clone()),
    }
}

struct Point {
    index: usize,
    workload: std::result::Result<WorkloadSpec, String>,
    config: SimConfig,
}

fn expand(base: &SimConfig, grid: &SweepGrid) -> Result<Vec<Point>> {
    let base_workload = grid
        .workload
        .as_deref()
        .map(|w| parse_workload(w).map_err(|e| Error::Config(format!("workload: {e}"))))
        .transpose()?;
    let synthetic = grid.alpha.is_some() || grid.ai.is_some();
    let (base_alpha, base_ai) = match &base_workload {
        Some(w) => (w.alpha(), w.ai()),
        None => (None, None),
    };
    if !synthetic && base_workload.is_none() {
        return Err(Error::Config("grid needs a workload or alpha/ai values".into()));
    }
    if synthetic {
        if grid.total_accesses == 0 {
            return Err(Error::Config("total_accesses must be >= 1".into()));
        }
        if grid.alpha.is_none() && base_alpha.is_none() {
            return Err(Error::Config("grid dimension 'alpha' is missing and no workload supplies it".into()));
        }
        if grid.ai.is_none() && base_ai.is_none() {
            return Err(Error::Config("grid dimension 'ai' is missing and no workload supplies it".into()));
        }
    }
    let alphas = dimension("alpha", &grid.alpha, base_alpha.unwrap_or(0.0))?;
    let ais = dimension("ai", &grid.ai, base_ai.unwrap_or(1.0))?;
    let beta_rands = dimension("beta_rand", &grid.beta_rand, base.arch.beta_rand)?;
    let modes = dimension("mode", &grid.mode, base.mode)?;
    let backends = match &grid.backend {
        None => vec![base.backend],
        Some(v) if v.is_empty() => {
            return Err(Error::Config("grid dimension 'backend' is empty".into()))
        }
        Some(v) => v.iter().map(BackendEntry::resolve).collect::<Result<_>>()?,
    };

    let mut points = Vec::new();
    for backend in &backends {
        for &mode in &modes {
            for &beta_rand in &beta_rands {
                for &alpha in &alphas {
                    for &ai in &ais {
                        let workload = if synthetic {
                            WorkloadSpec::synthetic(alpha, ai, grid.total_accesses)
                                .map_err(|e| e.to_string())
                        } else {
                            Ok(base_workload.clone().expect("checked above"))
                        };
                        let config = SimConfig {
                            arch: ArchParams {
                                beta_rand,
                                ..base.arch
                            },
                            backend: *backend,
                            mode,
                            ..base.clone()
                        };
                        points.push(Point {
                            index: points.len(),
                            workload,
                            config,
                        });
                    }
                }
            }
        }
    }
    Ok(points)
}

fn run_point(p: &Point) -> Result<SweepRow> {
    let c = &p.config;
    let name = || {
        format!(
            "grid point {} (backend={}, mode={}, beta_rand={})",
            p.index,
            c.backend.kind.name(),
            c.mode,
            c.arch.beta_rand
        )
    };
    let workload = p
        .workload
        .as_ref()
        .map_err(|e| Error::Domain(format!("{}: {e}", name())))?;
    let result = run(workload, c).map_err(|e| Error::Domain(format!("{}: {e}", name())))?;
    Ok(SweepRow {
        index: p.index,
        beta_rand: c.arch.beta_rand,
        result,
    })
}

/// Runs every grid point, `jobs` at a time. Rows come back in grid order
/// (backend, mode, beta_rand, alpha, ai; last varies fastest) whatever the
/// parallelism.
pub fn sweep(base: &SimConfig, grid: &SweepGrid, jobs: usize) -> Result<Vec<SweepRow>> {
    use rayon::prelude::*;

    if jobs == 0 {
        return domain("jobs must be >= 1");
    }
    let points = expand(base, grid)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Io(format!("cannot start worker pool: {e}")))?;
    let rows: Vec<Result<SweepRow>> = pool.install(|| points.par_iter().map(run_point).collect());
    rows.into_iter().collect()
}

/// Writes sweep rows as a versioned CSV table.
pub fn write_sweep_csv<W: std::io::Write>(out: W, rows: &[SweepRow]) -> Result<()> {
    let mut out = out;
    writeln!(out, "{SWEEP_HEADER_COMMENT}")?;
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(SWEEP_COLUMNS).map_err(csv_err)?;
    for row in rows {
        w.write_record(row.fields()).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
