//! Throughput modelling and simulation for memories that serve both
//! deterministic values and random samples.
//!
//! * [`perf_model`]: closed-form roofline with an entropy-throughput term.
//! * [`entropy_sources`], [`distribution_shaping`]: device-style noise
//!   sources and the pipelines that turn uniforms into target distributions.
//! * [`probabilistic_memory`]: a cell array with unified read/sample
//!   primitives over four backends.
//! * [`workload`], [`simulator`]: workload generators and rate-based runs.
//! * [`fidelity`]: statistical checks on sample streams.
//! * [`cli`]: the `entropy-roofline` command-line tool.

pub mod cli;
pub mod config;
pub mod distribution_shaping;
pub mod entropy_sources;
pub mod error;
pub mod fidelity;
pub mod perf_model;
pub mod probabilistic_memory;
pub mod rng;
pub mod simulator;
pub mod special;
pub mod workload;

pub use config::ConfigDocument;
pub use error::{Error, Result};
pub use perf_model::{
    bandwidth_compression, classify_regime, crossover_alpha, effective_beta, roofline_curve,
    system_throughput, ArchParams, RegimeLabel,
};
pub use probabilistic_memory::{BackendConfig, BackendKind, CellState, DistributionSpec, PMemArray};
pub use simulator::{backend_effective_rates, run, sweep, Mode, SimConfig, SimResult, SweepGrid};
pub use workload::WorkloadSpec;
