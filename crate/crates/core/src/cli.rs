//! The `entropy-roofline` command-line tool.
//!
//! Exit codes: 0 success, 2 flag or argument error, 3 config, grid or trace
//! validation error, 4 I/O error.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::ConfigDocument;
use crate::distribution_shaping::{ShapingMethod, TargetFamily};
use crate::error::Error;
use crate::fidelity::{fidelity_report, PipelineStream, TargetSpec};
use crate::perf_model::roofline_curve;
use crate::probabilistic_memory::{BackendConfig, BackendKind};
use crate::simulator::{self, Mode, SweepGrid};
use crate::workload::{
    bnn_trace, conv_trace, load_trace, mc_trace, parse_workload, write_trace, WorkloadSpec,
};

pub const SEED_ENV: &str = "ENTROPY_ROOFLINE_SEED";
pub const ROOFLINE_HEADER_COMMENT: &str = "# entropy-roofline v1.0 schema=roofline";

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "entropy-roofline", version, about = "Entropy-aware roofline model and probabilistic-memory simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate attainable throughput over alpha and arithmetic intensity.
    Roofline(RooflineArgs),
    /// Run one workload through the simulator and write a JSON result.
    Simulate(SimulateArgs),
    /// Measure the statistics of the configured sampling pipeline.
    Fidelity(FidelityArgs),
    /// Write an access trace for a generator workload.
    GenTrace(GenTraceArgs),
    /// Run the simulator over a parameter grid and write a CSV table.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct RooflineArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated stochastic access fractions.
    #[arg(long, value_delimiter = ',', default_value = "0,0.01,0.1,1")]
    pub alpha: Vec<f64>,
    #[arg(long, default_value_t = 0.1)]
    pub ai_min: f64,
    #[arg(long, default_value_t = 1000.0)]
    pub ai_max: f64,
    #[arg(long, default_value_t = 50)]
    pub points: usize,
    /// Compute throughput, operations/second.
    #[arg(long)]
    pub pi: Option<f64>,
    /// Deterministic access rate, elements/second.
    #[arg(long)]
    pub beta_data: Option<f64>,
    /// Sampling rate, samples/second.
    #[arg(long)]
    pub beta_rand: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// `bnn`, `conv`, `mc` or a shaped form such as `bnn:128,128,1`,
    /// `conv:64,64,3,32,32,1,stochastic`, `mc:1000000,4`.
    #[arg(long, conflicts_with = "trace")]
    pub workload: Option<String>,
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// von-neumann, coupled, near-memory or in-memory.
    #[arg(long)]
    pub backend: Option<String>,
    /// serialized or overlapped.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FidelityArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 100_000)]
    pub samples: u64,
    /// `normal`, `normal:MU,SIGMA`, `uniform:LO,HI` or `bernoulli:P`;
    /// defaults to the pipeline's own target.
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum TraceKind {
    Bnn,
    Conv,
    Mc,
}

#[derive(Debug, Args)]
pub struct GenTraceArgs {
    #[arg(long, value_enum)]
    pub workload: TraceKind,
    #[arg(long, default_value_t = 128)]
    pub n_in: u64,
    #[arg(long, default_value_t = 128)]
    pub n_out: u64,
    #[arg(long, default_value_t = 1)]
    pub batch: u64,
    #[arg(long, default_value_t = 64)]
    pub c_in: u64,
    #[arg(long, default_value_t = 64)]
    pub c_out: u64,
    #[arg(long, default_value_t = 3)]
    pub k: u64,
    #[arg(long, default_value_t = 32)]
    pub h: u64,
    #[arg(long, default_value_t = 32)]
    pub w: u64,
    /// Sample conv weights once per batch element.
    #[arg(long)]
    pub stochastic: bool,
    #[arg(long, default_value_t = 1_000_000)]
    pub n_samples: u64,
    #[arg(long, default_value_t = 4)]
    pub ops_per_sample: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub grid: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(message: impl Into<String>) -> CliError {
    CliError {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

/// Exit code for a library error raised while handling validated flags.
fn from_error(e: Error) -> CliError {
    let code = match e {
        Error::Io(_) => EXIT_IO,
        _ => EXIT_CONFIG,
    };
    CliError {
        code,
        message: e.to_string(),
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Diagnostics go to stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("entropy-roofline: {}", e.message);
            e.code
        }
    }
}

pub fn execute(command: &Command) -> CliResult<()> {
    match command {
        Command::Roofline(a) => cmd_roofline(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Fidelity(a) => cmd_fidelity(a),
        Command::GenTrace(a) => cmd_gen_trace(a),
        Command::Sweep(a) => cmd_sweep(a),
    }
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    let io = |e: std::io::Error, what: &str| CliError {
        code: EXIT_IO,
        message: format!("{what}: {e}"),
    };
    match out {
        Some(p) => std::fs::write(p, bytes).map_err(|e| io(e, &p.display().to_string())),
        None => {
            let mut s = std::io::stdout().lock();
            s.write_all(bytes).and_then(|_| s.flush()).map_err(|e| io(e, "stdout"))
        }
    }
}

fn load_config(path: Option<&Path>) -> CliResult<ConfigDocument> {
    match path {
        Some(p) => ConfigDocument::load(p).map_err(from_error),
        None => Ok(ConfigDocument::default()),
    }
}

/// Flag, then environment, then config file.
fn resolve_seed(flag: Option<u64>, config: u64) -> CliResult<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| usage(format!("{SEED_ENV}: expected an unsigned integer, got '{v}'"))),
        Err(_) => Ok(config),
    }
}

fn cmd_roofline(a: &RooflineArgs) -> CliResult<()> {
    let doc = load_config(a.config.as_deref())?;
    let mut arch = doc.arch;
    for (flag, value, slot) in [
        ("--pi", a.pi, &mut arch.pi),
        ("--beta-data", a.beta_data, &mut arch.beta_data),
        ("--beta-rand", a.beta_rand, &mut arch.beta_rand),
    ] {
        if let Some(v) = value {
            if !(v.is_finite() && v > 0.0) {
                return Err(usage(format!("{flag}: must be positive and finite, got {v}")));
            }
            *slot = v;
        }
    }
    if a.alpha.is_empty() {
        return Err(usage("--alpha: needs at least one value"));
    }
    if let Some(bad) = a.alpha.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(usage(format!("--alpha: value {bad} outside [0, 1]")));
    }
    if !(a.ai_min.is_finite() && a.ai_min > 0.0) {
        return Err(usage(format!("--ai-min: must be positive, got {}", a.ai_min)));
    }
    if !(a.ai_max.is_finite() && a.ai_max > a.ai_min) {
        return Err(usage(format!("--ai-max: must exceed --ai-min, got {}", a.ai_max)));
    }
    if a.points < 2 {
        return Err(usage(format!("--points: must be >= 2, got {}", a.points)));
    }

    let mut text = String::new();
    text.push_str(ROOFLINE_HEADER_COMMENT);
    text.push('\n');
    text.push_str("alpha,ai,beta_eff,phi,regime\n");
    for &alpha in &a.alpha {
        let curve = roofline_curve(&arch, alpha, a.ai_min, a.ai_max, a.points).map_err(|e| usage(e.to_string()))?;
        for p in curve {
            text.push_str(&format!("{},{},{},{},{}\n", p.alpha, p.ai, p.beta_eff, p.phi, p.regime));
        }
    }
    emit(a.out.as_deref(), text.as_bytes())
}

fn backend_from_flag(name: &str, base: &BackendConfig) -> CliResult<BackendConfig> {
    let kind = BackendKind::from_name(name).ok_or_else(|| {
        usage(format!(
            "--backend: unknown backend '{name}' (von-neumann, coupled, near-memory, in-memory)"
        ))
    })?;
    // Keep a configured backend's parameters when the flag names the same kind.
    if kind.name() == base.kind.name() {
        Ok(*base)
    } else {
        Ok(BackendConfig { kind, ..*base })
    }
}

fn cmd_simulate(a: &SimulateArgs) -> CliResult<()> {
    let doc = load_config(a.config.as_deref())?;
    let mut config = doc.sim_config();
    if let Some(b) = &a.backend {
        config.backend = backend_from_flag(b, &config.backend)?;
    }
    if let Some(m) = &a.mode {
        config.mode = Mode::from_name(m)
            .ok_or_else(|| usage(format!("--mode: expected serialized or overlapped, got '{m}'")))?;
    }
    config.seed = resolve_seed(a.seed, doc.seed)?;
    let workload: WorkloadSpec = match (&a.workload, &a.trace) {
        (Some(w), None) => parse_workload(w).map_err(|e| usage(format!("--workload: {e}")))?,
        (None, Some(path)) => {
            let (_, spec) = load_trace(path).map_err(from_error)?;
            spec
        }
        _ => return Err(usage("one of --workload or --trace is required")),
    };
    let result = simulator::run(&workload, &config).map_err(from_error)?;
    let mut json = serde_json::to_string_pretty(&result).expect("SimResult serializes");
    json.push('\n');
    emit(a.out.as_deref(), json.as_bytes())
}

fn parse_target(text: &str) -> CliResult<TargetSpec> {
    let bad = || usage(format!("--target: cannot parse '{text}'"));
    let (kind, args) = text.split_once(':').unwrap_or((text, ""));
    let nums: Vec<f64> = if args.is_empty() {
        Vec::new()
    } else {
        args.split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<CliResult<_>>()?
    };
    let target = match (kind, nums.as_slice()) {
        ("normal", []) => TargetSpec::standard_normal(),
        ("normal", &[mu, sigma]) => TargetSpec::Normal { mu, sigma },
        ("uniform", []) => TargetSpec::Uniform { lo: 0.0, hi: 1.0 },
        ("uniform", &[lo, hi]) => TargetSpec::Uniform { lo, hi },
        ("bernoulli", &[p]) => TargetSpec::Bernoulli { p },
        _ => return Err(bad()),
    };
    target.validate().map_err(|e| usage(format!("--target: {e}")))?;
    Ok(target)
}

/// The distribution a pipeline is built to produce.
fn pipeline_target(method: &ShapingMethod) -> TargetSpec {
    match *method {
        ShapingMethod::InverseCdfTable {
            family: TargetFamily::Uniform { lo, hi },
            ..
        } => TargetSpec::Uniform { lo, hi },
        ShapingMethod::BernoulliThreshold { p } => TargetSpec::Bernoulli { p },
        _ => TargetSpec::standard_normal(),
    }
}

fn cmd_fidelity(a: &FidelityArgs) -> CliResult<()> {
    const MIN: u64 = 1_000;
    const MAX: u64 = 100_000_000;
    if !(MIN..=MAX).contains(&a.samples) {
        return Err(usage(format!(
            "--samples: must lie in [{MIN}, {MAX}], got {}",
            a.samples
        )));
    }
    let target = a.target.as_deref().map(parse_target).transpose()?;
    let doc = load_config(a.config.as_deref())?;
    let seed = resolve_seed(a.seed, doc.seed)?;
    let target = target.unwrap_or_else(|| pipeline_target(&doc.shaping.method));
    let mut stream = PipelineStream::new(&doc.shaping, doc.nonideality, seed, 0).map_err(from_error)?;
    let fidelity = crate::fidelity::FidelityConfig {
        min_samples: MIN as usize,
        max_samples: MAX as usize,
        ..doc.fidelity
    };
    let report = fidelity_report(&mut stream, a.samples as usize, target, &fidelity).map_err(from_error)?;
    let mut json = serde_json::to_string_pretty(&report).expect("FidelityReport serializes");
    json.push('\n');
    emit(a.out.as_deref(), json.as_bytes())
}

fn cmd_gen_trace(a: &GenTraceArgs) -> CliResult<()> {
    let records = match a.workload {
        TraceKind::Bnn => bnn_trace(a.n_in, a.n_out, a.batch),
        TraceKind::Conv => conv_trace(a.c_in, a.c_out, a.k, a.h, a.w, a.batch, a.stochastic),
        TraceKind::Mc => mc_trace(a.n_samples, a.ops_per_sample),
    }
    .map_err(|e| usage(e.to_string()))?;
    let mut buf = Vec::new();
    write_trace(&mut buf, &records).map_err(from_error)?;
    emit(a.out.as_deref(), &buf)
}

fn cmd_sweep(a: &SweepArgs) -> CliResult<()> {
    if a.jobs == 0 {
        return Err(usage("--jobs: must be >= 1"));
    }
    let doc = load_config(a.config.as_deref())?;
    let grid = SweepGrid::load(&a.grid).map_err(|e| match e {
        Error::Config(m) => from_error(Error::Config(format!("grid {m}"))),
        other => from_error(other),
    })?;
    let mut base = doc.sim_config();
    base.seed = resolve_seed(None, doc.seed)?;
    let rows = simulator::sweep(&base, &grid, a.jobs).map_err(from_error)?;
    let mut buf = Vec::new();
    simulator::write_sweep_csv(&mut buf, &rows).map_err(from_error)?;
    emit(a.out.as_deref(), &buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perf_model::ArchParams;

    #[test]
    fn targets_parse() {
        assert_eq!(parse_target("normal").unwrap(), TargetSpec::standard_normal());
        assert_eq!(
            parse_target("uniform:-1,1").unwrap(),
            TargetSpec::Uniform { lo: -1.0, hi: 1.0 }
        );
        assert_eq!(parse_target("bernoulli:0.3").unwrap(), TargetSpec::Bernoulli { p: 0.3 });
        assert_eq!(parse_target("bernoulli").unwrap_err().code, EXIT_USAGE);
        assert_eq!(parse_target("normal:0,-1").unwrap_err().code, EXIT_USAGE);
    }

    #[test]
    fn backend_flag_keeps_matching_config() {
        let base = BackendConfig::new(BackendKind::in_memory(8));
        assert_eq!(backend_from_flag("in-memory", &base).unwrap(), base);
        let vn = backend_from_flag("vn", &base).unwrap();
        assert_eq!(vn.kind, BackendKind::von_neumann());
        assert_eq!(backend_from_flag("quantum", &base).unwrap_err().code, EXIT_USAGE);
    }

    #[test]
    fn flag_errors_exit_two() {
        assert_eq!(main_with_args(["entropy-roofline", "roofline", "--alpha", "1.5"]), EXIT_USAGE);
        assert_eq!(main_with_args(["entropy-roofline", "fidelity", "--samples", "10"]), EXIT_USAGE);
        assert_eq!(main_with_args(["entropy-roofline", "bogus"]), EXIT_USAGE);
    }

    #[test]
    fn arch_default_matches_library() {
        assert_eq!(ConfigDocument::default().arch, ArchParams::default());
    }
}
