//! Workload generators and the access-trace format.
//!
//! Trace CSV:
//!
//! ```text
//! # entropy-roofline v1.0 schema=trace
//! op,row,col,count
//! compute,,,256
//! sample,0,3,1
//! ```

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

pub const TRACE_HEADER_COMMENT: &str = "# entropy-roofline v1.0 schema=trace";

/// Operation and access counts of one workload.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadSpec {
    pub name: String,
    pub n_ops: u64,
    pub det_accesses: u64,
    pub stoch_accesses: u64,
}

impl WorkloadSpec {
    pub fn new(name: impl Into<String>, n_ops: u64, det_accesses: u64, stoch_accesses: u64) -> Self {
        WorkloadSpec {
            name: name.into(),
            n_ops,
            det_accesses,
            stoch_accesses,
        }
    }

    pub fn total_accesses(&self) -> u64 {
        self.det_accesses + self.stoch_accesses
    }

    /// Stochastic fraction of all accesses; `None` without accesses.
    pub fn alpha(&self) -> Option<f64> {
        let total = self.total_accesses();
        (total > 0).then(|| self.stoch_accesses as f64 / total as f64)
    }

    /// Operations per access; `None` without accesses.
    pub fn ai(&self) -> Option<f64> {
        let total = self.total_accesses();
        (total > 0).then(|| self.n_ops as f64 / total as f64)
    }

    /// A workload with `total` accesses matching the given alpha and AI.
    /// Counts are rounded to the nearest integer.
    pub fn synthetic(alpha: f64, ai: f64, total: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return domain(format!("alpha must lie in [0, 1], got {alpha}"));
        }
        if !(ai > 0.0 && ai.is_finite()) {
            return domain(format!("ai must be positive, got {ai}"));
        }
        if total == 0 {
            return domain("synthetic workload needs total accesses >= 1");
        }
        let stoch = (alpha * total as f64).round() as u64;
        let n_ops = (ai * total as f64).round().max(1.0) as u64;
        Ok(WorkloadSpec::new(
            format!("synthetic(alpha={alpha},ai={ai})"),
            n_ops,
            total - stoch,
            stoch,
        ))
    }
}

fn check_positive(pairs: &[(&str, u64)]) -> Result<()> {
    for (name, v) in pairs {
        if *v == 0 {
            return domain(format!("{name} must be >= 1"));
        }
    }
    Ok(())
}

/// Bayesian dense layer: every weight is sampled on every use.
/// Activations are counted once each.
pub fn bnn_layer(n_in: u64, n_out: u64, batch: u64) -> Result<WorkloadSpec> {
    check_positive(&[("n_in", n_in), ("n_out", n_out), ("batch", batch)])?;
    let uses = n_in * n_out * batch;
    Ok(WorkloadSpec::new(
        format!("bnn({n_in},{n_out},{batch})"),
        2 * uses,
        (n_in + n_out) * batch,
        uses,
    ))
}

/// Convolution with full weight reuse. The stochastic variant additionally
/// samples every weight once per batch element.
pub fn conv_layer(
    c_in: u64,
    c_out: u64,
    k: u64,
    h: u64,
    w: u64,
    batch: u64,
    stochastic_weights: bool,
) -> Result<WorkloadSpec> {
    check_positive(&[
        ("c_in", c_in),
        ("c_out", c_out),
        ("k", k),
        ("h", h),
        ("w", w),
        ("batch", batch),
    ])?;
    let weights = c_in * c_out * k * k;
    let input = c_in * h * w * batch;
    let output = c_out * h * w * batch;
    let tag = if stochastic_weights { ",stochastic" } else { "" };
    Ok(WorkloadSpec::new(
        format!("conv({c_in},{c_out},{k},{h},{w},{batch}{tag})"),
        2 * weights * h * w * batch,
        weights + input + output,
        if stochastic_weights { weights * batch } else { 0 },
    ))
}

/// Monte Carlo estimator: one sample per draw, one result writeback.
pub fn mc_estimator(n_samples: u64, ops_per_sample: u64) -> Result<WorkloadSpec> {
    check_positive(&[("n_samples", n_samples), ("ops_per_sample", ops_per_sample)])?;
    Ok(WorkloadSpec::new(
        format!("mc({n_samples},{ops_per_sample})"),
        n_samples * ops_per_sample,
        1,
        n_samples,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceOp {
    Compute,
    Read,
    Write,
    Sample,
}

impl TraceOp {
    fn as_str(&self) -> &'static str {
        match self {
            TraceOp::Compute => "compute",
            TraceOp::Read => "read",
            TraceOp::Write => "write",
            TraceOp::Sample => "sample",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub op: TraceOp,
    pub addr: Option<(u64, u64)>,
    pub count: u64,
}

impl TraceRecord {
    pub fn compute(count: u64) -> Self {
        TraceRecord {
            op: TraceOp::Compute,
            addr: None,
            count,
        }
    }

    pub fn access(op: TraceOp, row: u64, col: u64, count: u64) -> Self {
        TraceRecord {
            op,
            addr: Some((row, col)),
            count,
        }
    }
}

/// Sums a record list into counts.
pub fn aggregate(name: &str, records: &[TraceRecord]) -> WorkloadSpec {
    let mut w = WorkloadSpec::new(name, 0, 0, 0);
    for r in records {
        match r.op {
            TraceOp::Compute => w.n_ops += r.count,
            TraceOp::Read | TraceOp::Write => w.det_accesses += r.count,
            TraceOp::Sample => w.stoch_accesses += r.count,
        }
    }
    w
}

pub fn write_trace<W: Write>(mut out: W, records: &[TraceRecord]) -> Result<()> {
    writeln!(out, "{TRACE_HEADER_COMMENT}")?;
    writeln!(out, "op,row,col,count")?;
    for r in records {
        match r.addr {
            Some((row, col)) => writeln!(out, "{},{row},{col},{}", r.op.as_str(), r.count)?,
            None => writeln!(out, "{},,,{}", r.op.as_str(), r.count)?,
        }
    }
    Ok(())
}

/// Parses a trace; errors carry 1-based line numbers.
pub fn parse_trace<R: BufRead>(input: R) -> Result<Vec<TraceRecord>> {
    let mut records = Vec::new();
    let mut seen_header = false;
    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |message: String| Error::Parse {
            line: line_no,
            message,
        };
        if !seen_header {
            if line != "op,row,col,count" {
                return Err(bad(format!("expected header 'op,row,col,count', got '{line}'")));
            }
            seen_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(bad(format!("expected 4 fields, got {}", fields.len())));
        }
        let op = match fields[0] {
            "compute" => TraceOp::Compute,
            "read" => TraceOp::Read,
            "write" => TraceOp::Write,
            "sample" => TraceOp::Sample,
            other => return Err(bad(format!("unknown op '{other}'"))),
        };
        let count: u64 = fields[3]
            .parse()
            .map_err(|_| bad(format!("invalid count '{}'", fields[3])))?;
        if count == 0 {
            return Err(bad("count must be >= 1".into()));
        }
        let addr = match (fields[1], fields[2]) {
            ("", "") => None,
            (r, c) => {
                let r: u64 = r.parse().map_err(|_| bad(format!("invalid row '{r}'")))?;
                let c: u64 = c.parse().map_err(|_| bad(format!("invalid col '{c}'")))?;
                Some((r, c))
            }
        };
        if op != TraceOp::Compute && addr.is_none() {
            return Err(bad(format!("{} records need an address", op.as_str())));
        }
        records.push(TraceRecord { op, addr, count });
    }
    Ok(records)
}

pub fn load_trace(path: &Path) -> Result<(Vec<TraceRecord>, WorkloadSpec)> {
    let file = std::fs::File::open(path)?;
    let records = parse_trace(std::io::BufReader::new(file))?;
    let name = path
        .file_name()
        .map_or_else(|| "trace".to_string(), |n| n.to_string_lossy().into_owned());
    let spec = aggregate(&name, &records);
    Ok((records, spec))
}

/// Trace of a BNN layer: weights at `(o, i)`, inputs on row `n_out`,
/// outputs on row `n_out + 1`.
pub fn bnn_trace(n_in: u64, n_out: u64, batch: u64) -> Result<Vec<TraceRecord>> {
    bnn_layer(n_in, n_out, batch)?;
    let mut recs = Vec::new();
    for i in 0..n_in {
        recs.push(TraceRecord::access(TraceOp::Read, n_out, i, batch));
    }
    for o in 0..n_out {
        for i in 0..n_in {
            recs.push(TraceRecord::access(TraceOp::Sample, o, i, batch));
        }
        recs.push(TraceRecord::compute(2 * n_in * batch));
        recs.push(TraceRecord::access(TraceOp::Write, n_out + 1, o, batch));
    }
    Ok(recs)
}

/// Trace of a convolution: weights at `(co, ci)` with `k*k` taps each,
/// input channels on row `c_out`, output channels on row `c_out + 1`.
pub fn conv_trace(
    c_in: u64,
    c_out: u64,
    k: u64,
    h: u64,
    w: u64,
    batch: u64,
    stochastic_weights: bool,
) -> Result<Vec<TraceRecord>> {
    conv_layer(c_in, c_out, k, h, w, batch, stochastic_weights)?;
    let mut recs = Vec::new();
    for ci in 0..c_in {
        recs.push(TraceRecord::access(TraceOp::Read, c_out, ci, h * w * batch));
    }
    for co in 0..c_out {
        for ci in 0..c_in {
            recs.push(TraceRecord::access(TraceOp::Read, co, ci, k * k));
            if stochastic_weights {
                recs.push(TraceRecord::access(TraceOp::Sample, co, ci, k * k * batch));
            }
        }
        recs.push(TraceRecord::compute(2 * c_in * k * k * h * w * batch));
        recs.push(TraceRecord::access(TraceOp::Write, c_out + 1, co, h * w * batch));
    }
    Ok(recs)
}

/// Trace of a Monte Carlo estimator: one sample and its arithmetic per draw,
/// then a single result write.
pub fn mc_trace(n_samples: u64, ops_per_sample: u64) -> Result<Vec<TraceRecord>> {
    mc_estimator(n_samples, ops_per_sample)?;
    let mut recs = Vec::with_capacity(2 * n_samples as usize + 1);
    for s in 0..n_samples {
        recs.push(TraceRecord::access(TraceOp::Sample, 0, s, 1));
        recs.push(TraceRecord::compute(ops_per_sample));
    }
    recs.push(TraceRecord::access(TraceOp::Write, 1, 0, 1));
    Ok(recs)
}

/// Parses `bnn:N_IN,N_OUT,BATCH`, `conv:C_IN,C_OUT,K,H,W,BATCH[,stochastic]`
/// or `mc:N_SAMPLES,OPS_PER_SAMPLE`. A bare kind uses the reference shape:
/// `bnn:128,128,1`, `conv:64,64,3,32,32,1` or `mc:1000000,4`.
pub fn parse_workload(text: &str) -> Result<WorkloadSpec> {
    match text {
        "bnn" => return bnn_layer(128, 128, 1),
        "conv" => return conv_layer(64, 64, 3, 32, 32, 1, false),
        "mc" => return mc_estimator(1_000_000, 4),
        _ => {}
    }
    let (kind, args) = text
        .split_once(':')
        .ok_or_else(|| Error::Domain(format!("workload '{text}' must look like kind:args")))?;
    let parts: Vec<&str> = args.split(',').map(str::trim).collect();
    let stochastic = kind == "conv" && parts.last() == Some(&"stochastic");
    let numeric = if stochastic { &parts[..parts.len() - 1] } else { &parts[..] };
    let nums = numeric
        .iter()
        .map(|p| {
            p.parse::<u64>()
                .map_err(|_| Error::Domain(format!("invalid workload argument '{p}' in '{text}'")))
        })
        .collect::<Result<Vec<u64>>>()?;
    match (kind, nums.as_slice()) {
        ("bnn", &[n_in, n_out, batch]) => bnn_layer(n_in, n_out, batch),
        ("conv", &[c_in, c_out, k, h, w, batch]) => conv_layer(c_in, c_out, k, h, w, batch, stochastic),
        ("mc", &[n, ops]) => mc_estimator(n, ops),
        _ => domain(format!("unrecognised workload '{text}'")),
    }
}
