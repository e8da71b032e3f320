//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.

use std::process::Command;
use std::time::{Duration, Instant};

use entropy_roofline::distribution_shaping::ShapingPipelineSpec;
use entropy_roofline::entropy_sources::{
    mismatch_array, pelgrom_sigma, NonidealitySpec, SourceKind, SourceSpec,
};
use entropy_roofline::fidelity::{autocorrelation, ks_critical_value, ks_test, moments, PipelineStream, SampleStream};
use entropy_roofline::perf_model::{
    bandwidth_compression, crossover_alpha, effective_beta, system_throughput, ArchParams, RegimeLabel,
};
use entropy_roofline::probabilistic_memory::{
    BackendConfig, BackendKind, CellState, DistributionSpec, EntropyStream, PMemArray,
};
use entropy_roofline::rng::{CounterRng, UniformSource};
use entropy_roofline::simulator::{analytic_arch, run, Mode, SimConfig};
use entropy_roofline::special::normal_cdf;
use entropy_roofline::workload::{bnn_layer, conv_layer, mc_estimator};
use entropy_roofline::Error;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

/// Log-uniform draw in `[lo, hi)`.
fn log_uniform(rng: &mut CounterRng, lo: f64, hi: f64) -> f64 {
    (lo.ln() + rng.next_uniform() * (hi.ln() - lo.ln())).exp()
}

fn endpoints() -> Outcome {
    let mut rng = CounterRng::new(1, 0);
    let mut worst: f64 = 0.0;
    for i in 0..10_000 {
        let arch = if i == 0 {
            ArchParams::default()
        } else {
            let bd = log_uniform(&mut rng, 1e6, 1e13);
            let br = log_uniform(&mut rng, 1e6, 1e13);
            ArchParams::new(1e13, bd, br).unwrap()
        };
        let e0 = rel(effective_beta(0.0, &arch).unwrap(), arch.beta_data);
        let e1 = rel(effective_beta(1.0, &arch).unwrap(), arch.beta_rand);
        worst = worst.max(e0).max(e1);
    }
    check(worst <= 1e-12, || format!("max relative error {worst:e}"))?;
    Ok(format!("10000 architectures, max relative error {worst:e}"))
}

fn entropy_wall() -> Outcome {
    let gap = |g: f64| ArchParams::new(1e13, g, 1.0).unwrap();
    let wall = bandwidth_compression(0.01, &gap(1e4)).unwrap();
    // 1 / (0.01 / 1 + 0.99 / 1e4) against 1e4 gives 0.01 * 1e4 + 0.99.
    check(rel(wall, 100.99) <= 1e-9, || format!("gap 1e4 compression {wall}"))?;
    check(wall > 100.0, || "compression not above 100x".into())?;
    let half = bandwidth_compression(0.01, &gap(100.0)).unwrap();
    check(rel(half, 1.99) <= 1e-9, || format!("gap 100 compression {half}"))?;
    Ok(format!("gap 1e4: {wall:.6}x, gap 100: {half:.6}x"))
}

fn monotonicity() -> Outcome {
    let mut rng = CounterRng::new(3, 0);
    let draws = 5000;
    for _ in 0..draws {
        let bd = log_uniform(&mut rng, 1e6, 1e13);
        let br = bd / log_uniform(&mut rng, 1.0001, 1e6);
        let arch = ArchParams::new(1e13, bd, br).unwrap();
        let a = rng.next_uniform();
        let b = a + (1.0 - a) * rng.next_open_uniform();
        let (fa, fb) = (effective_beta(a, &arch).unwrap(), effective_beta(b, &arch).unwrap());
        check(b > a && fb < fa, || format!("not decreasing at ({a}, {b}) for {arch:?}"))?;
        for f in [fa, fb] {
            check(f >= br && f <= bd, || format!("{f} outside [{br}, {bd}]"))?;
        }
    }
    Ok(format!("{draws} random draws"))
}

fn bisect(ai: f64, arch: &ArchParams) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > 1e-15 {
        let mid = 0.5 * (lo + hi);
        if system_throughput(ai, mid, arch).unwrap() >= arch.pi {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn crossover() -> Outcome {
    let mut rng = CounterRng::new(4, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let bd = log_uniform(&mut rng, 1e8, 1e12);
        let br = bd / log_uniform(&mut rng, 2.0, 1e5);
        let ai = log_uniform(&mut rng, 0.1, 1e3);
        let target = 0.01 + 0.98 * rng.next_uniform();
        let probe = ArchParams::new(1.0, bd, br).unwrap();
        let pi = ai * effective_beta(target, &probe).unwrap();
        let arch = ArchParams::new(pi, bd, br).unwrap();
        let star = crossover_alpha(ai, &arch).unwrap().ok_or("no crossover returned")?;
        worst = worst.max((star - bisect(ai, &arch)).abs());
    }
    check(worst <= 1e-9, || format!("max |analytic - bisection| {worst:e}"))?;
    Ok(format!("200 configs, max deviation {worst:e}"))
}

fn simulator_agreement() -> Outcome {
    let workloads = [
        bnn_layer(128, 128, 1).unwrap(),
        conv_layer(64, 64, 3, 32, 32, 1, false).unwrap(),
        conv_layer(64, 64, 3, 32, 32, 1, true).unwrap(),
        mc_estimator(1_000_000, 4).unwrap(),
    ];
    let backends = [
        BackendKind::von_neumann(),
        BackendKind::coupled(),
        BackendKind::near_memory(),
        BackendKind::in_memory(32),
    ];
    let mut worst: f64 = 0.0;
    for w in &workloads {
        for kind in backends {
            let config = SimConfig::new(ArchParams::default(), BackendConfig::new(kind), Mode::Serialized);
            let r = run(w, &config).map_err(|e| e.to_string())?;
            let model = system_throughput(w.ai().unwrap(), w.alpha().unwrap(), &analytic_arch(&config)).unwrap();
            let err = rel(r.achieved_phi, model);
            check(err < 0.01, || format!("{} on {}: {} vs {}", w.name, kind.name(), r.achieved_phi, model))?;
            worst = worst.max(err);
        }
    }
    Ok(format!("16 runs, max relative error {worst:e}"))
}

fn regimes() -> Outcome {
    let config = SimConfig::default();
    let regime = |w| run(&w, &config).map(|r| r.regime_observed).map_err(|e| e.to_string());
    let bnn = regime(bnn_layer(128, 128, 1).unwrap())?;
    let det = regime(conv_layer(64, 64, 3, 32, 32, 1, false).unwrap())?;
    let sto = regime(conv_layer(64, 64, 3, 32, 32, 1, true).unwrap())?;
    check(bnn == RegimeLabel::EntropyBound, || format!("bnn {bnn}"))?;
    check(det == RegimeLabel::ComputeBound, || format!("conv {det}"))?;
    check(sto != RegimeLabel::ComputeBound, || format!("stochastic conv {sto}"))?;
    Ok(format!("bnn {bnn}, conv {det}, stochastic conv {sto}"))
}

fn statistical_fidelity() -> Outcome {
    let n = 100_000;
    let critical = ks_critical_value(n, 0.01).unwrap();
    check((critical - 0.005147).abs() < 5e-7, || format!("critical D {critical}"))?;
    let mut passes = 0;
    for seed in 0..100 {
        let mut s = PipelineStream::new(&ShapingPipelineSpec::default(), NonidealitySpec::default(), seed, 0)
            .map_err(|e| e.to_string())?;
        let xs: Vec<f64> = (0..n).map(|_| s.next_sample()).collect();
        if ks_test(&xs, normal_cdf, 0.01).unwrap().pass {
            passes += 1;
        }
        let m = moments(&xs).unwrap();
        check(m.mean.abs() <= 0.0126, || format!("seed {seed}: mean {}", m.mean))?;
        check((m.variance - 1.0).abs() <= 0.018, || format!("seed {seed}: variance {}", m.variance))?;
    }
    check(passes >= 95, || format!("{passes}/100 KS passes"))?;
    Ok(format!("{passes}/100 KS passes at D_crit {critical:.6}"))
}

fn nonideality_round_trip() -> Outcome {
    // The bias bound is four standard errors of a unit-variance mean over
    // 1e6 draws; the correlation bounds are set for 1e5.
    let n_bias = 1_000_000;
    let n = 100_000;
    let stream = |ni| PipelineStream::new(&ShapingPipelineSpec::default(), ni, 0, 0).unwrap();
    let mut biased = stream(NonidealitySpec {
        bias: 0.1,
        ..Default::default()
    });
    let xs: Vec<f64> = (0..n_bias).map(|_| biased.next_sample()).collect();
    let mean = moments(&xs).unwrap().mean;
    let mut corr = stream(NonidealitySpec {
        rho: 0.5,
        ..Default::default()
    });
    let ys: Vec<f64> = (0..n).map(|_| corr.next_sample()).collect();
    let ac = autocorrelation(&ys, 2).unwrap().unwrap();
    let detail = format!("mean {mean:.5}, lag1 {:.4}, lag2 {:.4}", ac[0], ac[1]);
    check((mean - 0.1).abs() <= 0.004, || format!("bias not recovered: {detail}"))?;
    check((ac[0] - 0.5).abs() <= 0.05, || format!("lag 1: {detail}"))?;
    check((ac[1] - 0.25).abs() <= 0.05, || format!("lag 2: {detail}"))?;
    Ok(detail)
}

fn pelgrom() -> Outcome {
    let array = |area, stream| {
        let spec = SourceSpec::new(SourceKind::MismatchStatic { sigma0: 0.01, area_wl: area }, 9).with_stream(stream);
        mismatch_array(&spec, 1000, 1000).unwrap().std_dev()
    };
    let empirical = array(4.0, 1) / array(1.0, 2);
    check((empirical - 0.5).abs() <= 0.01, || format!("empirical ratio {empirical}"))?;
    let exact = pelgrom_sigma(0.01, 4.0).unwrap() / pelgrom_sigma(0.01, 1.0).unwrap();
    check(rel(exact, 0.5) <= 1e-12, || format!("closed-form ratio {exact}"))?;
    Ok(format!("empirical ratio {empirical:.5} over 1e6 cells, closed form {exact}"))
}

fn unified_primitive() -> Outcome {
    let coupled = |gamma, write_based| BackendKind::CoupledPcim {
        sigma0: 0.1,
        gamma,
        sigma_min_frac: 0.5,
        sigma_max_frac: 2.0,
        write_based_sampling: write_based,
    };
    let kinds = [
        BackendKind::von_neumann(),
        coupled(0.0, false),
        coupled(0.0, true),
        BackendKind::near_memory(),
        BackendKind::in_memory(32),
    ];
    for kind in kinds {
        let mut m = PMemArray::new(1, 1, BackendConfig::new(kind)).map_err(|e| e.to_string())?;
        let v = -1.234_567_890_123;
        m.write((0, 0), CellState::Distribution(DistributionSpec::point_mass(v))).unwrap();
        let mut s = EntropyStream::new(0, 0);
        for _ in 0..1000 {
            let x = m.sample((0, 0), &mut s).unwrap();
            check(x == v, || format!("{}: sampled {x}", kind.name()))?;
        }
        let bits = m.cost_report().entropy_bits_consumed;
        check(bits == 0, || format!("{}: consumed {bits} entropy bits", kind.name()))?;
    }

    // sigma_dev(mu) = 0.1 * (1 + 0.5 |mu|) = 0.2 at mu = 2.
    let mut m = PMemArray::new(1, 1, BackendConfig::new(coupled(0.5, false))).unwrap();
    m.write((0, 0), CellState::gaussian(2.0, 0.2).unwrap()).unwrap();
    for bad in [0.099, 0.401, 5.0] {
        match m.set_variance((0, 0), bad) {
            Err(Error::Programmability { lo, hi, .. }) => {
                check(rel(lo, 0.1) < 1e-12 && rel(hi, 0.4) < 1e-12, || format!("reported [{lo}, {hi}]"))?;
            }
            other => return Err(format!("sigma {bad} not rejected: {other:?}")),
        }
    }
    m.set_variance((0, 0), 0.1).map_err(|e| e.to_string())?;
    m.set_variance((0, 0), 0.4).map_err(|e| e.to_string())?;

    let mut m = PMemArray::new(1, 1, BackendConfig::new(coupled(0.0, true))).unwrap();
    m.write((0, 0), CellState::gaussian(0.0, 0.1).unwrap()).unwrap();
    let before = m.endurance((0, 0)).unwrap();
    let mut s = EntropyStream::new(2, 0);
    let samples = 12_345;
    for _ in 0..samples {
        m.sample((0, 0), &mut s).unwrap();
    }
    let wear = m.endurance((0, 0)).unwrap() - before;
    check(wear == samples, || format!("endurance grew by {wear} over {samples} samples"))?;
    Ok("point masses exact on 5 backends, window [0.1, 0.4] enforced, endurance == samples".into())
}

fn determinism() -> Outcome {
    let exe = env!("CARGO_BIN_EXE_entropy-roofline");
    let dir = std::env::temp_dir().join(format!("entropy-roofline-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let grid = dir.join("grid.json");
    std::fs::write(
        &grid,
        r#"{"alpha": [0, 0.001, 0.01, 0.1, 0.5, 0.9, 1], "ai": [0.1, 1, 10, 100, 1000],
            "backend": ["von-neumann", "coupled", "near-memory", "in-memory"],
            "mode": ["serialized", "overlapped"], "beta_rand": [1e8, 1e9, 1e10]}"#,
    )
    .map_err(|e| e.to_string())?;
    let output = |args: &[&str]| -> Result<Vec<u8>, String> {
        let o = Command::new(exe)
            .args(args)
            .env_remove("ENTROPY_ROOFLINE_SEED")
            .output()
            .map_err(|e| e.to_string())?;
        check(o.status.success(), || String::from_utf8_lossy(&o.stderr).into_owned())?;
        Ok(o.stdout)
    };
    let sim = ["simulate", "--workload", "conv:64,64,3,32,32,1,stochastic", "--seed", "5"];
    let first = output(&sim)?;
    for _ in 0..3 {
        check(output(&sim)? == first, || "simulate output changed between runs".into())?;
    }
    let g = grid.to_str().unwrap();
    let base = output(&["sweep", "--grid", g, "--jobs", "1"])?;
    for jobs in ["1", "2", "4", "8"] {
        let again = output(&["sweep", "--grid", g, "--jobs", jobs])?;
        check(again == base, || format!("sweep output differs at --jobs {jobs}"))?;
    }
    let _ = std::fs::remove_dir_all(&dir);
    let rows = base.iter().filter(|&&b| b == b'\n').count() - 2;
    Ok(format!("simulate x4 identical, {rows}-row sweep identical across --jobs 1/2/4/8"))
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Outcome); 11] = [
        ("endpoint exactness", Duration::from_secs(1), endpoints),
        ("entropy wall compression", Duration::from_secs(1), entropy_wall),
        ("monotonicity", Duration::from_secs(5), monotonicity),
        ("crossover vs bisection", Duration::from_secs(5), crossover),
        ("simulator-model agreement", Duration::from_secs(10), simulator_agreement),
        ("regime reproduction", Duration::from_secs(5), regimes),
        ("Box-Muller statistical fidelity", Duration::from_secs(30), statistical_fidelity),
        ("non-ideality round trip", Duration::from_secs(10), nonideality_round_trip),
        ("Pelgrom scaling", Duration::from_secs(10), pelgrom),
        ("unified primitive contract", Duration::from_secs(5), unified_primitive),
        ("determinism", Duration::from_secs(10), determinism),
    ];
    let mut failed = 0;
    for (i, (name, budget, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(d) if elapsed > *budget => Err(format!("{d}; took {elapsed:.2?}, budget {budget:?}")),
            o => o,
        };
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} ({elapsed:.2?})", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why} ({elapsed:.2?})", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
