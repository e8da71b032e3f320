use entropy_roofline::distribution_shaping::ShapingPipelineSpec;
use entropy_roofline::entropy_sources::NonidealitySpec;
use entropy_roofline::fidelity::{
    autocorrelation, fidelity_report, ks_critical_value, ks_test, min_entropy, moments, report_from_samples,
    FidelityConfig, PipelineStream, TargetSpec,
};
use entropy_roofline::rng::{CounterRng, UniformSource};
use proptest::prelude::*;

#[test]
fn ks_rejection_rate_near_significance() {
    let n = 10_000;
    let runs = 1000;
    let rejected = (0..runs)
        .filter(|&seed| {
            let mut rng = CounterRng::new(seed, 77);
            let xs: Vec<f64> = (0..n).map(|_| rng.next_uniform()).collect();
            !ks_test(&xs, |x| x.clamp(0.0, 1.0), 0.01).unwrap().pass
        })
        .count();
    let rate = rejected as f64 / runs as f64;
    assert!((0.002..=0.025).contains(&rate), "rejection rate {rate}");
}

#[test]
fn ks_critical_value_at_reference_size() {
    let c = ks_critical_value(100_000, 0.01).unwrap();
    assert!((c - 0.005147).abs() < 5e-7, "{c}");
}

#[test]
fn ar1_autocorrelation_follows_powers() {
    for rho in [-0.4, 0.3, 0.7] {
        let mut s = PipelineStream::new(
            &ShapingPipelineSpec::default(),
            NonidealitySpec {
                rho,
                ..Default::default()
            },
            31,
            0,
        )
        .unwrap();
        let report = fidelity_report(&mut s, 100_000, TargetSpec::standard_normal(), &FidelityConfig::default()).unwrap();
        let ac = report.autocorr.unwrap();
        for lag in 1..=3 {
            let want = f64::powi(rho, lag as i32);
            assert!((ac[lag - 1] - want).abs() < 0.05, "rho={rho} lag={lag} got {}", ac[lag - 1]);
        }
    }
}

proptest! {
    /// Moving mass onto the most common symbol never raises the estimate.
    #[test]
    fn min_entropy_antitone(counts in prop::collection::vec(1usize..400, 2..12), extra in 1usize..2000) {
        let build = |counts: &[usize]| -> Vec<usize> {
            counts.iter().enumerate().flat_map(|(s, &c)| std::iter::repeat_n(s, c)).collect()
        };
        let mut counts = counts;
        let total: usize = counts.iter().sum();
        if total < 1000 {
            counts[0] += 1000 - total;
        }
        let top = (0..counts.len()).max_by_key(|&i| counts[i]).unwrap();
        let before = min_entropy(&build(&counts)).unwrap();
        // Take `extra` from the others, as far as they allow, and give it to the top symbol.
        let mut moved = 0;
        for i in 0..counts.len() {
            if i != top && moved < extra {
                let take = (counts[i] - 1).min(extra - moved);
                counts[i] -= take;
                moved += take;
            }
        }
        counts[top] += moved;
        let after = min_entropy(&build(&counts)).unwrap();
        prop_assert!(after <= before + 1e-12, "{after} > {before}");
    }

    #[test]
    fn estimators_are_pure(seed in any::<u64>()) {
        let mut rng = CounterRng::new(seed, 0);
        let xs: Vec<f64> = (0..2000).map(|_| rng.next_uniform() - 0.5).collect();
        let cfg = FidelityConfig::default();
        let target = TargetSpec::Uniform { lo: -0.5, hi: 0.5 };
        let a = report_from_samples(&xs, target, &cfg, None).unwrap();
        let b = report_from_samples(&xs.clone(), target, &cfg, None).unwrap();
        prop_assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        prop_assert_eq!(moments(&xs).unwrap(), moments(&xs).unwrap());
        prop_assert_eq!(autocorrelation(&xs, 4).unwrap(), autocorrelation(&xs, 4).unwrap());
    }
}
