//! Normal distribution helpers.

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile.
///
/// Acklam's rational approximation followed by one Halley step against
/// `normal_cdf`, which brings the error to a few ulps. Returns the
/// infinities at 0 and 1.
pub fn normal_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549671010584019e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    if p.is_nan() || !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }

    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };

    let e = normal_cdf(x) - p;
    let u = e * (2.0 * std::f64::consts::PI).sqrt() * (x * x / 2.0).exp();
    x - u / (1.0 + x * u / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ContinuousCDF, Normal};

    #[test]
    fn cdf_reference_values() {
        // 40-digit reference values.
        let table = [
            (-8.0, 6.2209605742717841235e-16),
            (-5.0, 2.8665157187919391167e-7),
            (-3.6, 0.00015910859015753382532),
            (-1.0, 0.15865525393145705141),
            (0.0, 0.5),
            (0.5, 0.69146246127401310364),
            (2.0, 0.9772498680518207928),
            (6.0, 0.99999999901341235496),
        ];
        for (x, want) in table {
            assert!((normal_cdf(x) - want).abs() <= 1e-14 * want, "x={x}");
        }
    }

    #[test]
    fn cdf_matches_statrs() {
        let n = Normal::new(0.0, 1.0).unwrap();
        for i in -80..=80 {
            let x = i as f64 * 0.1;
            let want = n.cdf(x);
            assert!((normal_cdf(x) - want).abs() <= 1e-9 * want, "x={x}");
        }
    }

    #[test]
    fn quantile_matches_statrs() {
        let n = Normal::new(0.0, 1.0).unwrap();
        for p in [1e-10, 1e-4, 0.01, 0.02425, 0.1, 0.3, 0.5, 0.7, 0.9, 0.975, 0.999999] {
            let got = normal_quantile(p);
            let want = n.inverse_cdf(p);
            assert!((got - want).abs() < 1e-9 * want.abs().max(1.0), "p={p}");
        }
        assert_eq!(normal_quantile(0.5), 0.0);
        assert_eq!(normal_quantile(0.0), f64::NEG_INFINITY);
        assert!(normal_quantile(1.5).is_nan());
    }
}
