//! Numerically stable scalar helpers shared by the score, kernel and
//! learning code.

/// Logistic sigmoid `1 / (1 + e^{-x})`, accurate in both tails.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `log cosh(x)` without overflow for large `|x|`.
#[inline]
pub fn log_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// `log(2 cosh x)`.
#[inline]
pub fn log_two_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p()
}

/// Max-shifted log-sum-exp. Returns `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + values.iter().map(|&v| (v - max).exp()).sum::<f64>().ln()
}

/// Values below this magnitude are treated as an exact sign tie.
///
/// Posterior means that vanish by symmetry are rarely bit-exact zeros after
/// summing over the hypercube, so tie detection needs a floor.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Log-spaced grid of `n` points between `lo` and `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let ratio = hi / lo;
            let mut g: Vec<f64> = (0..n)
                .map(|k| lo * ratio.powf(k as f64 / (n - 1) as f64))
                .collect();
            g[n - 1] = hi;
            g
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_tails_and_symmetry() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((sigmoid(2.0) - 0.880_797_077_977_882_3).abs() < 1e-15);
        assert!((sigmoid(-2.0) - 0.119_202_922_022_117_57).abs() < 1e-15);
        assert_eq!(sigmoid(1000.0), 1.0);
        assert_eq!(sigmoid(-1000.0), 0.0);
        for x in [-30.0, -3.0, 0.1, 7.0] {
            assert!((sigmoid(x) + sigmoid(-x) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn log_cosh_matches_direct_form() {
        for x in [-5.0, -0.3, 0.0, 0.7, 12.0] {
            let direct = f64::cosh(x).ln();
            assert!((log_cosh(x) - direct).abs() < 1e-13, "{x}");
            assert!((log_two_cosh(x) - (2.0 * f64::cosh(x)).ln()).abs() < 1e-13);
        }
        assert!((log_cosh(1000.0) - (1000.0 - std::f64::consts::LN_2)).abs() < 1e-12);
    }

    #[test]
    fn log_sum_exp_edge_cases() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY, f64::NEG_INFINITY]), f64::NEG_INFINITY);
        let v = [1000.0, 1000.0];
        assert!((log_sum_exp(&v) - (1000.0 + std::f64::consts::LN_2)).abs() < 1e-12);
        let w = [-1.0, -2.0, -3.0];
        let direct = w.iter().map(|x: &f64| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(&w) - direct).abs() < 1e-15);
    }

    #[test]
    fn softplus_is_stable() {
        assert!((softplus(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(softplus(800.0), 800.0);
        assert!(softplus(-800.0) >= 0.0);
        assert!((softplus(-2.0) - 0.126_928_011_042_972_5).abs() < 1e-15);
    }

    #[test]
    fn log_space_endpoints() {
        let g = log_space(0.01, 4.0, 20);
        assert_eq!(g.len(), 20);
        assert_eq!(g[0], 0.01);
        assert_eq!(g[19], 4.0);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }
}
