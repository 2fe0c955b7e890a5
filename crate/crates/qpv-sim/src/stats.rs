//! Small statistics helpers: values with propagated uncertainty and Wilson
//! score intervals for binomial proportions.

use std::fmt;

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;
/// Two-sided 99% normal quantile.
pub const Z_99: f64 = 2.575_829_303_548_901;

/// A measured value with a symmetric one-sigma uncertainty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Uncertain {
    pub value: f64,
    pub sigma: f64,
}

impl Uncertain {
    pub fn new(value: f64, sigma: f64) -> Self {
        Self { value, sigma }
    }

    /// A value known exactly (sigma = 0).
    pub fn exact(value: f64) -> Self {
        Self { value, sigma: 0.0 }
    }
}

impl fmt::Display for Uncertain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digits = f.precision().unwrap_or(4);
        write!(
            f,
            "{:.*} ± {:.*}",
            digits, self.value, digits, self.sigma
        )
    }
}

/// Wilson score interval for a binomial proportion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WilsonInterval {
    pub successes: u64,
    pub trials: u64,
    pub p_hat: f64,
    pub lower: f64,
    pub upper: f64,
}

impl WilsonInterval {
    pub fn contains(&self, p: f64) -> bool {
        self.lower <= p && p <= self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

impl fmt::Display for WilsonInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:.4} [{:.4}, {:.4}] ({}/{})",
            self.p_hat, self.lower, self.upper, self.successes, self.trials
        )
    }
}

/// Wilson score interval with normal quantile `z`.
///
/// With zero trials the interval is the vacuous [0, 1].
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> WilsonInterval {
    if trials == 0 {
        return WilsonInterval {
            successes,
            trials,
            p_hat: 0.0,
            lower: 0.0,
            upper: 1.0,
        };
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    WilsonInterval {
        successes,
        trials,
        p_hat: p,
        lower: (center - half).max(0.0),
        upper: (center + half).min(1.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn wilson_matches_reference_values() {
        // 10/40 at 95%: textbook Wilson bounds.
        let w = wilson_interval(10, 40, Z_95);
        assert_abs_diff_eq!(w.p_hat, 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(w.lower, 0.141871, epsilon = 1e-5);
        assert_abs_diff_eq!(w.upper, 0.401940, epsilon = 1e-5);
    }

    #[test]
    fn wilson_handles_edge_proportions() {
        let w = wilson_interval(0, 100, Z_95);
        assert_eq!(w.p_hat, 0.0);
        assert!(w.lower.abs() < 1e-15 && w.upper > 0.0 && w.upper < 0.05);

        let w = wilson_interval(100, 100, Z_95);
        assert_eq!(w.p_hat, 1.0);
        assert!(w.upper == 1.0 && w.lower > 0.95);

        let w = wilson_interval(0, 0, Z_95);
        assert_eq!((w.lower, w.upper), (0.0, 1.0));
    }

    #[test]
    fn interval_narrows_with_trials() {
        let narrow = wilson_interval(500, 1000, Z_95);
        let wide = wilson_interval(50, 100, Z_95);
        assert!(narrow.width() < wide.width());
    }
}
