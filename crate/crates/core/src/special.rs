//! Scalar primitives: binary entropy, log-gamma and log-binomials.
//!
//! Everything that multiplies factorials is evaluated in the log domain. The
//! large-argument binomials that show up in the sampling tail bound are split
//! into a Stirling leading part plus a small correction so that the result
//! keeps its relative precision even when the arguments are ~1e12.

use crate::error::{Error, Result};

/// Slack allowed when a probability argument is checked against `[0, 1]`.
pub const DOMAIN_SLACK: f64 = 1e-12;

/// Target relative accuracy of [`ln_gamma`].
pub const LN_GAMMA_REL_TOL: f64 = 1e-13;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Binary entropy `h(x) = -x log2 x - (1-x) log2 (1-x)` with `h(0) = h(1) = 0`.
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(-DOMAIN_SLACK..=1.0 + DOMAIN_SLACK).contains(&x) {
        return Err(Error::Domain(format!("binary entropy argument {x} outside [0, 1]")));
    }
    Ok(binary_entropy_clamped(x))
}

/// Binary entropy of `x` clamped into `[0, 1]`; never fails.
pub fn binary_entropy_clamped(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    if x == 0.0 || x == 1.0 {
        return 0.0;
    }
    -x * x.log2() - (1.0 - x) * (-x).ln_1p() / std::f64::consts::LN_2
}

/// Entropy of an error rate: the argument is clamped into `[0, 1/2]` first, so
/// any rate at or above one half costs a full bit.
pub fn error_entropy(x: f64) -> f64 {
    binary_entropy_clamped(x.clamp(0.0, 0.5))
}

// Lanczos approximation, g = 7, n = 9.
const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("ln_gamma argument {x} must be positive and finite")));
    }
    Ok(ln_gamma_pos(x))
}

fn ln_gamma_pos(x: f64) -> f64 {
    // exact factorials for small integers
    if x.fract() == 0.0 && x <= 171.0 {
        let mut acc = 1.0f64;
        let mut k = 2.0;
        while k < x {
            acc *= k;
            k += 1.0;
        }
        return acc.ln();
    }
    if x < 0.5 {
        // reflection keeps the Lanczos sum in its accurate range
        let s = (std::f64::consts::PI * x).sin();
        return (std::f64::consts::PI / s).ln() - ln_gamma_pos(1.0 - x);
    }
    if x >= 15.0 {
        return (x - 0.5) * x.ln() - x + LN_SQRT_2PI + stirling_tail(x);
    }
    let z = x - 1.0;
    let mut sum = LANCZOS_COEF[0];
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        sum += c / (z + i as f64);
    }
    let base = z + LANCZOS_G + 0.5;
    LN_SQRT_2PI + (z + 0.5) * base.ln() - base + sum.ln()
}

/// Asymptotic series for `ln Γ(x) - [(x - 1/2) ln x - x + ln √(2π)]`, valid for
/// `x >= 15` to well below 1e-16.
fn stirling_tail(x: f64) -> f64 {
    let r = 1.0 / x;
    let r2 = r * r;
    r * (1.0 / 12.0
        - r2 * (1.0 / 360.0
            - r2 * (1.0 / 1260.0 - r2 * (1.0 / 1680.0 - r2 * (1.0 / 1188.0 - r2 * 691.0 / 360_360.0)))))
}

/// Stirling remainder `δ(x) = ln Γ(x+1) - [x ln x - x + ½ ln(2πx)]` for `x > 0`.
pub(crate) fn stirling_remainder(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x >= 15.0 {
        // ln Γ(x+1) = ln Γ(x) + ln x, and the series is in terms of Γ(x)
        stirling_tail(x)
    } else {
        ln_gamma_pos(x + 1.0) - (x * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI * x).ln())
    }
}

/// Argument size above which [`ln_binomial`] switches to the split Stirling form.
const SPLIT_THRESHOLD: f64 = 1.0e4;

/// `ln C(a, b)` for real `a >= b >= 0`, via the gamma-function extension.
pub fn ln_binomial(a: f64, b: f64) -> Result<f64> {
    if !(b >= 0.0) || !(a >= b) || !a.is_finite() {
        return Err(Error::Domain(format!("ln_binomial requires a >= b >= 0, got ({a}, {b})")));
    }
    Ok(ln_binomial_unchecked(a, b))
}

pub(crate) fn ln_binomial_unchecked(a: f64, b: f64) -> f64 {
    let c = a - b;
    if b == 0.0 || c <= 0.0 {
        return 0.0;
    }
    if a < SPLIT_THRESHOLD {
        return ln_gamma_pos(a + 1.0) - ln_gamma_pos(b + 1.0) - ln_gamma_pos(c + 1.0);
    }
    // a ln a - b ln b - c ln c = b ln(a/b) + c ln(1 + b/c), no large cancellation
    let lead = b * (a / b).ln() + c * (b / c).ln_1p();
    lead + binomial_correction(a, b, c)
}

/// The sub-leading part of `ln C(a, b)` in the split Stirling form, `c = a - b`.
/// Zero whenever the binomial is trivially one.
pub(crate) fn binomial_correction(a: f64, b: f64, c: f64) -> f64 {
    if b <= 0.0 || c <= 0.0 {
        return 0.0;
    }
    0.5 * (a / (2.0 * std::f64::consts::PI * b * c)).ln() + stirling_remainder(a)
        - stirling_remainder(b)
        - stirling_remainder(c)
}

/// Stable evaluation of `x ln(x/m) + m - x` (the binomial deviance), `x, m >= 0`.
pub(crate) fn deviance(x: f64, m: f64) -> f64 {
    if x == 0.0 {
        return m;
    }
    if m == 0.0 {
        return f64::INFINITY;
    }
    let diff = x - m;
    if diff.abs() < 0.1 * (x + m) {
        // series in v = (x - m)/(x + m)
        let v = diff / (x + m);
        let mut s = diff * v;
        let mut ej = 2.0 * x * v;
        let v2 = v * v;
        let mut j = 1;
        loop {
            ej *= v2;
            let s1 = s + ej / (2 * j + 1) as f64;
            if s1 == s {
                return s1;
            }
            s = s1;
            j += 1;
            if j > 1000 {
                return s;
            }
        }
    }
    x * (x / m).ln() + m - x
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn entropy_values() {
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        // 40-digit reference: 0.88129089923069261822...
        assert_relative_eq!(binary_entropy(0.3).unwrap(), 0.881_290_899_230_692_7, max_relative = 1e-15);
    }

    #[test]
    fn entropy_domain() {
        assert!(binary_entropy(-1e-6).is_err());
        assert!(binary_entropy(1.0 + 1e-6).is_err());
        assert!(binary_entropy(f64::NAN).is_err());
        assert_eq!(binary_entropy(1.0 + 1e-13).unwrap(), 0.0);
    }

    #[test]
    fn error_entropy_saturates() {
        assert_eq!(error_entropy(0.7), 1.0);
        assert_eq!(error_entropy(-0.1), 0.0);
    }

    #[test]
    fn ln_gamma_values() {
        assert_eq!(ln_gamma(1.0).unwrap(), 0.0);
        assert_eq!(ln_gamma(2.0).unwrap(), 0.0);
        assert_relative_eq!(ln_gamma(5.0).unwrap(), 24f64.ln(), max_relative = 1e-15);
        // 0.28468287047291915963...
        assert_relative_eq!(ln_gamma(2.5).unwrap(), 0.284_682_870_472_919_2, max_relative = LN_GAMMA_REL_TOL);
        assert!(ln_gamma(0.0).is_err());
        assert!(ln_gamma(-2.0).is_err());
    }

    #[test]
    fn ln_gamma_across_branches() {
        // Γ(x+1) = x Γ(x) ties the Lanczos, reflection and asymptotic branches together
        for &x in &[0.1, 0.3, 0.49, 0.51, 1.7, 7.25, 14.5, 14.99, 15.01, 40.3, 1234.5] {
            let lhs = ln_gamma(x + 1.0).unwrap();
            let rhs = ln_gamma(x).unwrap() + f64::ln(x);
            assert!((lhs - rhs).abs() <= 1e-13 * lhs.abs().max(1.0), "x = {x}: {lhs} vs {rhs}");
        }
        // Γ(1/2) = √π
        assert_relative_eq!(ln_gamma(0.5).unwrap(), 0.5 * std::f64::consts::PI.ln(), max_relative = 1e-14);
    }

    #[test]
    fn ln_binomial_values() {
        assert_eq!(ln_binomial(7.0, 0.0).unwrap(), 0.0);
        assert_eq!(ln_binomial(0.0, 0.0).unwrap(), 0.0);
        assert_relative_eq!(ln_binomial(4.0, 2.0).unwrap(), 6f64.ln(), max_relative = 1e-14);
        let expected = ln_gamma(3.5).unwrap() - ln_gamma(2.0).unwrap() - ln_gamma(2.5).unwrap();
        assert_relative_eq!(ln_binomial(2.5, 1.0).unwrap(), expected, max_relative = 1e-14);
        assert!(ln_binomial(2.0, 3.0).is_err());
        assert!(ln_binomial(2.0, -1.0).is_err());
    }

    #[test]
    fn split_form_matches_direct_form() {
        for &(a, b) in &[(1.0e4, 3.0), (2.0e4, 9_999.5), (5.0e4, 0.25), (3.3e4, 17.0)] {
            let direct = ln_gamma(a + 1.0).unwrap() - ln_gamma(b + 1.0).unwrap() - ln_gamma(a - b + 1.0).unwrap();
            let split = ln_binomial(a, b).unwrap();
            assert!((direct - split).abs() < 1e-9, "({a},{b}): {direct} vs {split}");
        }
    }

    #[test]
    fn deviance_agrees_with_naive() {
        for &(x, m) in &[(3.0, 2.0), (100.0, 120.0), (0.5, 7.0)] {
            let naive = x * (x / m as f64).ln() + m - x;
            assert!((deviance(x, m) - naive).abs() < 1e-13 * naive.abs());
        }
        // near x = m the naive form cancels; d²/2x - d³/3x² + d⁴/4x³ with d = m - x
        let (x, d) = (1.0e6f64, 3.0f64);
        let series = d * d / (2.0 * x) - d.powi(3) / (3.0 * x * x) + d.powi(4) / (4.0 * x.powi(3));
        assert!((deviance(x, x + d) - series).abs() < 1e-12 * series);
        assert_eq!(deviance(0.0, 2.5), 2.5);
        assert_eq!(deviance(4.0, 4.0), 0.0);
    }
}
