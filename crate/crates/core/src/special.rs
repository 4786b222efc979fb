//! Gamma function and a few closed-form helpers built on it.

use core::f64::consts::PI;
#[allow(unused_imports)] // shadowed by inherent f64 methods when std is linked
use num_traits::Float;

use crate::error::{bail, Result};

// Lanczos approximation, g = 7, n = 9 (Numerical Recipes / Godfrey coefficients).
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

fn lanczos_sum(x: f64) -> f64 {
    // x is the shifted argument z - 1
    let mut acc = LANCZOS_COEF[0];
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    acc
}

// sin(πx) with the argument reduced exactly before scaling by π
fn sin_pi(x: f64) -> f64 {
    let r = x - 2.0 * (0.5 * x).round();
    (PI * r).sin()
}

fn is_pole(x: f64) -> bool {
    x <= 0.0 && x == x.floor()
}

/// Γ(x) for real x away from the poles at non-positive integers.
pub fn gamma(x: f64) -> Result<f64> {
    if !x.is_finite() {
        bail!(Domain, "gamma of non-finite argument {x}");
    }
    if is_pole(x) {
        bail!(Domain, "gamma has a pole at {x}");
    }
    if x == x.floor() && (1.0..=171.0).contains(&x) {
        // exact factorial for small positive integers
        let mut f = 1.0;
        let mut k = 2.0;
        while k < x {
            f *= k;
            k += 1.0;
        }
        return Ok(f);
    }
    if x < 0.5 {
        // reflection: Γ(x)Γ(1-x) = π / sin(πx)
        return Ok(PI / (sin_pi(x) * gamma(1.0 - x)?));
    }
    let z = x - 1.0;
    let t = z + LANCZOS_G + 0.5;
    Ok((2.0 * PI).sqrt() * t.powf(z + 0.5) * (-t).exp() * lanczos_sum(z))
}

/// ln |Γ(x)|, usable for large arguments where Γ overflows.
pub fn ln_gamma_abs(x: f64) -> Result<f64> {
    if is_pole(x) || !x.is_finite() {
        bail!(Domain, "ln_gamma at pole or non-finite {x}");
    }
    if x < 0.5 {
        let s = sin_pi(x).abs();
        return Ok(PI.ln() - s.ln() - ln_gamma_abs(1.0 - x)?);
    }
    let z = x - 1.0;
    let t = z + LANCZOS_G + 0.5;
    Ok(0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + lanczos_sum(z).ln())
}

/// Euler Beta function B(a, b) for positive arguments.
pub fn beta_fn(a: f64, b: f64) -> Result<f64> {
    if a <= 0.0 || b <= 0.0 {
        bail!(Domain, "beta requires positive arguments, got ({a}, {b})");
    }
    Ok((ln_gamma_abs(a)? + ln_gamma_abs(b)? - ln_gamma_abs(a + b)?).exp())
}

/// Surface measure |S^{d-1}| = 2π^{d/2}/Γ(d/2) of the unit sphere in ℝ^d.
pub fn sphere_measure(d: u32) -> f64 {
    let h = 0.5 * d as f64;
    // Γ(d/2) is finite and positive for d ≥ 1
    2.0 * PI.powf(h) / gamma(h).unwrap_or(f64::NAN)
}

/// Partial sums of the Gauss hypergeometric series ₂F₁(a, b; c; z) for |z| < 1.
///
/// Only used where z is bounded away from 1 (series tails, test oracles).
pub fn hyp2f1_series(a: f64, b: f64, c: f64, z: f64, tol: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut m = 0.0;
    while m < 100_000.0 {
        term *= (a + m) * (b + m) / ((c + m) * (m + 1.0)) * z;
        sum += term;
        m += 1.0;
        if term.abs() < tol * sum.abs() && m > 2.0 {
            break;
        }
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn gamma_trivial_values() {
        assert_eq!(gamma(1.0).unwrap(), 1.0);
        assert_eq!(gamma(5.0).unwrap(), 24.0);
        assert!(rel(gamma(0.5).unwrap(), PI.sqrt()) < 1e-14);
    }

    #[test]
    fn gamma_half_squared_is_pi() {
        // reflection oracle Γ(1/2)² = π
        let g = gamma(0.5).unwrap();
        assert!(rel(g * g, PI) < 1e-13);
    }

    #[test]
    fn gamma_recurrence_and_reflection() {
        for k in 0..160 {
            let x = -29.75 + 0.37 * k as f64;
            if (x - x.round()).abs() > 1e-3 {
                let lhs = gamma(x + 1.0).unwrap();
                let rhs = x * gamma(x).unwrap();
                assert!(rel(lhs, rhs) < 1e-12, "x = {x}: {lhs} vs {rhs}");
            }
        }
        // Γ(-1/2) = -2√π
        assert!(rel(gamma(-0.5).unwrap(), -2.0 * PI.sqrt()) < 1e-13);
    }

    #[test]
    fn gamma_poles_are_domain_errors() {
        for x in [0.0, -1.0, -7.0] {
            assert!(gamma(x).is_err());
        }
    }

    #[test]
    fn ln_gamma_matches_gamma() {
        for x in [0.3, 1.7, 4.25, 12.5, -2.5] {
            assert!((ln_gamma_abs(x).unwrap() - gamma(x).unwrap().abs().ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn sphere_measures() {
        assert!((sphere_measure(2) - 2.0 * PI).abs() < 1e-14);
        assert!((sphere_measure(3) - 4.0 * PI).abs() < 1e-13);
        assert!((sphere_measure(1) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn hypergeometric_elementary_case() {
        // ₂F₁(1, 1/2; 3/2; z²) = atanh(z)/z
        let z: f64 = 0.4;
        let f = hyp2f1_series(1.0, 0.5, 1.5, z * z, 1e-17);
        assert!(rel(f, z.atanh() / z) < 1e-14);
    }
}
