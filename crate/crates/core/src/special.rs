//! Gamma and beta functions via the Lanczos approximation.

use crate::error::{Error, Result};

// Lanczos coefficients for g = 7, n = 9 (GSL / Godfrey tabulation).
const LANCZOS_G: f64 = 7.0;
const LANCZOS_P: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Gamma function for real arguments (poles at 0, -1, -2, ... excluded).
pub fn gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection: Γ(x)Γ(1-x) = π / sin(πx)
        std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * gamma(1.0 - x))
    } else {
        let x = x - 1.0;
        let mut acc = LANCZOS_P[0];
        for (i, p) in LANCZOS_P.iter().enumerate().skip(1) {
            acc += p / (x + i as f64);
        }
        let w = x + LANCZOS_G + 0.5;
        (2.0 * std::f64::consts::PI).sqrt() * w.powf(x + 0.5) * (-w).exp() * acc
    }
}

/// Natural log of Gamma for x > 0.
pub fn lgamma(x: f64) -> f64 {
    if x <= 0.0 {
        return f64::NAN;
    }
    if x < 0.5 {
        // ln Γ(x) = ln(π / sin(πx)) − ln Γ(1−x)
        let s = (std::f64::consts::PI * x).sin();
        return (std::f64::consts::PI / s).ln() - lgamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS_P[0];
    for (i, p) in LANCZOS_P.iter().enumerate().skip(1) {
        acc += p / (x + i as f64);
    }
    let w = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * w.ln() - w + acc.ln()
}

/// Euler beta integral B(p, s) = Γ(p)Γ(s)/Γ(p+s), p, s > 0.
pub fn beta_integral(p: f64, s: f64) -> Result<f64> {
    if !(p > 0.0) || !(s > 0.0) || !p.is_finite() || !s.is_finite() {
        return Err(Error::DomainError {
            detail: format!("beta_integral requires p, s > 0, got p = {p}, s = {s}"),
        });
    }
    Ok((lgamma(p) + lgamma(s) - lgamma(p + s)).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn gamma_half_integers() {
        assert!((gamma(0.5) - PI.sqrt()).abs() < 1e-13);
        assert!((gamma(1.5) - 0.5 * PI.sqrt()).abs() < 1e-13);
        assert!((gamma(5.0) - 24.0).abs() < 1e-11);
        assert!((gamma(1.0) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn lgamma_matches_gamma() {
        for &x in &[0.1, 0.25, 0.5, 0.75, 1.0, 1.5, 3.2, 7.0, 12.5] {
            let rel = (lgamma(x).exp() - gamma(x)).abs() / gamma(x).abs();
            assert!(rel < 1e-12, "x = {x}: rel = {rel}");
        }
    }

    #[test]
    fn beta_known_values() {
        assert!((beta_integral(0.5, 0.5).unwrap() - PI).abs() < 1e-12);
        assert!((beta_integral(1.0, 1.0).unwrap() - 1.0).abs() < 1e-14);
        assert!((beta_integral(0.5, 1.5).unwrap() - PI / 2.0).abs() < 1e-13);
        assert!((beta_integral(2.0, 3.0).unwrap() - 1.0 / 12.0).abs() < 1e-14);
    }

    #[test]
    fn beta_recurrence_identity() {
        // B(p,s)·Γ(p+s) = Γ(p)Γ(s) at rational points
        for &(p, s) in &[(0.25, 0.75), (1.0 / 3.0, 2.0 / 3.0), (1.5, 2.5), (0.125, 4.0)] {
            let lhs = beta_integral(p, s).unwrap() * gamma(p + s);
            let rhs = gamma(p) * gamma(s);
            assert!((lhs - rhs).abs() / rhs.abs() < 1e-12);
        }
    }

    #[test]
    fn beta_rejects_nonpositive() {
        assert!(beta_integral(0.0, 1.0).is_err());
        assert!(beta_integral(1.0, -2.0).is_err());
        assert!(beta_integral(f64::NAN, 1.0).is_err());
    }
}
