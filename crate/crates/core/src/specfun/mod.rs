//! Special functions: Mittag-Leffler family, M-Wright density, Appell F3.

mod appell;
mod laplace;
mod ml;
mod multinomial;
mod mwright;

pub use appell::{appell_f3, hyp2f1};
pub use laplace::invert_laplace;
pub use ml::{mittag_leffler, prabhakar, prabhakar_series, MLParams};
pub use multinomial::{multinomial_ml, multinomial_ml_series, MultinomialMLParams, SeriesOutcome};
pub use mwright::{mwright_cdf, mwright_density};
pub(crate) use mwright::zolotarev_a;


/// Truncation control for the power series in this module.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesTolerance {
    pub abs_tol: f64,
    pub max_terms: usize,
}

impl Default for SeriesTolerance {
    fn default() -> Self {
        Self { abs_tol: 1e-17, max_terms: 100_000 }
    }
}

impl SeriesTolerance {
    pub fn new(abs_tol: f64, max_terms: usize) -> Self {
        assert!(abs_tol > 0.0 && max_terms >= 1);
        Self { abs_tol, max_terms }
    }
}

/// True when `x` is a non-positive integer, where `1/Γ` vanishes.
pub fn is_gamma_pole(x: f64) -> bool {
    x <= 0.0 && x == x.round()
}

/// `1/Γ(x)` with the convention `1/Γ(-n) = 0`.
pub fn recip_gamma(x: f64) -> f64 {
    if is_gamma_pole(x) {
        return 0.0;
    }
    if x > 170.0 {
        return (-libm::lgamma(x)).exp();
    }
    1.0 / libm::tgamma(x)
}

/// `(ln|Γ(x)|, sign Γ(x))` for `x` not a pole.
pub fn ln_gamma_signed(x: f64) -> (f64, f64) {
    let (lg, s) = libm::lgamma_r(x);
    (lg, if s < 0 { -1.0 } else { 1.0 })
}

pub fn gamma_fn(x: f64) -> f64 {
    libm::tgamma(x)
}

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recip_gamma_poles_and_values() {
        assert_eq!(recip_gamma(0.0), 0.0);
        assert_eq!(recip_gamma(-3.0), 0.0);
        assert!((recip_gamma(0.5) - 1.0 / std::f64::consts::PI.sqrt()).abs() < 1e-15);
        // Γ(-0.5) = -2√π
        let v = recip_gamma(-0.5);
        assert!((v + 1.0 / (2.0 * std::f64::consts::PI.sqrt())).abs() < 1e-15);
        let (lg, s) = ln_gamma_signed(-0.5);
        assert_eq!(s, -1.0);
        assert!((lg - (2.0 * std::f64::consts::PI.sqrt()).ln()).abs() < 1e-14);
    }
}
