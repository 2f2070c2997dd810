//! Evaluation of `Φ(t, λ) = Σ cₙ(t) λⁿ`: power series, closed forms and a Volterra solver.

mod cm;
mod volterra;

use std::sync::Arc;

use num_complex::Complex64;

pub use cm::{check_complete_monotone, time_law_cdf, CmReport, CmViolation, TimeLawCdf};
pub use volterra::{phi_volterra, phi_volterra_with, VolterraSolver};

use crate::error::{invalid, Error, Result};
use crate::kernels::{homogeneous_unit_coefficients, CoefficientTable, Family, Kernel, Resolution};
use crate::quad::compensated_sum;
use crate::specfun::{gamma_fn, invert_laplace, mittag_leffler, multinomial_ml_series, prabhakar, MLParams, MultinomialMLParams, SeriesTolerance};

/// Largest acceptable ratio of rounding error to result in the alternating series.
const SERIES_CANCELLATION: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub enum PhiMode {
    /// Power series with at most `n_max` terms, stopping once terms drop below `tol`.
    Series { n_max: usize, tol: f64 },
    ClosedForm,
    /// Volterra solver on a graded grid of `n` intervals over `[0, T]`.
    Volterra { n: usize },
}

#[derive(Debug, Clone)]
enum Coefficients {
    /// `cₙ(1)`; `cₙ(t) = t^{nθ} cₙ(1)`.
    Homogeneous { theta: f64, unit: Vec<f64> },
    Table(Arc<CoefficientTable>),
}

/// Evaluator of `Φ(t, λ)` for a fixed kernel.
#[derive(Debug, Clone)]
pub struct PhiEvaluator {
    kernel: Kernel,
    mode: PhiMode,
    t_max: f64,
    coeffs: Option<Coefficients>,
}

impl PhiEvaluator {
    /// `t_max` bounds the times at which the evaluator is used; it sizes the
    /// coefficient table for non-homogeneous kernels and the Volterra grid.
    pub fn new(kernel: &Kernel, mode: PhiMode, t_max: f64) -> Result<Self> {
        if !(t_max > 0.0 && t_max.is_finite()) {
            return Err(invalid(format!("t_max must be > 0, got {t_max}")));
        }
        let coeffs = match &mode {
            PhiMode::Series { n_max, tol } => {
                if !(*tol > 0.0) {
                    return Err(invalid("series tolerance must be > 0"));
                }
                Some(match kernel.theta() {
                    Some(theta) => Coefficients::Homogeneous {
                        theta,
                        unit: homogeneous_unit_coefficients(kernel, theta, *n_max, Resolution::for_kernel(kernel))?,
                    },
                    None => Coefficients::Table(Arc::new(CoefficientTable::build(kernel, t_max, *n_max)?)),
                })
            }
            PhiMode::ClosedForm => {
                if !has_closed_form(kernel) {
                    return Err(Error::NoClosedForm(format!("{:?}", kernel.family())));
                }
                None
            }
            PhiMode::Volterra { n } => {
                if *n < 4 {
                    return Err(invalid("Volterra grid needs at least 4 intervals"));
                }
                None
            }
        };
        Ok(Self { kernel: kernel.clone(), mode, t_max, coeffs })
    }

    pub fn series(kernel: &Kernel, t_max: f64) -> Result<Self> {
        Self::new(kernel, PhiMode::Series { n_max: 200, tol: 1e-17 }, t_max)
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn mode(&self) -> &PhiMode {
        &self.mode
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    /// `Φ(t, λ)` in the evaluator's mode.
    pub fn eval(&self, t: f64, lam: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(invalid(format!("Φ needs t ≥ 0, got {t}")));
        }
        match &self.mode {
            PhiMode::Series { .. } => self.series_value(t, lam),
            PhiMode::ClosedForm => phi_closed(&self.kernel, t, lam),
            PhiMode::Volterra { n } => {
                let grid = VolterraSolver::graded_grid(self.t_max.max(t), *n, &[t]);
                let s = VolterraSolver::new(&self.kernel, grid)?;
                let v = s.solve(lam);
                Ok(v[s.index_of(t).expect("t is a grid node")])
            }
        }
    }

    /// `Φ(t, -λ)` for `λ ≥ 0` by the most accurate route available, used where large λ occur.
    pub fn eval_decay(&self, t: f64, lam: f64) -> Result<f64> {
        if has_closed_form(&self.kernel) {
            return phi_closed(&self.kernel, t, -lam);
        }
        match self.series_value(t, -lam) {
            Ok(v) => Ok(v),
            Err(Error::TruncationBudget(_)) | Err(Error::OutsideConvergenceDomain(_)) => {
                let grid = VolterraSolver::graded_grid(t, 1024, &[t]);
                let s = VolterraSolver::new(&self.kernel, grid)?;
                Ok(*s.solve(-lam).last().expect("nonempty grid"))
            }
            Err(e) => Err(e),
        }
    }

    /// `cₙ(t)` for `n = 0..=n_max` (series mode only).
    pub fn coefficients(&self, t: f64) -> Result<Vec<f64>> {
        match &self.coeffs {
            Some(Coefficients::Homogeneous { theta, unit }) => {
                Ok(unit.iter().enumerate().map(|(n, c)| c * t.powf(n as f64 * theta)).collect())
            }
            Some(Coefficients::Table(tab)) => tab.coefficients_at(t),
            None => Err(invalid("coefficients are only stored in series mode")),
        }
    }

    fn series_value(&self, t: f64, lam: f64) -> Result<f64> {
        let tol = match &self.mode {
            PhiMode::Series { tol, .. } => *tol,
            _ => 1e-17,
        };
        let (c, x) = match &self.coeffs {
            Some(Coefficients::Homogeneous { theta, unit }) => (unit.clone(), lam * t.powf(*theta)),
            Some(Coefficients::Table(tab)) => (tab.coefficients_at(t)?, lam),
            None => return Err(invalid("evaluator was not built in series mode")),
        };
        phi_series_from(&c, x, tol)
    }
}

/// `Σ cₙ xⁿ` with tail monitoring and a cancellation guard.
pub fn phi_series_from(c: &[f64], x: f64, tol: f64) -> Result<f64> {
    if x == 0.0 {
        return Ok(c[0]);
    }
    let mut terms = Vec::with_capacity(c.len());
    let mut pow = 1.0;
    let mut small = 0;
    let mut abs_sum = 0.0;
    for &cn in c {
        let term = cn * pow;
        terms.push(term);
        abs_sum += term.abs();
        pow *= x;
        // three consecutive negligible terms end the sum
        if term.abs() <= tol * abs_sum.max(1.0) && terms.len() > 2 {
            small += 1;
            if small == 3 {
                break;
            }
        } else {
            small = 0;
        }
        if !pow.is_finite() {
            break;
        }
    }
    if small < 3 {
        return Err(Error::TruncationBudget(format!(
            "series in x = {x} has not converged after {} terms (last term {:.3e})",
            c.len(),
            terms.last().copied().unwrap_or(0.0)
        )));
    }
    let s = compensated_sum(terms.iter().copied());
    let rounding = f64::EPSILON * abs_sum;
    if rounding > SERIES_CANCELLATION * s.abs() {
        return Err(Error::OutsideConvergenceDomain(format!(
            "series at x = {x} cancels: Σ|terms| = {abs_sum:.3e} against result {s:.3e}"
        )));
    }
    Ok(s)
}

/// `Φ(t, λ)` from the coefficient series, for one-off evaluation.
pub fn phi_series(kernel: &Kernel, t: f64, lam: f64) -> Result<f64> {
    PhiEvaluator::series(kernel, t.max(f64::MIN_POSITIVE))?.eval(t, lam)
}

fn has_closed_form(k: &Kernel) -> bool {
    match k.family() {
        Family::Custom(_) => false,
        Family::TimeStretched { base, .. } => has_closed_form(base),
        _ => true,
    }
}

/// Parameters `(q₁, q₂, q₃)` of the Prabhakar function giving `Φ` for the MSM kernel.
pub fn msm_q_params(a: f64, b: f64, mu: f64, nu: f64) -> (f64, f64, f64) {
    (b / a, nu / a + mu, 1.0 + (nu - a) / b)
}

/// Closed-form `Φ(t, λ)` for the built-in families.
pub fn phi_closed(k: &Kernel, t: f64, lam: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(invalid(format!("Φ needs t ≥ 0, got {t}")));
    }
    if t == 0.0 || lam == 0.0 {
        return Ok(1.0);
    }
    match k.family() {
        Family::FractionalPower { beta } => mittag_leffler(*beta, lam * t.powf(*beta)),
        Family::Ggbm { alpha, beta } => mittag_leffler(*beta, lam * t.powf(*alpha)),
        Family::Msm { a, b, mu, nu } => {
            let (q1, q2, q3) = msm_q_params(*a, *b, *mu, *nu);
            Ok(gamma_fn(q2) * prabhakar(MLParams::new(q1, q2, q3)?, lam * t.powf(*b))?)
        }
        Family::ConvPowerSum { beta, betas, bs } => phi1(*beta, betas, bs, t, lam),
        Family::ConvMultinomialMl { beta, betas, bs } => phi2(*beta, betas, bs, t, lam),
        Family::TimeStretched { base, stretch } => phi_closed(base, stretch.g(t), lam),
        Family::Custom(c) => Err(Error::NoClosedForm(format!("custom kernel '{}'", c.label))),
    }
}

fn multinomial_or_inverse(alphas: Vec<f64>, b: f64, z: &[f64], lt: impl Fn(Complex64) -> Complex64, t: f64) -> Result<f64> {
    let p = MultinomialMLParams::new(alphas, b)?;
    if let Ok(o) = multinomial_ml_series(&p, z, SeriesTolerance::default()) {
        if o.max_term <= 1e3 * o.value.abs() || z.iter().all(|v| *v >= 0.0) {
            return Ok(o.value);
        }
    }
    if z.iter().any(|v| *v > 0.0) {
        return Err(Error::OutsideConvergenceDomain("multinomial series cancels for mixed-sign arguments".into()));
    }
    Ok(invert_laplace(lt, t, 32))
}

// Φ₁(t, λ) = E_{(β,β₁,…),1}(λt^β, λb₁t^{β₁}, …)
fn phi1(beta: f64, betas: &[f64], bs: &[f64], t: f64, lam: f64) -> Result<f64> {
    let mut alphas = vec![beta];
    alphas.extend_from_slice(betas);
    let mut z = vec![lam * t.powf(beta)];
    z.extend(betas.iter().zip(bs).map(|(bj, b)| lam * b * t.powf(*bj)));
    let lt = |s: Complex64| {
        let mut kh = s.powf(-beta);
        for (bj, b) in betas.iter().zip(bs) {
            kh += *b * s.powf(-bj);
        }
        1.0 / (s * (1.0 - lam * kh))
    };
    multinomial_or_inverse(alphas, 1.0, &z, lt, t)
}

// Φ₂(t, λ) = 1 + λt^β E_{(β,β-β₁,…),β+1}(λt^β, -b₁t^{β-β₁}, …)
fn phi2(beta: f64, betas: &[f64], bs: &[f64], t: f64, lam: f64) -> Result<f64> {
    let mut alphas = vec![beta];
    alphas.extend(betas.iter().map(|bj| beta - bj));
    let mut z = vec![lam * t.powf(beta)];
    z.extend(betas.iter().zip(bs).map(|(bj, b)| -b * t.powf(beta - bj)));
    let p = MultinomialMLParams::new(alphas, beta + 1.0)?;
    if let Ok(o) = multinomial_ml_series(&p, &z, SeriesTolerance::default()) {
        if o.max_term <= 1e3 * o.value.abs() {
            return Ok(1.0 + lam * t.powf(beta) * o.value);
        }
    }
    if lam > 0.0 {
        return Err(Error::OutsideConvergenceDomain("Φ₂ series cancels at positive λ".into()));
    }
    // Laplace transform h/(σ(h - λ)) with h(σ) = σ^β + Σ b_j σ^{β_j}
    Ok(invert_laplace(
        |s: Complex64| {
            let mut h = s.powf(beta);
            for (bj, b) in betas.iter().zip(bs) {
                h += *b * s.powf(*bj);
            }
            h / (s * (h - lam))
        },
        t,
        32,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::recip_gamma;
    use proptest::prelude::*;

    #[test]
    fn trivial_values() {
        let k = Kernel::ggbm(0.8, 0.6).unwrap();
        let ev = PhiEvaluator::series(&k, 1.0).unwrap();
        assert_eq!(ev.eval(0.7, 0.0).unwrap(), 1.0);
        assert_eq!(ev.eval(0.0, -3.0).unwrap(), 1.0);
        assert_eq!(phi_closed(&k, 0.0, -3.0).unwrap(), 1.0);
        let k1 = Kernel::ggbm(0.9, 1.0).unwrap();
        assert!((phi_closed(&k1, 1.0, -1.0).unwrap() - (-1f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn msm_example_value() {
        // Γ(1.5) E_{0.5,1.5}(-1) by direct series with high-precision reference
        let k = Kernel::msm(2.0, 1.0, 0.5, 2.0).unwrap();
        assert_eq!(msm_q_params(2.0, 1.0, 0.5, 2.0), (0.5, 1.5, 1.0));
        let mut s = 0.0;
        for n in 0..80 {
            s += (-1f64).powi(n) * recip_gamma(0.5 * n as f64 + 1.5);
        }
        let v = phi_closed(&k, 1.0, -1.0).unwrap();
        assert!((v - gamma_fn(1.5) * s).abs() < 1e-13, "{v}");
    }

    #[test]
    fn series_matches_closed_forms() {
        for k in [Kernel::ggbm(0.8, 0.6).unwrap(), Kernel::msm(2.0, 1.0, 0.5, 2.0).unwrap()] {
            let ev = PhiEvaluator::series(&k, 1.0).unwrap();
            for &t in &[0.05, 0.5, 1.0] {
                for &lam in &[0.5, 2.0, 4.5, 5.0] {
                    let c = phi_closed(&k, t, -lam).unwrap();
                    match ev.eval(t, -lam) {
                        Ok(s) => assert!((s - c).abs() < 1e-8, "{k:?} t={t} λ={lam}: {s} {c}"),
                        // only the MSM series near λt^θ = 5 cancels beyond the guard
                        Err(Error::OutsideConvergenceDomain(_)) => assert!(k.theta() == Some(1.0) && lam * t > 4.0),
                        Err(e) => panic!("{e}"),
                    }
                }
            }
        }
    }

    #[test]
    fn series_guard_refuses_strong_cancellation() {
        let k = Kernel::ggbm(0.8, 0.6).unwrap();
        let ev = PhiEvaluator::series(&k, 10.0).unwrap();
        assert!(matches!(ev.eval(10.0, -40.0), Err(Error::OutsideConvergenceDomain(_)) | Err(Error::TruncationBudget(_))));
    }

    #[test]
    fn conv_power_sum_closed_form_matches_series() {
        let k = Kernel::conv_power_sum(0.8, vec![0.4], vec![0.5]).unwrap();
        let ev = PhiEvaluator::series(&k, 1.0).unwrap();
        for &(t, lam) in &[(0.3, 1.0), (1.0, 0.5), (1.0, 2.0)] {
            let s = ev.eval(t, -lam).unwrap();
            let c = phi_closed(&k, t, -lam).unwrap();
            assert!((s - c).abs() < 1e-8, "t={t} λ={lam}: {s} {c}");
        }
        // large λ goes through the Laplace inversion
        let big = phi_closed(&k, 1.0, -30.0).unwrap();
        assert!(big > 0.0 && big < 0.1, "{big}");
    }

    #[test]
    fn conv_multinomial_closed_form_matches_series() {
        let k = Kernel::conv_multinomial_ml(0.8, vec![0.3], vec![1.0]).unwrap();
        let ev = PhiEvaluator::series(&k, 1.0).unwrap();
        for &(t, lam) in &[(0.3, 1.0), (1.0, 0.5), (1.0, 2.0)] {
            let s = ev.eval(t, -lam).unwrap();
            let c = phi_closed(&k, t, -lam).unwrap();
            assert!((s - c).abs() < 1e-8, "t={t} λ={lam}: {s} {c}");
        }
    }

    #[test]
    fn conv_with_no_extra_terms_is_mittag_leffler() {
        let k = Kernel::conv_power_sum(0.7, vec![], vec![]).unwrap();
        let v = phi_closed(&k, 1.3, -2.0).unwrap();
        assert!((v - mittag_leffler(0.7, -2.0 * 1.3f64.powf(0.7)).unwrap()).abs() < 1e-13);
        let k2 = Kernel::conv_multinomial_ml(0.7, vec![], vec![]).unwrap();
        assert!((phi_closed(&k2, 1.3, -2.0).unwrap() - v).abs() < 1e-12);
    }

    #[test]
    fn custom_kernel_has_no_closed_form() {
        let k = Kernel::custom("flat", |_, _| 1.0, Some(1.0), 0.0, 0.0, true).unwrap();
        assert!(matches!(phi_closed(&k, 1.0, -1.0), Err(Error::NoClosedForm(_))));
        assert!(PhiEvaluator::new(&k, PhiMode::ClosedForm, 1.0).is_err());
        // but the series works: k ≡ 1 gives e^{λt}
        let v = phi_series(&k, 1.0, -1.0).unwrap();
        assert!((v - (-1f64).exp()).abs() < 1e-14);
    }

    static GGBM: std::sync::LazyLock<PhiEvaluator> =
        std::sync::LazyLock::new(|| PhiEvaluator::series(&Kernel::ggbm(0.8, 0.6).unwrap(), 1.0).unwrap());
    static MSM: std::sync::LazyLock<PhiEvaluator> =
        std::sync::LazyLock::new(|| PhiEvaluator::series(&Kernel::msm(2.0, 1.0, 0.5, 2.0).unwrap(), 1.0).unwrap());

    proptest! {
        #[test]
        fn homogeneous_scaling(t in 0.01f64..1.0, lam in 0.0f64..5.0) {
            let ev = &*GGBM;
            let a = ev.eval(t, -lam).unwrap();
            let b = ev.eval(1.0, -lam * t.powf(0.8)).unwrap();
            prop_assert!((a - b).abs() <= 1e-9);
        }

        #[test]
        fn series_in_unit_interval_and_monotone(t in 0.01f64..1.0, lam in 0.0f64..3.9) {
            let ev = &*MSM;
            let a = ev.eval(t, -lam).unwrap();
            let b = ev.eval(t, -lam - 0.1).unwrap();
            prop_assert!(a > 0.0 && a <= 1.0);
            prop_assert!(b <= a + 1e-12);
        }
    }
}
