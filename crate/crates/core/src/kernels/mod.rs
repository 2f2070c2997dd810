//! Memory kernels `k(t, s)`, their admissibility estimate and the coefficient recursion.

mod admissibility;
mod coefficients;
mod spec;

use std::fmt;
use std::sync::Arc;

pub use admissibility::{verify_assumption_k, AdmissibilityReport};
pub(crate) use coefficients::homogeneous_unit_coefficients;
pub use coefficients::{integrate_against, phi_coefficients, singular_rule, CoefficientTable, Resolution, RulePoint};
pub use spec::{make_kernel, KernelSpec, StretchSpec};

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::specfun::{appell_f3, invert_laplace, multinomial_ml_series, recip_gamma, MultinomialMLParams, SeriesTolerance};

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type KernelFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Time-stretching `g` with derivative `ġ`.
#[derive(Clone)]
pub enum StretchFn {
    Identity,
    /// `g(τ) = τ^p`
    Power(f64),
    Custom { g: ScalarFn, g_dot: ScalarFn },
}

impl fmt::Debug for StretchFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StretchFn::Identity => write!(f, "Identity"),
            StretchFn::Power(p) => write!(f, "Power({p})"),
            StretchFn::Custom { .. } => write!(f, "Custom"),
        }
    }
}

impl StretchFn {
    pub fn custom(g: impl Fn(f64) -> f64 + Send + Sync + 'static, g_dot: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        StretchFn::Custom { g: Arc::new(g), g_dot: Arc::new(g_dot) }
    }

    pub fn g(&self, t: f64) -> f64 {
        match self {
            StretchFn::Identity => t,
            StretchFn::Power(p) => t.powf(*p),
            StretchFn::Custom { g, .. } => g(t),
        }
    }

    pub fn g_dot(&self, t: f64) -> f64 {
        match self {
            StretchFn::Identity => 1.0,
            StretchFn::Power(p) => p * t.powf(p - 1.0),
            StretchFn::Custom { g_dot, .. } => g_dot(t),
        }
    }

    /// `g(τ) - g(σ)` where `gap = τ - σ`, without cancellation for the built-in forms.
    pub fn diff(&self, tau: f64, sigma: f64, gap: f64) -> f64 {
        match self {
            StretchFn::Identity => gap,
            StretchFn::Power(p) => power_diff(tau, sigma, gap, *p),
            StretchFn::Custom { g, .. } => g(tau) - g(sigma),
        }
    }

    /// Checks the class conditions on a probe grid: `g(0) = 0`, `g, ġ > 0` and `g` increasing.
    pub fn validate(&self) -> Result<()> {
        if let StretchFn::Power(p) = self {
            if !(*p > 0.0) {
                return Err(invalid(format!("stretch exponent must be > 0, got {p}")));
            }
        }
        if self.g(0.0).abs() > 1e-12 {
            return Err(invalid("stretch must satisfy g(0) = 0"));
        }
        let mut prev = 0.0;
        for i in 0..=120 {
            let t = 10f64.powf(-6.0 + 0.075 * i as f64);
            let (g, gd) = (self.g(t), self.g_dot(t));
            if !(g > 0.0 && gd > 0.0 && g >= prev) || !g.is_finite() {
                return Err(invalid(format!("stretch violates g > 0, ġ > 0, g increasing at τ = {t:.3e}")));
            }
            prev = g;
        }
        Ok(())
    }
}

// τ^p - σ^p with σ = τ - gap
fn power_diff(t: f64, s: f64, gap: f64, p: f64) -> f64 {
    if p == 1.0 {
        return gap;
    }
    if gap < 0.5 * t {
        -t.powf(p) * (p * (-gap / t).ln_1p()).exp_m1()
    } else {
        t.powf(p) - s.powf(p)
    }
}

/// User-supplied kernel with its endpoint exponents.
#[derive(Clone)]
pub struct CustomKernel {
    pub f: KernelFn,
    pub theta: Option<f64>,
    pub e0: f64,
    pub et: f64,
    pub nonnegative: bool,
    pub label: String,
}

impl fmt::Debug for CustomKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Custom({})", self.label)
    }
}

#[derive(Clone, Debug)]
pub enum Family {
    Msm { a: f64, b: f64, mu: f64, nu: f64 },
    Ggbm { alpha: f64, beta: f64 },
    FractionalPower { beta: f64 },
    ConvPowerSum { beta: f64, betas: Vec<f64>, bs: Vec<f64> },
    ConvMultinomialMl { beta: f64, betas: Vec<f64>, bs: Vec<f64> },
    TimeStretched { base: Box<Kernel>, stretch: StretchFn },
    Custom(CustomKernel),
}

/// A validated memory kernel.
#[derive(Clone, Debug)]
pub struct Kernel {
    family: Family,
    theta: Option<f64>,
    coef: f64,
    // reciprocal gammas of the convolution exponents, in family order
    rg: Vec<f64>,
}

fn check_conv(beta: f64, betas: &[f64], bs: &[f64]) -> Result<()> {
    if betas.len() != bs.len() {
        return Err(invalid("convolution kernel needs as many weights b_j as exponents β_j"));
    }
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(invalid(format!("convolution kernel needs 1 ≥ β > 0, got β = {beta}")));
    }
    let mut prev = beta;
    for (j, &bj) in betas.iter().enumerate() {
        if !(bj < prev && bj > 0.0) {
            return Err(invalid(format!("convolution kernel needs 1 ≥ β > β_1 > … > β_m > 0, violated at β_{} = {bj}", j + 1)));
        }
        prev = bj;
    }
    if let Some(b) = bs.iter().find(|b| !(**b > 0.0)) {
        return Err(invalid(format!("convolution kernel weights must satisfy b_j > 0, got {b}")));
    }
    Ok(())
}

impl Kernel {
    pub fn msm(a: f64, b: f64, mu: f64, nu: f64) -> Result<Self> {
        if !(b > 0.0) {
            return Err(invalid(format!("MSM kernel needs b > 0, got b = {b}")));
        }
        if !(a >= b) {
            return Err(invalid(format!("MSM kernel needs a ≥ b, got a = {a}, b = {b}")));
        }
        if !(mu >= b / a - 1.0) {
            return Err(invalid(format!("MSM kernel needs μ ≥ b/a − 1, got μ = {mu}, b/a − 1 = {}", b / a - 1.0)));
        }
        let bound = (a - b).max(-a * mu);
        if !(nu > bound) {
            return Err(invalid(format!("MSM kernel needs ν > max{{a − b, −aμ}} = {bound}, got ν = {nu}")));
        }
        Ok(Self { family: Family::Msm { a, b, mu, nu }, theta: Some(b), coef: a * recip_gamma(b / a), rg: vec![] })
    }

    pub fn ggbm(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(invalid(format!("GGBM kernel needs α ∈ (0,2), got α = {alpha}")));
        }
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(invalid(format!("GGBM kernel needs β ∈ (0,1], got β = {beta}")));
        }
        let coef = alpha / beta * recip_gamma(beta);
        Ok(Self { family: Family::Ggbm { alpha, beta }, theta: Some(alpha), coef, rg: vec![] })
    }

    pub fn fractional_power(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(invalid(format!("fractional power kernel needs β ∈ (0,1], got β = {beta}")));
        }
        Ok(Self { family: Family::FractionalPower { beta }, theta: Some(beta), coef: recip_gamma(beta), rg: vec![] })
    }

    /// `𝔎₁(t) = t^{β-1}/Γ(β) + Σ b_j t^{β_j-1}/Γ(β_j)`.
    pub fn conv_power_sum(beta: f64, betas: Vec<f64>, bs: Vec<f64>) -> Result<Self> {
        check_conv(beta, &betas, &bs)?;
        let rg = betas.iter().map(|&b| recip_gamma(b)).collect();
        let theta = if betas.is_empty() { Some(beta) } else { None };
        Ok(Self { family: Family::ConvPowerSum { beta, betas, bs }, theta, coef: recip_gamma(beta), rg })
    }

    /// `𝔎₂(t) = t^{β-1} E_{(β-β_1,…,β-β_m),β}(-b_1 t^{β-β_1}, …)`.
    pub fn conv_multinomial_ml(beta: f64, betas: Vec<f64>, bs: Vec<f64>) -> Result<Self> {
        check_conv(beta, &betas, &bs)?;
        let theta = if betas.is_empty() { Some(beta) } else { None };
        Ok(Self { family: Family::ConvMultinomialMl { beta, betas, bs }, theta, coef: recip_gamma(beta), rg: vec![] })
    }

    pub fn time_stretched(base: Kernel, stretch: StretchFn) -> Result<Self> {
        stretch.validate()?;
        let theta = match (&stretch, base.theta) {
            (StretchFn::Identity, t) => t,
            (StretchFn::Power(p), Some(t)) => Some(p * t),
            _ => None,
        };
        Ok(Self { family: Family::TimeStretched { base: Box::new(base), stretch }, theta, coef: 1.0, rg: vec![] })
    }

    /// Kernel from a closure. `e0`, `et` are the power exponents at `s = 0` and `s = t`
    /// (0 when the kernel is bounded there).
    pub fn custom(
        label: &str,
        f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        theta: Option<f64>,
        e0: f64,
        et: f64,
        nonnegative: bool,
    ) -> Result<Self> {
        if !(e0 > -1.0 && et > -1.0) {
            return Err(invalid("custom kernel endpoint exponents must exceed -1"));
        }
        if let Some(t) = theta {
            if !(t > 0.0) {
                return Err(invalid("homogeneity degree θ must be > 0"));
            }
        }
        let c = CustomKernel { f: Arc::new(f), theta, e0, et, nonnegative, label: label.to_string() };
        Ok(Self { family: Family::Custom(c), theta, coef: 1.0, rg: vec![] })
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    /// Homogeneity parameter θ: `k(ct, cs) = c^{θ-1} k(t, s)`.
    pub fn theta(&self) -> Option<f64> {
        self.theta
    }

    pub fn is_nonnegative(&self) -> bool {
        match &self.family {
            Family::Custom(c) => c.nonnegative,
            Family::TimeStretched { base, .. } => base.is_nonnegative(),
            _ => true,
        }
    }

    /// True when the kernel is a convolution `𝔎(t - s)`.
    pub fn is_convolution(&self) -> bool {
        match &self.family {
            Family::FractionalPower { .. } | Family::ConvPowerSum { .. } | Family::ConvMultinomialMl { .. } => true,
            Family::TimeStretched { base, stretch: StretchFn::Identity } => base.is_convolution(),
            _ => false,
        }
    }

    /// Power exponents `(e0, et)` of the kernel at `s → 0` and `s → t`.
    pub fn exponents(&self) -> (f64, f64) {
        match &self.family {
            Family::FractionalPower { beta } => (0.0, beta - 1.0),
            Family::Ggbm { alpha, beta } => (alpha / beta - 1.0, beta - 1.0),
            Family::Msm { a, b, mu, nu } => {
                if nu == a {
                    (a - 1.0 + a * mu, b / a - 1.0)
                } else {
                    (nu - 1.0 + a * mu.min(b / a), b / a - 1.0)
                }
            }
            Family::ConvPowerSum { beta, betas, .. } => (0.0, betas.last().copied().unwrap_or(*beta) - 1.0),
            Family::ConvMultinomialMl { beta, .. } => (0.0, beta - 1.0),
            Family::TimeStretched { base, stretch } => {
                let (e0, et) = base.exponents();
                match stretch {
                    StretchFn::Power(p) => (p * e0 + p - 1.0, et),
                    _ => (e0, et),
                }
            }
            Family::Custom(c) => (c.e0, c.et),
        }
    }

    /// Whether `k(t, s) / (t-s)^{et}` is analytic near `s = t` (a single power singularity).
    pub fn end_is_single_power(&self) -> bool {
        match &self.family {
            Family::FractionalPower { .. } | Family::Ggbm { .. } | Family::Msm { .. } => true,
            Family::ConvPowerSum { betas, .. } | Family::ConvMultinomialMl { betas, .. } => betas.is_empty(),
            Family::TimeStretched { base, stretch } => {
                base.end_is_single_power() && !matches!(stretch, StretchFn::Custom { .. })
            }
            Family::Custom(_) => false,
        }
    }

    /// `k(t, s)` for `0 < s < t`.
    pub fn eval(&self, t: f64, s: f64) -> Result<f64> {
        if !(s > 0.0 && s < t) {
            return Err(Error::SingularPoint(format!("kernel evaluated at (t, s) = ({t}, {s}); need 0 < s < t")));
        }
        self.eval_gap(t, s, t - s)
    }

    /// `k(t, s)` given `gap = t - s` computed by the caller without cancellation.
    pub fn eval_gap(&self, t: f64, s: f64, gap: f64) -> Result<f64> {
        Ok(match &self.family {
            Family::FractionalPower { beta } => {
                if *beta == 1.0 {
                    1.0
                } else {
                    self.coef * gap.powf(beta - 1.0)
                }
            }
            Family::Ggbm { alpha, beta } => {
                let p = alpha / beta;
                let d = power_diff(t, s, gap, p);
                self.coef * s.powf(p - 1.0) * d.powf(beta - 1.0)
            }
            Family::Msm { a, b, mu, nu } => {
                let d = power_diff(t, s, gap, *a);
                if nu == a {
                    self.coef * d.powf(b / a - 1.0) * s.powf(a - 1.0) * (s / t).powf(a * mu)
                } else {
                    let x = d / t.powf(*a);
                    let y = -d / s.powf(*a);
                    let f3 = appell_f3(nu / a - 1.0, b / a, 1.0, *mu, b / a, x, y)?;
                    self.coef * d.powf(b / a - 1.0) * t.powf(a - nu) * s.powf(nu - 1.0) * f3
                }
            }
            Family::ConvPowerSum { beta, betas, bs } => {
                let mut v = self.coef * gap.powf(beta - 1.0);
                for j in 0..betas.len() {
                    v += bs[j] * self.rg[j] * gap.powf(betas[j] - 1.0);
                }
                v
            }
            Family::ConvMultinomialMl { beta, betas, bs } => conv_ml_kernel(*beta, betas, bs, gap)?,
            Family::TimeStretched { base, stretch } => {
                let gt = stretch.g(t);
                let gs = stretch.g(s);
                base.eval_gap(gt, gs, stretch.diff(t, s, gap))? * stretch.g_dot(s)
            }
            Family::Custom(c) => (c.f)(t, s),
        })
    }
}

fn conv_ml_kernel(beta: f64, betas: &[f64], bs: &[f64], gap: f64) -> Result<f64> {
    let z: Vec<f64> = betas.iter().zip(bs).map(|(bj, b)| -b * gap.powf(beta - bj)).collect();
    if z.iter().all(|v| v.abs() <= 0.5) {
        let p = MultinomialMLParams::new(betas.iter().map(|bj| beta - bj).collect(), beta)?;
        let o = multinomial_ml_series(&p, &z, SeriesTolerance::default())?;
        return Ok(gap.powf(beta - 1.0) * o.value);
    }
    // Laplace transform of 𝔎₂ is 1/(σ^β + Σ b_j σ^{β_j})
    Ok(invert_laplace(
        |s: Complex64| {
            let mut h = s.powf(beta);
            for (bj, b) in betas.iter().zip(bs) {
                h += *b * s.powf(*bj);
            }
            1.0 / h
        },
        gap,
        32,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ggbm_reference_value() {
        let k = Kernel::ggbm(0.5, 0.5).unwrap();
        let v = k.eval(1.0, 0.5).unwrap();
        assert!((v - 0.797_884_560_802_865_4).abs() < 1e-14);
        assert_eq!(k.theta(), Some(0.5));
    }

    #[test]
    fn fractional_power_one_is_constant() {
        let k = Kernel::fractional_power(1.0).unwrap();
        assert_eq!(k.eval(3.0, 1.2).unwrap(), 1.0);
        assert_eq!(k.theta(), Some(1.0));
    }

    #[test]
    fn msm_constraint_messages() {
        let e = Kernel::msm(1.0, 1.5, 0.0, 1.0).unwrap_err();
        assert!(e.to_string().contains("a ≥ b"), "{e}");
        let e = Kernel::msm(2.0, 1.0, -0.9, 2.0).unwrap_err();
        assert!(e.to_string().contains("μ ≥ b/a − 1"), "{e}");
        let e = Kernel::msm(2.0, 1.0, 0.5, 0.5).unwrap_err();
        assert!(e.to_string().contains("ν > max"), "{e}");
    }

    #[test]
    fn msm_reduces_to_ggbm() {
        let (alpha, beta) = (0.8, 0.6);
        let g = Kernel::ggbm(alpha, beta).unwrap();
        let m = Kernel::msm(alpha / beta, alpha, 0.0, alpha / beta).unwrap();
        for &t in &[0.3, 1.0, 2.7] {
            for &r in &[0.01, 0.3, 0.77, 0.999] {
                let (a, b) = (g.eval(t, r * t).unwrap(), m.eval(t, r * t).unwrap());
                assert!((a - b).abs() < 1e-13 * a.abs(), "{t} {r}: {a} {b}");
            }
        }
    }

    #[test]
    fn msm_example_closed_form() {
        // MSM(2,1,0.5,2): k = (2/√π) s² / (t √(t² − s²))
        let k = Kernel::msm(2.0, 1.0, 0.5, 2.0).unwrap();
        let (t, s) = (1.3, 0.4);
        let exact = 2.0 / std::f64::consts::PI.sqrt() * s * s / (t * (t * t - s * s).sqrt());
        assert!((k.eval(t, s).unwrap() - exact).abs() < 1e-14);
    }

    #[test]
    fn msm_general_nu_uses_appell_series() {
        // ν ≠ a: compare the F3 route with a direct numerical double sum at a convergent point
        let (a, b, mu, nu) = (2.0, 1.0, 0.5, 2.5);
        let k = Kernel::msm(a, b, mu, nu).unwrap();
        let (t, s) = (1.0f64, 0.9f64);
        let x = 1.0 - (s / t).powf(a);
        let y = 1.0 - (t / s).powf(a);
        let mut f3 = 0.0;
        for m in 0..200 {
            for n in 0..200 {
                let (m, n) = (m as f64, n as f64);
                let l = poch_ln(nu / a - 1.0, m) + poch_ln(1.0, m) + poch_ln(b / a, n) + poch_ln(mu, n)
                    - poch_ln(b / a, m + n)
                    - libm::lgamma(m + 1.0)
                    - libm::lgamma(n + 1.0);
                f3 += l.exp() * x.powf(m) * y.powf(n);
            }
        }
        let exact = a * recip_gamma(b / a) * (t.powf(a) - s.powf(a)).powf(b / a - 1.0) * t.powf(a - nu) * s.powf(nu - 1.0) * f3;
        assert!((k.eval(t, s).unwrap() - exact).abs() < 1e-10 * exact.abs());

        fn poch_ln(x: f64, n: f64) -> f64 {
            libm::lgamma(x + n) - libm::lgamma(x)
        }
    }

    #[test]
    fn stretched_fractional_power() {
        let beta = 0.6;
        let k = Kernel::time_stretched(Kernel::fractional_power(beta).unwrap(), StretchFn::Power(2.0)).unwrap();
        let (tau, sigma) = (1.4f64, 0.5f64);
        let exact = (tau * tau - sigma * sigma).powf(beta - 1.0) * 2.0 * sigma * recip_gamma(beta);
        assert!((k.eval(tau, sigma).unwrap() - exact).abs() < 1e-13 * exact);
        assert_eq!(k.theta(), Some(1.2));
    }

    #[test]
    fn conv_ml_kernel_branches_agree() {
        let (beta, betas, bs) = (0.8, vec![0.3], vec![1.0]);
        // at gap where |z| ≈ 0.45 both branches are accurate
        let gap = 0.45f64.powf(1.0 / 0.5);
        let series = conv_ml_kernel(beta, &betas, &bs, gap).unwrap();
        let contour = invert_laplace(|s: Complex64| 1.0 / (s.powf(beta) + s.powf(0.3)), gap, 32);
        assert!((series - contour).abs() < 1e-12 * series.abs());
    }
}
