use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::kernels::ScalarFn;
use crate::sampling::{standard_stable, BernsteinSpec};

// step of the flow integration inside the Monte Carlo loops
const FLOW_STEP: f64 = 0.01;

/// Diffusion coefficient of the Doss–Sussmann model.
#[derive(Clone)]
pub enum Sigma {
    Constant(f64),
    /// `σ(x) = offset + amplitude·sin(x)`
    Sine { offset: f64, amplitude: f64 },
    Custom { f: ScalarFn, label: String },
}

impl fmt::Debug for Sigma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sigma::Constant(s) => write!(f, "Constant({s})"),
            Sigma::Sine { offset, amplitude } => write!(f, "Sine({offset} + {amplitude} sin x)"),
            Sigma::Custom { label, .. } => write!(f, "Custom({label})"),
        }
    }
}

impl Sigma {
    pub fn custom(label: &str, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Sigma::Custom { f: Arc::new(f), label: label.to_string() }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Sigma::Constant(s) => *s,
            Sigma::Sine { offset, amplitude } => offset + amplitude * x.sin(),
            Sigma::Custom { f, .. } => f(x),
        }
    }

    /// Bounds on `|σ|, |σ'|, |σ''|` over a probe grid on `[-r, r]`.
    pub fn probe_bounds(&self, r: f64) -> [f64; 3] {
        let h = 1e-3;
        let n = 4000;
        let mut b = [0.0f64; 3];
        for i in 0..=n {
            let x = -r + 2.0 * r * i as f64 / n as f64;
            let (l, c, rr) = (self.eval(x - h), self.eval(x), self.eval(x + h));
            b[0] = b[0].max(c.abs());
            b[1] = b[1].max(((rr - l) / (2.0 * h)).abs());
            b[2] = b[2].max(((rr - 2.0 * c + l) / (h * h)).abs());
        }
        b
    }

    /// Rejects σ whose value or first two derivatives are not finite on the probe grid
    /// or keep growing between `[-25, 25]` and `[-50, 50]`.
    pub fn validate(&self) -> Result<()> {
        let (inner, outer) = (self.probe_bounds(25.0), self.probe_bounds(50.0));
        for k in 0..3 {
            if !outer[k].is_finite() || outer[k] > 1.5 * inner[k] + 1e-6 {
                return Err(invalid(format!(
                    "σ must be bounded with bounded first and second derivatives; probe bounds {inner:?} on [-25,25], {outer:?} on [-50,50]"
                )));
            }
        }
        Ok(())
    }
}

fn rk4(sigma: &Sigma, y: f64, x: f64, n: usize) -> f64 {
    let h = y / n as f64;
    let mut g = x;
    for _ in 0..n {
        let k1 = sigma.eval(g);
        let k2 = sigma.eval(g + 0.5 * h * k1);
        let k3 = sigma.eval(g + 0.5 * h * k2);
        let k4 = sigma.eval(g + h * k3);
        g += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    g
}

/// `g_σ(y, x)` with `∂_y g = σ(g)`, `g(0, x) = x`, by `ode_steps` classical Runge–Kutta steps.
///
/// The local error is estimated against half as many steps; the call fails when the
/// estimate exceeds `1e-8·max(1, |g|)`.
pub fn doss_sussmann_flow(sigma: &Sigma, y: f64, x: f64, ode_steps: usize) -> Result<f64> {
    if ode_steps < 2 {
        return Err(invalid("the flow needs at least 2 steps"));
    }
    if y == 0.0 {
        return Ok(x);
    }
    if let Sigma::Constant(s) = sigma {
        return Ok(x + s * y);
    }
    let fine = rk4(sigma, y, x, ode_steps);
    let coarse = rk4(sigma, y, x, ode_steps / 2);
    let est = (fine - coarse).abs() / 15.0;
    if !(est <= 1e-8 * fine.abs().max(1.0)) {
        return Err(Error::StepCountInsufficient(format!(
            "flow at y = {y} with {ode_steps} steps has error estimate {est:.3e}"
        )));
    }
    Ok(fine)
}

// flow with a fixed step, for the samplers
pub(crate) fn flow(sigma: &Sigma, y: f64, x: f64) -> f64 {
    match sigma {
        Sigma::Constant(s) => x + s * y,
        _ if y == 0.0 => x,
        _ => rk4(sigma, y, x, ((y.abs() / FLOW_STEP).ceil() as usize).max(4)),
    }
}

/// The Markov process `ξ` before subordination.
#[derive(Debug, Clone)]
pub enum BaseProcess {
    /// `ξ_t = x + B_t + w t`
    BrownianDrift { w: f64 },
    /// Symmetric stable with `E e^{iuY_t} = e^{-t (u²/2)^{δ/2}}`; δ = 2 is Brownian motion.
    StableLevy { delta: f64 },
    /// `ξ_t = g_σ(B_t + w t, x)`, the Stratonovich solution of `dξ = σ(ξ)∘dB + wσ(ξ)dt`.
    DossSussmann { sigma: Sigma, w: f64 },
}

impl BaseProcess {
    pub fn validate(&self) -> Result<()> {
        match self {
            BaseProcess::BrownianDrift { w } if !w.is_finite() => Err(invalid("drift must be finite")),
            BaseProcess::StableLevy { delta } if !(*delta > 0.0 && *delta <= 2.0) => {
                Err(invalid(format!("stable index must satisfy δ ∈ (0,2], got {delta}")))
            }
            BaseProcess::DossSussmann { sigma, w } => {
                if !w.is_finite() {
                    return Err(invalid("drift must be finite"));
                }
                sigma.validate()
            }
            _ => Ok(()),
        }
    }

    /// Advances the driving coordinate by an operational time `dtau`.
    pub(crate) fn advance<R: Rng + ?Sized>(&self, y: f64, dtau: f64, rng: &mut R) -> f64 {
        if dtau == 0.0 {
            return y;
        }
        let z: f64 = rng.sample(StandardNormal);
        match self {
            BaseProcess::BrownianDrift { w } | BaseProcess::DossSussmann { w, .. } => y + w * dtau + dtau.sqrt() * z,
            BaseProcess::StableLevy { delta } => {
                // B at a (δ/2)-stable time: E e^{-λS} = e^{-λ^{δ/2}}
                let s = standard_stable(delta / 2.0, rng);
                y + (dtau.powf(2.0 / delta) * s).sqrt() * z
            }
        }
    }

    /// `ξ` as a function of its driving coordinate and starting point.
    pub(crate) fn observe(&self, y: f64, x0: f64) -> f64 {
        match self {
            BaseProcess::DossSussmann { sigma, .. } => flow(sigma, y, x0),
            _ => x0 + y,
        }
    }
}

/// Base process with optional Bochner subordination.
#[derive(Debug, Clone)]
pub struct ProcessModel {
    pub base: BaseProcess,
    pub subordination: BernsteinSpec,
}

impl ProcessModel {
    pub fn new(base: BaseProcess, subordination: BernsteinSpec) -> Result<Self> {
        base.validate()?;
        subordination.validate()?;
        Ok(Self { base, subordination })
    }

    pub fn brownian(w: f64) -> Self {
        Self { base: BaseProcess::BrownianDrift { w }, subordination: BernsteinSpec::Identity }
    }
}

#[derive(Clone)]
pub enum PotentialSpec {
    Zero,
    Constant { c: f64 },
    /// `V` with a recorded bound `sup V ≤ sup_bound`.
    Callable { v: ScalarFn, sup_bound: f64, label: String },
}

impl fmt::Debug for PotentialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PotentialSpec::Zero => write!(f, "Zero"),
            PotentialSpec::Constant { c } => write!(f, "Constant({c})"),
            PotentialSpec::Callable { label, sup_bound, .. } => write!(f, "Callable({label}, sup ≤ {sup_bound})"),
        }
    }
}

impl PotentialSpec {
    pub fn callable(label: &str, sup_bound: f64, v: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        PotentialSpec::Callable { v: Arc::new(v), sup_bound, label: label.to_string() }
    }

    /// Upper bound of `V`.
    pub fn sup(&self) -> f64 {
        match self {
            PotentialSpec::Zero => 0.0,
            PotentialSpec::Constant { c } => *c,
            PotentialSpec::Callable { sup_bound, .. } => *sup_bound,
        }
    }

    /// Checks `sup V ≤ 0` under subordination and the recorded bound on a probe grid.
    pub fn validate(&self, subordinated: bool) -> Result<()> {
        if !self.sup().is_finite() {
            return Err(invalid("potential bound must be finite"));
        }
        if subordinated && self.sup() > 0.0 {
            return Err(Error::InvariantViolation(format!(
                "a subordinated process needs V ≤ 0, got sup V ≤ {}",
                self.sup()
            )));
        }
        if let PotentialSpec::Callable { v, sup_bound, .. } = self {
            for i in 0..=2000 {
                let x = -50.0 + 0.05 * i as f64;
                let val = v(x);
                if !(val <= *sup_bound) {
                    return Err(Error::InvariantViolation(format!("V({x}) = {val} exceeds the recorded bound {sup_bound}")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone)]
pub enum InitialCondition {
    /// `mass` times the normal density with the given mean and standard deviation.
    Gaussian { mean: f64, sd: f64, mass: f64 },
    Callable { f: ScalarFn, bound: f64, label: String },
}

impl fmt::Debug for InitialCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialCondition::Gaussian { mean, sd, mass } => write!(f, "Gaussian({mean}, {sd}, {mass})"),
            InitialCondition::Callable { label, .. } => write!(f, "Callable({label})"),
        }
    }
}

impl InitialCondition {
    pub fn gaussian(mean: f64, sd: f64) -> Self {
        InitialCondition::Gaussian { mean, sd, mass: 1.0 }
    }

    pub fn callable(label: &str, bound: f64, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        InitialCondition::Callable { f: Arc::new(f), bound, label: label.to_string() }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            InitialCondition::Gaussian { mean, sd, mass } => {
                if !(sd > &0.0 && mean.is_finite() && mass.is_finite()) {
                    return Err(invalid("Gaussian initial condition needs sd > 0 and finite mean and mass"));
                }
                Ok(())
            }
            InitialCondition::Callable { bound, .. } if !(bound.is_finite() && *bound >= 0.0) => {
                Err(invalid("callable initial condition needs a finite bound"))
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            InitialCondition::Gaussian { mean, sd, mass } => gaussian_density(x - mean, sd * sd) * mass,
            InitialCondition::Callable { f, .. } => f(x),
        }
    }

    /// `E u₀(x + wa + √a Z)`, available for the Gaussian class.
    pub fn heat_semigroup(&self, a: f64, w: f64, x: f64) -> Option<f64> {
        match self {
            InitialCondition::Gaussian { mean, sd, mass } => Some(mass * gaussian_density(x + w * a - mean, sd * sd + a)),
            InitialCondition::Callable { .. } => None,
        }
    }

    /// `∫ e^{-ixξ} u₀(x) dx` for the Gaussian class.
    pub fn fourier(&self, xi: f64) -> Option<num_complex::Complex64> {
        match self {
            InitialCondition::Gaussian { mean, sd, mass } => {
                Some(num_complex::Complex64::from_polar(mass * (-0.5 * sd * sd * xi * xi).exp(), -xi * mean))
            }
            InitialCondition::Callable { .. } => None,
        }
    }
}

pub(crate) fn gaussian_density(x: f64, var: f64) -> f64 {
    (-0.5 * x * x / var).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{SeedSpec, Substream};
    use crate::stats::mean_stderr;

    #[test]
    fn constant_flow_is_linear() {
        assert_eq!(doss_sussmann_flow(&Sigma::Constant(1.5), 2.0, 0.5, 8).unwrap(), 3.5);
        let s = Sigma::Sine { offset: 2.0, amplitude: 1.0 };
        assert_eq!(doss_sussmann_flow(&s, 0.0, 0.7, 8).unwrap(), 0.7);
    }

    #[test]
    fn flow_fourth_order() {
        let s = Sigma::Sine { offset: 2.0, amplitude: 1.0 };
        let reference = rk4(&s, 1.0, 0.0, 4096);
        let e1 = (rk4(&s, 1.0, 0.0, 8) - reference).abs();
        let e2 = (rk4(&s, 1.0, 0.0, 16) - reference).abs();
        let order = (e1 / e2).log2();
        assert!((3.6..4.4).contains(&order), "order {order}");
        assert!(doss_sussmann_flow(&s, 1.0, 0.0, 64).is_ok());
        assert!(matches!(doss_sussmann_flow(&s, 1.0, 0.0, 2), Err(Error::StepCountInsufficient(_))));
        assert!((flow(&s, 1.0, 0.0) - reference).abs() < 1e-9);
    }

    #[test]
    fn flow_solves_the_ode() {
        // σ(x) = x has the flow g(y, x) = x e^y; bounded only on the probe scale, fine for the ODE check
        let s = Sigma::custom("id", |x| x);
        let g = doss_sussmann_flow(&s, 0.8, 1.3, 64).unwrap();
        assert!((g - 1.3 * 0.8f64.exp()).abs() < 1e-9);
        assert!(s.validate().is_err());
        assert!(Sigma::Sine { offset: 2.0, amplitude: 1.0 }.validate().is_ok());
    }

    #[test]
    fn stable_levy_characteristic_function() {
        let p = BaseProcess::StableLevy { delta: 1.5 };
        let v: Vec<f64> = (0..100_000).map(|i| p.advance(0.0, 1.0, &mut SeedSpec::new(6, i).rng(Substream::Noise)).cos()).collect();
        let m = mean_stderr(&v);
        let exact = (-(0.5f64).powf(0.75)).exp();
        assert!((m.mean - exact).abs() < 3.0 * m.stderr, "{} vs {exact}", m.mean);
    }

    #[test]
    fn potential_constraints() {
        assert!(PotentialSpec::Constant { c: 0.3 }.validate(false).is_ok());
        assert!(matches!(PotentialSpec::Constant { c: 0.3 }.validate(true), Err(Error::InvariantViolation(_))));
        let v = PotentialSpec::callable("well", 0.0, |x| -(-x * x).exp());
        assert!(v.validate(true).is_ok());
        let bad = PotentialSpec::callable("bad", -0.5, |x| -(-x * x).exp());
        assert!(bad.validate(false).is_err());
    }

    #[test]
    fn gaussian_initial_condition() {
        let u = InitialCondition::gaussian(0.5, 2.0);
        assert!((u.eval(0.5) - 1.0 / (2.0 * (2.0 * std::f64::consts::PI).sqrt())).abs() < 1e-15);
        // T_a u₀ is the density of N(mean - wa, sd² + a)
        assert!((u.heat_semigroup(1.0, 0.5, 0.0).unwrap() - gaussian_density(0.0, 5.0)).abs() < 1e-15);
        assert!((u.fourier(0.0).unwrap().re - 1.0).abs() < 1e-15);
    }
}
