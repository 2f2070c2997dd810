use serde::{Deserialize, Serialize};

use super::semigroup_quadrature;
use crate::error::{invalid, Error, Result};
use crate::fk::{InitialCondition, ProcessModel};
use crate::kernels::Kernel;
use crate::phi::{PhiEvaluator, PhiMode};

/// Symmetric trapezoid grid `ξ_j = -ξ_max + j h`, `h = 2ξ_max / n_modes`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralGrid {
    pub xi_max: f64,
    pub n_modes: usize,
}

impl SpectralGrid {
    /// Cut-off where `|û₀|` has dropped below `10⁻¹²` of its peak.
    pub fn for_u0(u0: &InitialCondition, n_modes: usize) -> Result<Self> {
        match u0 {
            InitialCondition::Gaussian { sd, .. } => Ok(Self { xi_max: (24.0 * 10f64.ln()).sqrt() / sd, n_modes }),
            InitialCondition::Callable { .. } => Err(invalid("the spectral oracle needs a Gaussian initial condition")),
        }
    }

    pub fn validate(&self, u0: &InitialCondition) -> Result<()> {
        if self.n_modes == 0 || !self.n_modes.is_multiple_of(2) || !(self.xi_max > 0.0 && self.xi_max.is_finite()) {
            return Err(invalid("spectral grid needs an even number of modes and finite ξ_max > 0"));
        }
        let (Some(edge), Some(peak)) = (u0.fourier(self.xi_max), u0.fourier(0.0)) else {
            return Err(invalid("the spectral oracle needs a Gaussian initial condition"));
        };
        if edge.norm() > 1e-12 * peak.norm() {
            return Err(invalid(format!("û₀ has not decayed at ξ_max = {}", self.xi_max)));
        }
        Ok(())
    }
}

/// Fourier symbol `ψ(ξ)` of the spatial operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Symbol {
    /// `-ξ²/2`
    HalfLaplacian,
    /// `-(ξ²/2)^γ`
    FracLaplacian { gamma: f64 },
    /// `-ξ²/2 + iwξ + c`
    LaplacianDriftPotential { w: f64, c: f64 },
}

impl Symbol {
    fn real(&self, xi: f64) -> f64 {
        let half = 0.5 * xi * xi;
        match self {
            Symbol::HalfLaplacian => -half,
            Symbol::FracLaplacian { gamma } => -half.powf(*gamma),
            Symbol::LaplacianDriftPotential { c, .. } => c - half,
        }
    }
}

/// `(2π)⁻¹ ∫ e^{ixξ} Φ(t, ψ(ξ)) û₀(ξ) dξ` by the trapezoid rule on `grid`.
///
/// A drift makes the symbol complex. That case is passed to [`semigroup_quadrature`],
/// which shifts the Gaussian semigroup instead of evaluating Φ off the real line.
pub fn spectral_solution(kernel: &Kernel, u0: &InitialCondition, symbol: Symbol, t: f64, x: f64, grid: SpectralGrid) -> Result<f64> {
    grid.validate(u0)?;
    if let Symbol::FracLaplacian { gamma } = symbol {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(invalid(format!("fractional Laplacian needs γ ∈ (0,1], got {gamma}")));
        }
    }
    if let Symbol::LaplacianDriftPotential { w, c } = symbol {
        if w != 0.0 {
            return semigroup_quadrature(kernel, u0, &ProcessModel::brownian(w), c, t, x).map_err(|e| match e {
                Error::DensityUnavailable(m) => {
                    Error::SymbolOutsideDomain(format!("drift needs Φ at complex arguments and {m}"))
                }
                e => e,
            });
        }
        if c > 0.0 {
            return Err(Error::SymbolOutsideDomain(format!("ψ(0) = {c} > 0 leaves the decay half-line of Φ")));
        }
    }
    if t == 0.0 {
        return Ok(u0.eval(x));
    }
    let ev = match PhiEvaluator::new(kernel, PhiMode::ClosedForm, t) {
        Ok(ev) => ev,
        Err(Error::NoClosedForm(_)) => PhiEvaluator::series(kernel, t)?,
        Err(e) => return Err(e),
    };
    let h = 2.0 * grid.xi_max / grid.n_modes as f64;
    let half = grid.n_modes / 2;
    // the integrand is even in ξ after taking real parts, so only j ≥ 0 is evaluated
    let mut terms = Vec::with_capacity(half + 1);
    for j in 0..=half {
        let xi = j as f64 * h;
        let u_hat = u0.fourier(xi).expect("validated Gaussian");
        let phase = num_complex::Complex64::from_polar(1.0, xi * x);
        let v = ev.eval_decay(t, -symbol.real(xi))? * (u_hat * phase).re;
        let weight = if j == 0 || j == half { 0.5 } else { 1.0 };
        terms.push(weight * v);
    }
    Ok(crate::quad::pairwise_sum(&terms) * 2.0 * h / (2.0 * std::f64::consts::PI))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fk::gaussian_density;

    fn grid() -> SpectralGrid {
        SpectralGrid::for_u0(&InitialCondition::gaussian(0.0, 1.0), 2048).unwrap()
    }

    #[test]
    fn heat_kernel_for_exponential_memory() {
        let k = Kernel::fractional_power(1.0).unwrap();
        let u0 = InitialCondition::gaussian(0.0, 1.0);
        let v = spectral_solution(&k, &u0, Symbol::HalfLaplacian, 1.0, 0.0, grid()).unwrap();
        assert!((v - gaussian_density(0.0, 2.0)).abs() < 1e-8, "{v}");
        let v = spectral_solution(&k, &u0, Symbol::LaplacianDriftPotential { w: 0.0, c: -0.3 }, 1.0, 0.7, grid()).unwrap();
        assert!((v - gaussian_density(0.7, 2.0) * (-0.3f64).exp()).abs() < 1e-8, "{v}");
    }

    #[test]
    fn agrees_with_mixing_quadrature() {
        let k = Kernel::ggbm(0.8, 0.6).unwrap();
        let u0 = InitialCondition::gaussian(0.0, 1.0);
        for (t, x) in [(0.5, 0.0), (1.0, 0.5)] {
            let s = spectral_solution(&k, &u0, Symbol::FracLaplacian { gamma: 1.0 }, t, x, grid()).unwrap();
            let q = semigroup_quadrature(&k, &u0, &ProcessModel::brownian(0.0), 0.0, t, x).unwrap();
            assert!((s - q).abs() < 1e-6, "({t},{x}): {s} {q}");
        }
    }

    #[test]
    fn even_data_give_even_solutions() {
        let k = Kernel::fractional_power(0.7).unwrap();
        let u0 = InitialCondition::gaussian(0.0, 1.0);
        let s = Symbol::FracLaplacian { gamma: 0.5 };
        let a = spectral_solution(&k, &u0, s, 1.0, 0.8, grid()).unwrap();
        let b = spectral_solution(&k, &u0, s, 1.0, -0.8, grid()).unwrap();
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn grid_checks() {
        let u0 = InitialCondition::gaussian(0.0, 1.0);
        assert!(SpectralGrid { xi_max: 8.0, n_modes: 7 }.validate(&u0).is_err());
        assert!(SpectralGrid { xi_max: 3.0, n_modes: 8 }.validate(&u0).is_err());
        assert!(grid().validate(&u0).is_ok());
    }
}
