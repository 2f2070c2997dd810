use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::quad::gauss_legendre_composite;
use crate::sampling::{standard_stable, subordinator_path_until, BernsteinSpec, SeedSpec, Substream};
use crate::stats::mean_stderr;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DoubleLaplaceReport {
    pub sigma: f64,
    pub lambda: f64,
    pub lhs: f64,
    pub lhs_stderr: f64,
    pub rhs: f64,
    pub relative_deviation: f64,
    /// Horizon of the time integral, with `e^{-σT}/σ` below `10⁻⁶`.
    pub t_max: f64,
    pub paths: usize,
}

// passage steps per unit of the subordinator clock for the general case
const STEPS_PER_LEVEL: f64 = 4096.0;

/// `∫₀^∞ e^{-σt} E e^{-λE^h_t} dt` by Monte Carlo against `h(σ)/(σ(h(σ)+λ))`.
///
/// For `h = λ^γ` each path uses the exact marginal `E_t = (t/η₁)^γ` and a quadrature in `t`.
/// Otherwise one subordinator path is simulated up to the horizon and the time integral
/// is summed in closed form between its jumps.
pub fn double_laplace_identity(h: &BernsteinSpec, sigma: f64, lam: f64, paths: usize, seed: u64) -> Result<DoubleLaplaceReport> {
    h.validate()?;
    if !(sigma > 0.0 && lam >= 0.0 && paths >= 2) {
        return Err(crate::error::invalid("double Laplace check needs σ > 0, λ ≥ 0 and at least 2 paths"));
    }
    let hs = h.eval(sigma);
    let rhs = hs / (sigma * (hs + lam));
    let t_max = (1e6 / sigma).ln().max(1.0) / sigma;
    let values: Vec<f64> = match h {
        BernsteinSpec::Identity => vec![(1.0 - (-(sigma + lam) * t_max).exp()) / (sigma + lam); paths],
        BernsteinSpec::StablePower { gamma } => {
            let gamma = *gamma;
            let mut breaks: Vec<f64> = (0..=40).rev().map(|k| t_max * 0.5f64.powi(k)).collect();
            breaks.insert(0, 0.0);
            (0..paths)
                .into_par_iter()
                .map(|i| {
                    let s = standard_stable(gamma, &mut SeedSpec::new(seed, i as u64).rng(Substream::Passage));
                    let f = |t: f64| (-sigma * t - lam * (t / s).powf(gamma)).exp();
                    gauss_legendre_composite(&f, &breaks, 8)
                })
                .collect()
        }
        BernsteinSpec::DriftPlusStableSum { .. } => {
            let ds = 1.0 / (h.eval(1.0 / t_max) * STEPS_PER_LEVEL);
            (0..paths)
                .into_par_iter()
                .map(|i| {
                    let mut rng = SeedSpec::new(seed, i as u64).rng(Substream::Passage);
                    let eta = subordinator_path_until(h, t_max, ds, 64 * STEPS_PER_LEVEL as usize, &mut rng)?;
                    // E_t runs from (k-1)ds to k·ds on [η_{k-1}, η_k); the midpoint is used
                    let mut acc = 0.0;
                    for k in 1..eta.len() {
                        let (a, b) = (eta[k - 1].min(t_max), eta[k].min(t_max));
                        acc += (-lam * (k as f64 - 0.5) * ds).exp() * ((-sigma * a).exp() - (-sigma * b).exp()) / sigma;
                    }
                    Ok(acc)
                })
                .collect::<Result<Vec<f64>>>()?
        }
    };
    let m = mean_stderr(&values);
    Ok(DoubleLaplaceReport {
        sigma,
        lambda: lam,
        lhs: m.mean,
        lhs_stderr: m.stderr,
        rhs,
        relative_deviation: (m.mean - rhs).abs() / rhs,
        t_max,
        paths,
    })
}
