use serde::Serialize;

use super::coefficients::{singular_rule, Resolution};
use super::Kernel;
use crate::error::{invalid, Error, Result};

/// Numerical estimate of `K_T = sup_{0<t≤T} t^{α*-1/(1+ε)} ‖k(t,·)‖_{L^{1+ε}(0,t)}`.
#[derive(Debug, Clone, Serialize)]
pub struct AdmissibilityReport {
    pub t_max: f64,
    pub epsilon: f64,
    pub alpha_star: f64,
    pub k_t: f64,
    /// Location of the supremum on the grid.
    pub t_argmax: f64,
    pub grid: String,
    /// Gauss nodes per panel of the finest rule used.
    pub refinement_nodes: usize,
    /// Relative change between the two finest rules.
    pub refinement_change: f64,
}

fn lq_norm(k: &Kernel, t: f64, q: f64, res: Resolution) -> Result<f64> {
    let (e0, et) = k.exponents();
    let (a, b) = (q * e0, q * et);
    if a <= -1.0 || b <= -1.0 {
        return Err(Error::NormDivergent(format!(
            "|k(t,·)|^{q} is not integrable: endpoint exponents {a:.4} and {b:.4} must exceed -1"
        )));
    }
    let mut acc = 0.0;
    for p in singular_rule(t, a, b, res) {
        acc += p.w * k.eval_gap(t, p.s, p.gap)?.abs().powf(q) / p.div;
    }
    Ok(acc.powf(1.0 / q))
}

pub fn verify_assumption_k(k: &Kernel, t_max: f64, epsilon: f64, alpha_star: f64, grid_size: usize) -> Result<AdmissibilityReport> {
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(invalid(format!("T must be > 0, got {t_max}")));
    }
    if !(epsilon > 0.0) {
        return Err(invalid(format!("ε must be > 0, got {epsilon}")));
    }
    if !(0.0..1.0).contains(&alpha_star) {
        return Err(invalid(format!("α* must lie in [0,1), got {alpha_star}")));
    }
    if grid_size < 2 {
        return Err(invalid("grid_size must be at least 2"));
    }
    let q = 1.0 + epsilon;
    let fine = Resolution::for_kernel(k);
    let coarse = fine.coarser();
    let decades = 6.0;
    let weighted = |t: f64, res: Resolution| -> Result<f64> { Ok(t.powf(alpha_star - 1.0 / q) * lq_norm(k, t, q, res)?) };
    let mut best = (f64::NEG_INFINITY, t_max);
    let mut change = 0.0f64;
    for i in 0..grid_size {
        let t = t_max * 10f64.powf(-decades * i as f64 / (grid_size - 1) as f64);
        let v = weighted(t, fine)?;
        let c = weighted(t, coarse)?;
        change = change.max((v - c).abs() / v.abs().max(f64::MIN_POSITIVE));
        if !v.is_finite() {
            return Err(Error::NormDivergent(format!("norm estimate is not finite at t = {t:.3e}")));
        }
        if v > best.0 {
            best = (v, t);
        }
    }
    if change > 1e-6 {
        return Err(Error::NormDivergent(format!("norm estimate changes by {change:.2e} under refinement")));
    }
    // growth toward t → 0 means the supremum is not attained
    let t_min = t_max * 10f64.powf(-decades);
    if best.1 <= t_min * (1.0 + 1e-12) {
        let deeper = weighted(t_min * 1e-3, fine)?;
        if deeper > best.0 * (1.0 + 1e-9) {
            return Err(Error::NormDivergent(format!(
                "t^{{α*-1/(1+ε)}}‖k(t,·)‖ grows as t → 0 ({:.4e} at t = {t_min:.1e}, {deeper:.4e} at t = {:.1e}); (ε, α*) inadmissible",
                best.0,
                t_min * 1e-3
            )));
        }
    }
    Ok(AdmissibilityReport {
        t_max,
        epsilon,
        alpha_star,
        k_t: best.0,
        t_argmax: best.1,
        grid: format!("{grid_size} log-spaced points on [{t_min:.1e}, {t_max}]"),
        refinement_nodes: fine.nodes,
        refinement_change: change,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::recip_gamma;

    #[test]
    fn fractional_power_closed_form() {
        // ‖(t-·)^{β-1}/Γ(β)‖_q = t^{β-1+1/q} / (Γ(β) (q(β-1)+1)^{1/q})
        let (beta, eps, astar) = (0.5, 0.5, 0.6);
        let q = 1.0 + eps;
        let k = Kernel::fractional_power(beta).unwrap();
        let r = verify_assumption_k(&k, 1.0, eps, astar, 25).unwrap();
        // exponent α* + β - 1 ≥ 0 so the supremum sits at T
        let exact = recip_gamma(beta) / (q * (beta - 1.0) + 1.0).powf(1.0 / q);
        assert!((r.k_t - exact).abs() < 1e-12 * exact, "{} {exact}", r.k_t);
        assert_eq!(r.t_argmax, 1.0);
    }

    #[test]
    fn constant_kernel_gives_t_to_alpha_star() {
        let k = Kernel::fractional_power(1.0).unwrap();
        let r = verify_assumption_k(&k, 3.0, 0.2, 0.3, 10).unwrap();
        assert!((r.k_t - 3f64.powf(0.3)).abs() < 1e-12);
    }

    #[test]
    fn divergent_pairs_are_reported() {
        let k = Kernel::fractional_power(0.5).unwrap();
        // (β-1)(1+ε) ≤ -1
        assert!(matches!(verify_assumption_k(&k, 1.0, 1.5, 0.6, 10), Err(Error::NormDivergent(_))));
        // α* + β - 1 < 0: blows up as t → 0
        assert!(matches!(verify_assumption_k(&k, 1.0, 0.5, 0.2, 10), Err(Error::NormDivergent(_))));
    }

    #[test]
    fn ggbm_matches_high_resolution_oracle() {
        let k = Kernel::ggbm(0.8, 0.6).unwrap();
        let (eps, astar) = (0.3, 0.5);
        let r = verify_assumption_k(&k, 1.0, eps, astar, 13).unwrap();
        // homogeneous: t^{α*-1/q}‖k(t,·)‖ = t^{α*+α-1}‖k(1,·)‖, so the supremum is at T
        let q = 1.0 + eps;
        let f = |s: f64| k.eval(1.0, s).unwrap().powf(q);
        // s = 1 - v² removes the singularity at s = 1
        let g = |v: f64| if v == 0.0 { 0.0 } else { 2.0 * v * k.eval_gap(1.0, 1.0 - v * v, v * v).unwrap().powf(q) };
        let v = crate::quad::integrate(&f, 0.0, 0.5, 1e-15).unwrap() + crate::quad::integrate(&g, 0.0, 0.5f64.sqrt(), 1e-15).unwrap();
        let oracle = v.powf(1.0 / q);
        assert!((r.k_t - oracle).abs() < 1e-7 * oracle, "{} {oracle}", r.k_t);
    }
}
