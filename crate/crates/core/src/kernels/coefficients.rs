use rayon::prelude::*;

use super::Kernel;
use crate::error::{invalid, Error, Result};
use crate::quad::{barycentric_weights, jacobi_exponent, jacobi_rule, lagrange_basis, panel_points, QPoint};

/// A point of a composite rule for `∫_0^τ h(s) ds ≈ Σ w h(s) / div`.
///
/// `div` is the product of the endpoint power factors already carried by `w`.
#[derive(Debug, Clone, Copy)]
pub struct RulePoint {
    pub s: f64,
    pub gap: f64,
    pub w: f64,
    pub div: f64,
}

/// Quadrature resolution used by the coefficient recursion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resolution {
    /// Gauss nodes per panel.
    pub nodes: usize,
    /// Number of dyadic panels between `T/2^depth` and `T`.
    pub depth: usize,
    /// Number of dyadic refinements toward `s = t`.
    pub end_levels: usize,
}

impl Resolution {
    pub fn for_kernel(k: &Kernel) -> Self {
        Self { nodes: 16, depth: 60, end_levels: if k.end_is_single_power() { 4 } else { 40 } }
    }

    /// A cheaper resolution used to estimate the discretization error.
    pub fn coarser(&self) -> Self {
        Self { nodes: self.nodes - 4, depth: self.depth * 3 / 4, end_levels: self.end_levels * 3 / 4 }
    }
}

fn push_points(pts: &[QPoint], el: f64, er: f64, out: &mut Vec<RulePoint>) {
    for p in pts {
        let mut div = 1.0;
        if el != 0.0 {
            div *= p.s.powf(el);
        }
        if er != 0.0 {
            div *= p.gap.powf(er);
        }
        out.push(RulePoint { s: p.s, gap: p.gap, w: p.w, div });
    }
}

/// Composite rule on `[0, τ]` for integrands behaving like `s^{e_left}` at 0 and
/// `(τ-s)^{e_right}` at τ, graded dyadically toward both ends.
pub fn singular_rule(tau: f64, e_left: f64, e_right: f64, res: Resolution) -> Vec<RulePoint> {
    let n = res.nodes;
    let e_left = jacobi_exponent(e_left);
    let mut out = Vec::with_capacity(n * (res.depth + res.end_levels + 2));
    let mut pts = Vec::with_capacity(n);
    // bottom panel and dyadic panels up to τ/2
    let bottom = tau * 0.5f64.powi(res.depth as i32 + 1);
    panel_points(n, 0.0, bottom, e_left, 0.0, tau - bottom, &mut pts);
    push_points(&pts, e_left, 0.0, &mut out);
    for k in (1..=res.depth).rev() {
        let lo = tau * 0.5f64.powi(k as i32 + 1);
        let hi = 2.0 * lo;
        pts.clear();
        panel_points(n, lo, hi, 0.0, 0.0, tau - hi, &mut pts);
        push_points(&pts, 0.0, 0.0, &mut out);
    }
    // [τ/2, τ] graded by gap
    let mut g_hi = 0.5 * tau;
    for _ in 0..res.end_levels {
        let g_lo = 0.5 * g_hi;
        pts.clear();
        panel_points(n, tau - g_hi, tau - g_lo, 0.0, 0.0, g_lo, &mut pts);
        push_points(&pts, 0.0, 0.0, &mut out);
        g_hi = g_lo;
    }
    pts.clear();
    panel_points(n, tau - g_hi, tau, 0.0, e_right, 0.0, &mut pts);
    push_points(&pts, 0.0, e_right, &mut out);
    out
}

/// `∫_0^τ k(τ, s) f(s) ds` where `f(s)` behaves like `s^{f_exp}` near 0.
pub fn integrate_against(k: &Kernel, tau: f64, f: impl Fn(f64) -> f64, f_exp: f64, res: Resolution) -> Result<f64> {
    let (e0, et) = k.exponents();
    let mut acc = 0.0;
    for p in singular_rule(tau, e0 + f_exp, et, res) {
        acc += p.w * k.eval_gap(tau, p.s, p.gap)? * f(p.s) / p.div;
    }
    Ok(acc)
}

#[derive(Debug)]
struct Panel {
    lo: f64,
    start: usize,
    nodes: Vec<f64>,
    bw: Vec<f64>,
    // weights and divisors for integrating over the whole panel
    w: Vec<f64>,
    div: Vec<f64>,
}

/// `cₙ` tabulated on collocation nodes covering `[0, T]`.
///
/// Built by `cₙ = Q c_{n-1}` where row `i` of `Q` integrates `k(τᵢ, ·)` against the
/// piecewise polynomial interpolant of the previous level.
#[derive(Debug)]
pub struct CoefficientTable {
    kernel: Kernel,
    t_max: f64,
    res: Resolution,
    panels: Vec<Panel>,
    nodes: Vec<f64>,
    levels: Vec<Vec<f64>>,
}

impl CoefficientTable {
    pub fn build(kernel: &Kernel, t_max: f64, n_max: usize) -> Result<Self> {
        Self::build_with(kernel, t_max, n_max, Resolution::for_kernel(kernel))
    }

    pub fn build_with(kernel: &Kernel, t_max: f64, n_max: usize, res: Resolution) -> Result<Self> {
        if !(t_max > 0.0 && t_max.is_finite()) {
            return Err(invalid(format!("coefficient table needs T > 0, got {t_max}")));
        }
        let e0 = jacobi_exponent(kernel.exponents().0);
        let n = res.nodes;
        let gl = jacobi_rule(n, 0.0, 0.0);
        let mut panels = Vec::with_capacity(res.depth + 1);
        let mut nodes = Vec::new();
        for j in 0..res.depth {
            let hi = t_max * 0.5f64.powi(j as i32);
            let lo = 0.5 * hi;
            let half = 0.5 * (hi - lo);
            let pn: Vec<f64> = gl.one_plus.iter().map(|x| lo + half * x).collect();
            let w: Vec<f64> = gl.weights.iter().map(|w| w * half).collect();
            panels.push(Panel { lo, start: nodes.len(), bw: barycentric_weights(&pn), div: vec![1.0; n], nodes: pn.clone(), w });
            nodes.extend(pn);
        }
        let bottom = t_max * 0.5f64.powi(res.depth as i32);
        let mut pts = Vec::new();
        panel_points(n, 0.0, bottom, e0, 0.0, 0.0, &mut pts);
        let pn: Vec<f64> = pts.iter().map(|p| p.s).collect();
        panels.push(Panel {
            lo: 0.0,
            start: nodes.len(),
            bw: barycentric_weights(&pn),
            w: pts.iter().map(|p| p.w).collect(),
            div: pn.iter().map(|s| if e0 != 0.0 { s.powf(e0) } else { 1.0 }).collect(),
            nodes: pn.clone(),
        });
        nodes.extend(pn);

        let mut table = Self { kernel: kernel.clone(), t_max, res, panels, nodes, levels: vec![] };
        let m = table.nodes.len();
        let rows: Vec<Vec<f64>> = table.nodes.par_iter().map(|&t| table.row(t)).collect::<Result<_>>()?;
        let mut levels = vec![vec![1.0; m]];
        for lvl in 1..=n_max {
            let prev = &levels[lvl - 1];
            let next: Vec<f64> = rows.iter().map(|r| dot(r, prev)).collect();
            if next.iter().any(|v| !v.is_finite()) {
                return Err(Error::Quadrature(format!("coefficient c_{lvl} is not finite")));
            }
            levels.push(next);
        }
        table.levels = levels;
        Ok(table)
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn n_max(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn resolution(&self) -> Resolution {
        self.res
    }

    fn find(&self, tau: f64) -> usize {
        let last = self.panels.len() - 1;
        if tau <= self.panels[last - 1].lo {
            return last;
        }
        let mut j = ((self.t_max / tau).log2().floor().max(0.0) as usize).min(last);
        while j < last && tau < self.panels[j].lo {
            j += 1;
        }
        while j > 0 && tau >= self.panels[j - 1].lo {
            j -= 1;
        }
        j
    }

    /// Row of the integration operator at `τ`: `∫_0^τ k(τ,s) c(s) ds ≈ row · c(nodes)`.
    fn row(&self, tau: f64) -> Result<Vec<f64>> {
        let k = &self.kernel;
        let (e0, et) = k.exponents();
        let e0 = jacobi_exponent(e0);
        let last = self.panels.len() - 1;
        let n = self.res.nodes;
        let mut row = vec![0.0; self.nodes.len()];
        let j = self.find(tau);
        for p in &self.panels[(j + 2).min(last + 1)..] {
            for i in 0..p.nodes.len() {
                let s = p.nodes[i];
                row[p.start + i] += p.w[i] / p.div[i] * k.eval_gap(tau, s, tau - s)?;
            }
        }
        // near region [a, τ], graded toward τ and split where panel j begins
        let a = if j < last { self.panels[j + 1].lo } else { 0.0 };
        let g_a = tau - a;
        let mut gaps = vec![g_a, 0.0];
        let mut g = g_a;
        for _ in 0..self.res.end_levels {
            g *= 0.5;
            gaps.push(g);
        }
        let lo_j = self.panels[j].lo;
        if j < last && lo_j > a {
            gaps.push(tau - lo_j);
        }
        gaps.sort_by(|x, y| y.total_cmp(x));
        gaps.dedup_by(|x, y| (*x - *y).abs() <= 1e-13 * g_a);
        let mut pts = Vec::with_capacity(2 * n);
        let mut basis = vec![0.0; n];
        for win in gaps.windows(2) {
            let (gl, gh) = (win[0], win[1]);
            let at_zero = a == 0.0 && gl == g_a;
            let l = if at_zero { 0.0 } else { tau - gl };
            let el = if at_zero { e0 } else { 0.0 };
            let er = if gh == 0.0 { et } else { 0.0 };
            let pi = if j < last && tau - 0.5 * (gl + gh) < lo_j { j + 1 } else { j };
            let panel = &self.panels[pi];
            pts.clear();
            panel_points(n, l, tau - gh, el, er, gh, &mut pts);
            for q in &pts {
                let mut div = 1.0;
                if el != 0.0 {
                    div *= q.s.powf(el);
                }
                if er != 0.0 {
                    div *= q.gap.powf(er);
                }
                let v = q.w / div * k.eval_gap(tau, q.s, q.gap)?;
                lagrange_basis(&panel.nodes, &panel.bw, q.s, &mut basis);
                for (i, b) in basis.iter().enumerate() {
                    row[panel.start + i] += v * b;
                }
            }
        }
        Ok(row)
    }

    /// `c_0(t), …, c_{n_max}(t)` for `0 ≤ t ≤ T`.
    pub fn coefficients_at(&self, t: f64) -> Result<Vec<f64>> {
        if !(t >= 0.0 && t <= self.t_max * (1.0 + 1e-14)) {
            return Err(invalid(format!("t = {t} outside the tabulated range [0, {}]", self.t_max)));
        }
        let mut out = vec![0.0; self.levels.len()];
        out[0] = 1.0;
        if t == 0.0 {
            return Ok(out);
        }
        let r = self.row(t.min(self.t_max))?;
        for n in 1..self.levels.len() {
            out[n] = dot(&r, &self.levels[n - 1]);
        }
        Ok(out)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `cₙ(1)` for a homogeneous kernel: `cₙ(1) = c_{n-1}(1) ∫_0^1 k(1,s) s^{(n-1)θ} ds`.
pub(crate) fn homogeneous_unit_coefficients(k: &Kernel, theta: f64, n_max: usize, res: Resolution) -> Result<Vec<f64>> {
    let mut c = vec![1.0; n_max + 1];
    for n in 1..=n_max {
        let p = (n - 1) as f64 * theta;
        let m = integrate_against(k, 1.0, |s| s.powf(p), p, res)?;
        if !m.is_finite() {
            return Err(Error::Quadrature(format!("moment of order {p} is not finite")));
        }
        c[n] = c[n - 1] * m;
    }
    Ok(c)
}

/// `c_0(t), …, c_{n_max}(t)`.
pub fn phi_coefficients(k: &Kernel, t: f64, n_max: usize) -> Result<Vec<f64>> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(invalid(format!("phi_coefficients needs t ≥ 0, got {t}")));
    }
    if t == 0.0 {
        let mut c = vec![0.0; n_max + 1];
        c[0] = 1.0;
        return Ok(c);
    }
    if let Some(theta) = k.theta() {
        let mut c = homogeneous_unit_coefficients(k, theta, n_max, Resolution::for_kernel(k))?;
        for (n, v) in c.iter_mut().enumerate() {
            *v *= t.powf(n as f64 * theta);
        }
        return Ok(c);
    }
    CoefficientTable::build(k, t, n_max)?.coefficients_at(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::StretchFn;
    use crate::specfun::recip_gamma;
    use proptest::prelude::*;

    fn fp_exact(beta: f64, t: f64, n: usize) -> f64 {
        t.powf(n as f64 * beta) * recip_gamma(n as f64 * beta + 1.0)
    }

    #[test]
    fn fractional_power_coefficients() {
        for &beta in &[0.3, 0.5, 0.9, 1.0] {
            let k = Kernel::fractional_power(beta).unwrap();
            let c = phi_coefficients(&k, 1.7, 12).unwrap();
            for (n, v) in c.iter().enumerate() {
                let e = fp_exact(beta, 1.7, n);
                assert!((v - e).abs() < 1e-13 * e, "β={beta} n={n}: {v} vs {e}");
            }
        }
    }

    #[test]
    fn table_matches_fractional_power() {
        // the table path on a homogeneous kernel is checked against the closed form
        let beta = 0.6;
        let k = Kernel::fractional_power(beta).unwrap();
        let tab = CoefficientTable::build(&k, 2.0, 10).unwrap();
        for &t in &[2.0, 1.3, 0.4, 1e-3] {
            let c = tab.coefficients_at(t).unwrap();
            for (n, v) in c.iter().enumerate() {
                let e = fp_exact(beta, t, n);
                assert!((v - e).abs() < 1e-10 * e.max(1e-300), "t={t} n={n}: {v} vs {e}");
            }
        }
    }

    #[test]
    fn table_matches_moments_for_ggbm_and_msm() {
        for k in [Kernel::ggbm(0.8, 0.6).unwrap(), Kernel::msm(2.0, 1.0, 0.5, 2.0).unwrap()] {
            let theta = k.theta().unwrap();
            let tab = CoefficientTable::build(&k, 1.5, 8).unwrap();
            let unit = homogeneous_unit_coefficients(&k, theta, 8, Resolution::for_kernel(&k)).unwrap();
            let c = tab.coefficients_at(1.5).unwrap();
            for n in 0..=8 {
                let e = unit[n] * 1.5f64.powf(n as f64 * theta);
                assert!((c[n] - e).abs() < 1e-10 * e, "{k:?} n={n}: {} vs {e}", c[n]);
            }
        }
    }

    #[test]
    fn ggbm_and_msm_coefficients_agree() {
        let (alpha, beta) = (0.8, 0.6);
        let g = phi_coefficients(&Kernel::ggbm(alpha, beta).unwrap(), 1.3, 15).unwrap();
        let m = phi_coefficients(&Kernel::msm(alpha / beta, alpha, 0.0, alpha / beta).unwrap(), 1.3, 15).unwrap();
        for n in 0..=15 {
            assert!((g[n] - m[n]).abs() < 1e-8 * g[n], "n={n}");
        }
    }

    #[test]
    fn ggbm_first_coefficient_is_one_over_gamma() {
        // ∫_0^t k(t,s) ds = t^α / Γ(β+1) for GGBM
        let k = Kernel::ggbm(1.4, 0.7).unwrap();
        let c = phi_coefficients(&k, 2.0, 1).unwrap();
        let e = 2f64.powf(1.4) * recip_gamma(1.7);
        assert!((c[1] - e).abs() < 1e-14 * e);
    }

    #[test]
    fn refinement_is_stable_for_convolution_kernels() {
        let k = Kernel::conv_power_sum(0.8, vec![0.4], vec![1.5]).unwrap();
        let fine = CoefficientTable::build(&k, 2.0, 12).unwrap();
        let coarse = CoefficientTable::build_with(&k, 2.0, 12, fine.resolution().coarser()).unwrap();
        let (a, b) = (fine.coefficients_at(2.0).unwrap(), coarse.coefficients_at(2.0).unwrap());
        for n in 0..=12 {
            assert!((a[n] - b[n]).abs() < 1e-6 * a[n].abs().max(1e-12), "n={n}: {} {}", a[n], b[n]);
            assert!(a[n] >= 0.0);
        }
    }

    #[test]
    fn conv_power_sum_first_coefficient() {
        // c_1(t) = t^β/Γ(β+1) + b t^{β₁}/Γ(β₁+1)
        let k = Kernel::conv_power_sum(0.8, vec![0.4], vec![1.5]).unwrap();
        let c = phi_coefficients(&k, 1.2, 2).unwrap();
        let e = 1.2f64.powf(0.8) * recip_gamma(1.8) + 1.5 * 1.2f64.powf(0.4) * recip_gamma(1.4);
        assert!((c[1] - e).abs() < 1e-10 * e, "{} {e}", c[1]);
        // c_2 = t^{2β}/Γ(2β+1) + 2b t^{β+β₁}/Γ(β+β₁+1) + b² t^{2β₁}/Γ(2β₁+1)
        let e2 = 1.2f64.powf(1.6) * recip_gamma(2.6)
            + 3.0 * 1.2f64.powf(1.2) * recip_gamma(2.2)
            + 2.25 * 1.2f64.powf(0.8) * recip_gamma(1.8);
        assert!((c[2] - e2).abs() < 1e-10 * e2, "{} {e2}", c[2]);
    }

    #[test]
    fn stretched_kernel_coefficients_follow_the_stretch() {
        // cₙ for κ_g at τ equals cₙ for k at g(τ)
        let base = Kernel::ggbm(0.8, 0.6).unwrap();
        let g = StretchFn::custom(|t| t + t * t, |t| 1.0 + 2.0 * t);
        let k = Kernel::time_stretched(base.clone(), g).unwrap();
        assert!(k.theta().is_none());
        let c = phi_coefficients(&k, 0.9, 6).unwrap();
        let e = phi_coefficients(&base, 0.9 + 0.81, 6).unwrap();
        for n in 0..=6 {
            assert!((c[n] - e[n]).abs() < 1e-9 * e[n], "n={n}: {} {}", c[n], e[n]);
        }
    }

    proptest! {
        #[test]
        fn homogeneity_identity(t in 0.05f64..5.0, r in 0.01f64..0.99, c in 0.1f64..10.0) {
            let ks = [
                Kernel::ggbm(0.8, 0.6).unwrap(),
                Kernel::ggbm(1.7, 0.3).unwrap(),
                Kernel::fractional_power(0.45).unwrap(),
                Kernel::msm(2.0, 1.0, 0.5, 2.0).unwrap(),
                Kernel::time_stretched(Kernel::fractional_power(0.5).unwrap(), StretchFn::Power(1.5)).unwrap(),
            ];
            for k in &ks {
                let th = k.theta().unwrap();
                let lhs = k.eval(c * t, c * r * t).unwrap();
                let rhs = c.powf(th - 1.0) * k.eval(t, r * t).unwrap();
                prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs());
            }
        }

        #[test]
        fn coefficients_nonnegative(alpha in 0.1f64..1.9, beta in 0.1f64..1.0, t in 0.01f64..2.0) {
            let k = Kernel::ggbm(alpha, beta).unwrap();
            let c = phi_coefficients(&k, t, 12).unwrap();
            prop_assert!(c.iter().all(|v| *v >= 0.0));
            prop_assert_eq!(c[0], 1.0);
        }
    }
}
