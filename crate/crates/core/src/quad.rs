//! Quadrature helpers: cached Gauss rules, singular panel rules and adaptive wrappers.

use std::collections::HashMap;
use std::num::NonZeroUsize;
use std::sync::{Arc, Mutex, OnceLock};

use gauss_quad::{FiniteAboveNegOneF64, GaussJacobi, GaussLegendre};

use crate::error::{Error, Result};

/// Nodes and weights on [-1, 1].
#[derive(Debug)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// `1 - x` for each node, kept separately so distances to the right end stay accurate.
    pub one_minus: Vec<f64>,
    /// `1 + x` for each node.
    pub one_plus: Vec<f64>,
}

type RuleKey = (usize, u64, u64);

fn cache() -> &'static Mutex<HashMap<RuleKey, Arc<GaussRule>>> {
    static CACHE: OnceLock<Mutex<HashMap<RuleKey, Arc<GaussRule>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Gauss rule for the weight `(1-x)^a (1+x)^b` with `n` nodes, cached per thread-safe key.
pub fn jacobi_rule(n: usize, a: f64, b: f64) -> Arc<GaussRule> {
    let a = if a.abs() < 1e-15 { 0.0 } else { a };
    let b = if b.abs() < 1e-15 { 0.0 } else { b };
    let key = (n, a.to_bits(), b.to_bits());
    if let Some(r) = cache().lock().expect("rule cache poisoned").get(&key) {
        return r.clone();
    }
    let deg = NonZeroUsize::new(n.max(1)).expect("nonzero");
    let pairs: Vec<(f64, f64)> = if a == 0.0 && b == 0.0 {
        GaussLegendre::new(deg).iter().map(|(x, w)| (*x, *w)).collect()
    } else {
        let fa = FiniteAboveNegOneF64::new(a).expect("exponent must exceed -1");
        let fb = FiniteAboveNegOneF64::new(b).expect("exponent must exceed -1");
        GaussJacobi::new(deg, fa, fb).iter().map(|(x, w)| (*x, *w)).collect()
    };
    let mut pairs = pairs;
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    let nodes: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let mut weights: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    // Renormalize to the exact zeroth moment.
    let mu0 = (2f64).powf(a + b + 1.0) * (ln_beta(a + 1.0, b + 1.0)).exp();
    let s: f64 = weights.iter().sum();
    if s.is_finite() && s > 0.0 {
        for w in &mut weights {
            *w *= mu0 / s;
        }
    }
    let rule = Arc::new(GaussRule {
        one_minus: nodes.iter().map(|x| 1.0 - x).collect(),
        one_plus: nodes.iter().map(|x| 1.0 + x).collect(),
        nodes,
        weights,
    });
    cache().lock().expect("rule cache poisoned").insert(key, rule.clone());
    rule
}

pub fn legendre_rule(n: usize) -> Arc<GaussRule> {
    jacobi_rule(n, 0.0, 0.0)
}

fn ln_beta(a: f64, b: f64) -> f64 {
    libm::lgamma(a) + libm::lgamma(b) - libm::lgamma(a + b)
}

/// A quadrature point for an integral over `[lo, hi]`.
///
/// `gap` is `end - s` where `end` is the right end of the enclosing integral,
/// computed without cancellation. `w` already contains the Jacobi weight factors
/// evaluated exactly, i.e. `∫ (s-lo)^e0 (end-s)^e1 f(s) ds ≈ Σ w f(s)` when `singular`
/// flags are set and `Σ w f(s)` approximates `∫ f` otherwise.
#[derive(Debug, Clone, Copy)]
pub struct QPoint {
    pub s: f64,
    pub gap: f64,
    pub w: f64,
}

/// Rule on one panel `[lo, hi]` for `∫ (s-lo)^{e0} (hi-s)^{e1} f(s) ds`.
///
/// `hi_gap` is the distance from `hi` to the right end of the outer integral.
pub fn panel_points(n: usize, lo: f64, hi: f64, e0: f64, e1: f64, hi_gap: f64, out: &mut Vec<QPoint>) {
    if e0 != 0.0 && e1 != 0.0 && (e0 + e1 + 1.0).abs() < 1e-9 {
        // The Jacobi recurrence degenerates here; split the panel so each half carries one
        // singular endpoint and absorb the smooth factor of the other into the integrand weights.
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        let mut tmp = Vec::new();
        panel_points(n, lo, mid, e0, 0.0, hi_gap + half, &mut tmp);
        for p in &tmp {
            out.push(QPoint { w: p.w * (p.gap - hi_gap).powf(e1), ..*p });
        }
        tmp.clear();
        panel_points(n, mid, hi, 0.0, e1, hi_gap, &mut tmp);
        for p in &tmp {
            out.push(QPoint { w: p.w * (p.s - lo).powf(e0), ..*p });
        }
        return;
    }
    let r = jacobi_rule(n, e1, e0);
    let half = 0.5 * (hi - lo);
    let scale = half.powf(1.0 + e0 + e1);
    for i in 0..r.nodes.len() {
        let s = lo + half * r.one_plus[i];
        let gap = hi_gap + half * r.one_minus[i];
        out.push(QPoint { s, gap, w: r.weights[i] * scale });
    }
}

/// Endpoint powers of at least 1 are smooth enough for Gauss-Legendre on a graded mesh.
pub fn jacobi_exponent(e: f64) -> f64 {
    if e >= 1.0 {
        0.0
    } else {
        e
    }
}

// the crate may stop a few times above the requested error, so pieces are asked for more
const INNER: f64 = 1e-3;

/// Integral of `f` over `[a, b]` by tanh-sinh, bisecting until the halves agree with the whole.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, abs_tol: f64) -> Result<f64> {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64, tol: f64, floor: f64, depth: u32) -> Result<f64> {
        // deep subintervals share a tolerance floor instead of halving forever
        let tol = tol.max(floor);
        let m = 0.5 * (a + b);
        let l = quadrature::integrate(f, a, m, INNER * tol).integral;
        let r = quadrature::integrate(f, m, b, INNER * tol).integral;
        if (l + r - whole).abs() <= tol.max(8.0 * f64::EPSILON * (l + r).abs()) {
            return Ok(l + r);
        }
        if depth == 0 || !(l + r).is_finite() {
            return Err(Error::Quadrature(format!(
                "tanh-sinh on [{a}, {b}] did not settle (halves differ by {:.3e})",
                (l + r - whole).abs()
            )));
        }
        Ok(rec(f, a, m, l, 0.5 * tol, floor, depth - 1)? + rec(f, m, b, r, 0.5 * tol, floor, depth - 1)?)
    }
    if a == b {
        return Ok(0.0);
    }
    let o = quadrature::integrate(f, a, b, INNER * abs_tol);
    rec(f, a, b, o.integral, abs_tol, abs_tol / 1024.0, 20)
}

/// Integral of `f` over `[a, ∞)` using the map `s = a + u/(1-u)`.
pub fn integrate_to_inf<F: Fn(f64) -> f64>(f: &F, a: f64, abs_tol: f64) -> Result<f64> {
    let g = |u: f64| {
        if u >= 1.0 {
            return 0.0;
        }
        let v = 1.0 - u;
        f(a + u / v) / (v * v)
    };
    integrate(&g, 0.0, 1.0, abs_tol)
}

/// Composite Gauss-Legendre over `[a, b]` split at the given interior breakpoints.
pub fn gauss_legendre_composite<F: Fn(f64) -> f64>(f: &F, breaks: &[f64], n: usize) -> f64 {
    let r = legendre_rule(n);
    let mut total = 0.0;
    for w in breaks.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let half = 0.5 * (hi - lo);
        let mut acc = 0.0;
        for i in 0..r.nodes.len() {
            acc += r.weights[i] * f(lo + half * r.one_plus[i]);
        }
        total += half * acc;
    }
    total
}

/// Barycentric weights for interpolation through `nodes`.
pub fn barycentric_weights(nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let mut w = vec![1.0; n];
    for j in 0..n {
        for k in 0..n {
            if j != k {
                w[j] /= nodes[j] - nodes[k];
            }
        }
    }
    let m = w.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    for x in &mut w {
        *x /= m;
    }
    w
}

/// Lagrange basis values at `x` via the barycentric formula, written into `out`.
pub fn lagrange_basis(nodes: &[f64], bw: &[f64], x: f64, out: &mut [f64]) {
    for (j, &xj) in nodes.iter().enumerate() {
        if x == xj {
            out.iter_mut().for_each(|v| *v = 0.0);
            out[j] = 1.0;
            return;
        }
    }
    let mut denom = 0.0;
    for j in 0..nodes.len() {
        let t = bw[j] / (x - nodes[j]);
        out[j] = t;
        denom += t;
    }
    for v in out.iter_mut() {
        *v /= denom;
    }
}

/// Pairwise summation, independent of how the slice was produced.
pub fn pairwise_sum(x: &[f64]) -> f64 {
    if x.len() <= 32 {
        let mut s = 0.0;
        for v in x {
            s += v;
        }
        return s;
    }
    let m = x.len() / 2;
    pairwise_sum(&x[..m]) + pairwise_sum(&x[m..])
}

/// Neumaier compensated summation.
pub fn compensated_sum(x: impl IntoIterator<Item = f64>) -> f64 {
    let mut s = 0.0f64;
    let mut c = 0.0f64;
    for v in x {
        let t = s + v;
        if s.abs() >= v.abs() {
            c += (s - t) + v;
        } else {
            c += (v - t) + s;
        }
        s = t;
    }
    s + c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_moments_are_exact() {
        // ∫_0^1 s^{-0.5} (1-s)^{-0.3} ds = B(0.5, 0.7)
        let mut pts = Vec::new();
        panel_points(12, 0.0, 1.0, -0.5, -0.3, 0.0, &mut pts);
        let v: f64 = pts.iter().map(|p| p.w).sum();
        let exact = ln_beta(0.5, 0.7).exp();
        assert!((v - exact).abs() < 1e-14 * exact);
    }

    #[test]
    fn degenerate_exponent_pair_is_split() {
        let mut pts = Vec::new();
        panel_points(16, 0.0, 2.0, -0.3, -0.7, 0.0, &mut pts);
        let v: f64 = pts.iter().map(|p| p.w).sum();
        let exact = 2f64.powf(1.0 - 0.3 - 0.7) * ln_beta(0.7, 0.3).exp();
        assert!((v - exact).abs() < 1e-9 * exact, "{v} {exact}");
    }

    #[test]
    fn gaps_measure_distance_to_end() {
        let mut pts = Vec::new();
        panel_points(8, 1.0, 3.0, 0.0, -0.5, 0.25, &mut pts);
        for p in &pts {
            assert!((p.s + p.gap - 3.25).abs() < 1e-14);
        }
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        let v = integrate(&|x: f64| x.sqrt() * (1.0 - x).ln(), 0.0, 1.0, 1e-13).unwrap();
        let exact = 2.0 / 3.0 * (2.0 * std::f64::consts::LN_2 - 8.0 / 3.0);
        assert!((v - exact).abs() < 1e-12, "{v} {exact}");
        let w = integrate_to_inf(&|x: f64| (-x).exp(), 0.0, 1e-12).unwrap();
        assert!((w - 1.0).abs() < 1e-10);
    }

    #[test]
    fn barycentric_reproduces_polynomials() {
        let r = legendre_rule(10);
        let bw = barycentric_weights(&r.nodes);
        let mut l = vec![0.0; 10];
        lagrange_basis(&r.nodes, &bw, 0.3, &mut l);
        let v: f64 = r.nodes.iter().zip(&l).map(|(x, c)| x.powi(7) * c).sum();
        assert!((v - 0.3f64.powi(7)).abs() < 1e-14);
    }
}
