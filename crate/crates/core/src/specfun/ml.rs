use num_complex::Complex64;

use super::{invert_laplace, ln_gamma_signed, recip_gamma, SeriesTolerance};
use crate::error::{invalid, Error, Result};

/// Prabhakar parameters `E^{q3}_{q1,q2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MLParams {
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
}

impl MLParams {
    pub fn new(q1: f64, q2: f64, q3: f64) -> Result<Self> {
        if !(q1 > 0.0) || !q1.is_finite() || !q2.is_finite() || !q3.is_finite() {
            return Err(invalid(format!("Prabhakar parameters need q1 > 0 (got q1={q1}, q2={q2}, q3={q3})")));
        }
        Ok(Self { q1, q2, q3 })
    }

    /// One-parameter function `E_β`.
    pub fn one(beta: f64) -> Result<Self> {
        Self::new(beta, 1.0, 1.0)
    }

    /// Two-parameter function `E_{α,β}`.
    pub fn two(alpha: f64, beta: f64) -> Result<Self> {
        Self::new(alpha, beta, 1.0)
    }
}

// Largest ratio of the biggest series term to the result accepted before switching
// to the contour integral.
const MAX_CANCELLATION: f64 = 1e3;
const CONTOUR_NODES: usize = 32;

/// Plain power series; returns the sum and the largest term magnitude seen.
pub fn prabhakar_series(p: MLParams, x: f64, tol: SeriesTolerance) -> Result<(f64, f64)> {
    if x == 0.0 {
        let v = recip_gamma(p.q2);
        return Ok((v, v.abs()));
    }
    let lx = x.abs().ln();
    let xs = x.signum();
    let mut sum = 0.0;
    let mut comp = 0.0;
    let mut max_term = 0.0f64;
    let mut lpoch = 0.0; // ln|(q3)_n|
    let mut spoch = 1.0;
    let mut lfact = 0.0;
    // (q3)_n x^n / n! as a plain running product while it stays representable
    let mut prod = 1.0f64;
    let mut prev = f64::INFINITY;
    for n in 0..tol.max_terms {
        let nf = n as f64;
        if n > 0 {
            let f = p.q3 + nf - 1.0;
            if f == 0.0 {
                return Ok((sum + comp, max_term));
            }
            lpoch += f.abs().ln();
            spoch *= f.signum();
            lfact += nf.ln();
            prod *= f * x / nf;
        }
        let g = p.q1 * nf + p.q2;
        let term = if super::is_gamma_pole(g) {
            0.0
        } else if g < 170.0 && prod.is_normal() && prod.abs() < 1e300 {
            prod * recip_gamma(g)
        } else {
            let (lg, sg) = ln_gamma_signed(g);
            let sx = if n % 2 == 1 { xs } else { 1.0 };
            spoch * sg * sx * (lpoch + nf * lx - lfact - lg).exp()
        };
        // Neumaier step
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
        let a = term.abs();
        max_term = max_term.max(a);
        if g > 1.0 && a <= prev && a < tol.abs_tol.max(f64::EPSILON * 0.1 * sum.abs()) {
            return Ok((sum + comp, max_term));
        }
        prev = a;
        if !sum.is_finite() {
            break;
        }
    }
    Err(Error::TruncationBudget(format!(
        "Prabhakar series (q1={}, q2={}, q3={}) at x={x} did not converge within {} terms",
        p.q1, p.q2, p.q3, tol.max_terms
    )))
}

fn prabhakar_contour(p: MLParams, x: f64) -> f64 {
    let e = p.q1 * p.q3 - p.q2;
    invert_laplace(
        |s: Complex64| s.powf(e) / (s.powf(p.q1) - x).powf(p.q3),
        1.0,
        CONTOUR_NODES,
    )
}

/// Three-parameter Mittag-Leffler (Prabhakar) function `Σ (q3)_n x^n / (Γ(q1 n + q2) n!)`.
///
/// Negative arguments with strong cancellation are evaluated through the Laplace
/// representation `L[t^{q2-1} E^{q3}_{q1,q2}(x t^{q1})](s) = s^{q1 q3 - q2} / (s^{q1} - x)^{q3}`
/// (valid for `q1 ≤ 1`); `q1 = 1` uses the Kummer transformation instead.
pub fn prabhakar(p: MLParams, x: f64) -> Result<f64> {
    let tol = SeriesTolerance::default();
    if x >= 0.0 {
        return prabhakar_series(p, x, tol).map(|r| r.0);
    }
    if p.q1 == 1.0 && p.q2 > 0.0 {
        let q = MLParams { q1: 1.0, q2: p.q2, q3: p.q2 - p.q3 };
        let (s, _) = prabhakar_series(q, -x, tol)?;
        return Ok(x.exp() * s);
    }
    if p.q1 <= 1.0 {
        if x >= -30.0 {
            if let Ok((s, m)) = prabhakar_series(p, x, tol) {
                if m <= MAX_CANCELLATION * s.abs() {
                    return Ok(s);
                }
            }
        }
        return Ok(prabhakar_contour(p, x));
    }
    let (s, m) = prabhakar_series(p, x, tol)?;
    if m > 1e8 * s.abs() {
        return Err(Error::TruncationBudget(format!(
            "Prabhakar series with q1={} > 1 loses all precision at x={x}",
            p.q1
        )));
    }
    Ok(s)
}

/// One-parameter Mittag-Leffler function `E_β(x)` for `β ∈ (0, 1]`.
pub fn mittag_leffler(beta: f64, x: f64) -> Result<f64> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(invalid(format!("Mittag-Leffler index must lie in (0,1], got {beta}")));
    }
    let v = prabhakar(MLParams { q1: beta, q2: 1.0, q3: 1.0 }, x)?;
    Ok(if x <= 0.0 { v.clamp(0.0, 1.0) } else { v })
}
