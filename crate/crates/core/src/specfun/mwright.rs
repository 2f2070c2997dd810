use std::f64::consts::PI;

use super::{gamma_fn, SeriesTolerance};
use crate::error::{invalid, Error, Result};
use crate::quad;

const SERIES_LIMIT: f64 = 1.0;

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(invalid(format!("M-Wright index must lie in (0,1), got {beta}")));
    }
    Ok(())
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0 + x.powi(4) / 120.0
    } else {
        x.sin() / x
    }
}

/// Zolotarev's function `a(φ) = sin(βφ)^{β/(1-β)} sin((1-β)φ) / sin(φ)^{1/(1-β)}` on `(0, π)`.
pub(crate) fn zolotarev_a(beta: f64, phi: f64) -> f64 {
    let r = 1.0 / (1.0 - beta);
    let l = beta * r * (beta * sinc(beta * phi)).ln() + ((1.0 - beta) * sinc((1.0 - beta) * phi)).ln()
        - r * if phi < 1.0 { sinc(phi).ln() } else { ((PI - phi).sin() / phi).ln() };
    l.exp()
}

// Kanter/Zolotarev integral with the minimum exp(-a(0) w) factored out.
fn kanter_integral(beta: f64, w: f64, weight_by_a: bool) -> Result<(f64, f64)> {
    let a0 = zolotarev_a(beta, 0.0);
    let f = |phi: f64| {
        if phi >= PI {
            return 0.0;
        }
        let a = zolotarev_a(beta, phi);
        let e = (-(a - a0) * w).exp();
        if weight_by_a { a * e } else { e }
    };
    let v = quad::integrate(&f, 0.0, PI, 1e-14)?;
    Ok((v, a0))
}

// `term` returns (term, envelope); the envelope drops the oscillating sine factor so
// isolated zeros of the sine do not end the summation early.
fn series_terms<F: FnMut(usize) -> (f64, f64)>(mut term: F, tol: SeriesTolerance) -> Result<f64> {
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    for n in 0..tol.max_terms {
        let (t, env) = term(n);
        sum += t;
        if env < tol.abs_tol && env <= prev && n > 2 {
            return Ok(sum);
        }
        prev = env;
    }
    Err(Error::TruncationBudget("M-Wright series did not converge".into()))
}

/// M-Wright density `M_β(z)`, the density of the mixing variable `A_β`.
///
/// Small arguments use the power series rewritten with the reflection formula,
/// `M_β(z) = (1/π) Σ (-z)^n/n! Γ(β(n+1)) sin(πβ(n+1))`; larger ones the exact integral
/// `M_β(z) = z^{β/(1-β)}/(π(1-β)) ∫_0^π a(φ) exp(-a(φ) z^{1/(1-β)}) dφ`.
pub fn mwright_density(beta: f64, z: f64) -> Result<f64> {
    check_beta(beta)?;
    if !(z >= 0.0) {
        return Err(invalid(format!("M-Wright argument must be ≥ 0, got {z}")));
    }
    if z <= SERIES_LIMIT {
        let mut lz = 1.0;
        let mut fact = 1.0;
        let v = series_terms(
            |n| {
                if n > 0 {
                    lz *= -z;
                    fact *= n as f64;
                }
                let y = beta * (n as f64 + 1.0);
                let env = lz / fact * gamma_fn(y) / PI;
                (env * (PI * y).sin(), env.abs())
            },
            SeriesTolerance::default(),
        )?;
        return Ok(v.max(0.0));
    }
    let r = 1.0 / (1.0 - beta);
    let w = z.powf(r);
    let lv = beta * r * z.ln() - zolotarev_a(beta, 0.0) * w;
    if lv < -800.0 {
        // the factor e^{lv} underflows; the integral itself is O(1)
        return Ok(0.0);
    }
    let (i, _) = kanter_integral(beta, w, true)?;
    Ok((i * lv.exp() * r / PI).max(0.0))
}

/// CDF `∫_0^z M_β(u) du` of the mixing variable `A_β`.
pub fn mwright_cdf(beta: f64, z: f64) -> Result<f64> {
    check_beta(beta)?;
    if z <= 0.0 {
        return Ok(0.0);
    }
    if z <= SERIES_LIMIT {
        let mut lz = 1.0;
        let mut fact = 1.0;
        let v = series_terms(
            |n| {
                lz *= if n == 0 { z } else { -z };
                fact *= (n + 1) as f64;
                let y = beta * (n as f64 + 1.0);
                let env = lz / fact * gamma_fn(y) / PI;
                (env * (PI * y).sin(), env.abs())
            },
            SeriesTolerance::default(),
        )?;
        return Ok(v.clamp(0.0, 1.0));
    }
    let w = z.powf(1.0 / (1.0 - beta));
    if zolotarev_a(beta, 0.0) * w > 40.0 {
        // the tail e^{-a(0) w} ∫ … ≤ e^{-40} is below one ulp of 1
        return Ok(1.0);
    }
    let (i, a0) = kanter_integral(beta, w, false)?;
    Ok((1.0 - i * (-a0 * w).exp() / PI).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn far_tail() {
        for beta in [0.3, 0.5, 0.8, 0.9] {
            for z in [10.0, 100.0, 1e5] {
                assert!(mwright_density(beta, z).unwrap() < 1e-5);
                assert!(mwright_cdf(beta, z).unwrap() > 0.99999);
            }
        }
    }

    #[test]
    fn half_order_closed_form() {
        for &z in &[0.0, 0.3, 1.0, 1.5, 4.0, 9.0] {
            let exact = (-z * z / 4.0f64).exp() / PI.sqrt();
            let v = mwright_density(0.5, z).unwrap();
            assert!((v - exact).abs() < 1e-13, "{z}: {v} vs {exact}");
            let c = mwright_cdf(0.5, z).unwrap();
            let ce = crate::specfun::erf(z / 2.0);
            assert!((c - ce).abs() < 1e-13, "{z}: {c} vs {ce}");
        }
        assert!((mwright_density(0.5, 1.0).unwrap() - 0.439_391_289_467_722_4).abs() < 1e-13);
    }

    #[test]
    fn branches_agree_at_switch() {
        for &beta in &[0.3, 0.6, 0.8] {
            let z = SERIES_LIMIT;
            let s = mwright_density(beta, z).unwrap();
            let r = 1.0 / (1.0 - beta);
            let w = z.powf(r);
            let (i, a0) = kanter_integral(beta, w, true).unwrap();
            let k = i * (beta * r * z.ln() - a0 * w).exp() * r / PI;
            assert!((s - k).abs() < 1e-12, "{beta}: {s} {k}");
        }
    }

    #[test]
    fn tail_is_nonnegative() {
        let v = mwright_density(0.7, 30.0).unwrap();
        assert!((0.0..1e-10).contains(&v));
    }
}
