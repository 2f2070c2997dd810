use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::fk::InitialCondition;
use crate::specfun::gamma_fn;

/// Values on the uniform space grid `x_i = -L + i·dx`, zero at both ends.
#[derive(Debug, Clone, Serialize)]
pub struct GridSolution {
    pub t: f64,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
}

impl GridSolution {
    pub fn dx(&self) -> f64 {
        self.x[1] - self.x[0]
    }

    /// Linear interpolation, zero outside the grid.
    pub fn value_at(&self, x: f64) -> f64 {
        let (lo, dx) = (self.x[0], self.dx());
        let p = (x - lo) / dx;
        if !(p >= 0.0 && p <= (self.x.len() - 1) as f64) {
            return 0.0;
        }
        let i = (p.floor() as usize).min(self.x.len() - 2);
        let f = p - i as f64;
        self.u[i] * (1.0 - f) + self.u[i + 1] * f
    }

    /// Trapezoid mass `∫u dx`.
    pub fn mass(&self) -> f64 {
        self.u.iter().sum::<f64>() * self.dx()
    }
}

/// `D^β_t` by the L1 formula at `times[1..]` from samples of a function.
pub fn l1_caputo_derivative(beta: f64, times: &[f64], values: &[f64]) -> Result<Vec<f64>> {
    check_beta(beta)?;
    if times.len() != values.len() || times.len() < 2 || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("L1 derivative needs matching, increasing samples"));
    }
    let mut out = Vec::with_capacity(times.len() - 1);
    for n in 1..times.len() {
        let w = l1_weights(beta, times, n);
        out.push((1..=n).map(|k| w[k - 1] * (values[k] - values[k - 1])).sum());
    }
    Ok(out)
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(invalid(format!("Caputo order must lie in (0,1], got {beta}")));
    }
    Ok(())
}

// b_{n,k}, k = 1..=n, so that D^β u(t_n) ≈ Σ b_{n,k}(u^k - u^{k-1})
fn l1_weights(beta: f64, t: &[f64], n: usize) -> Vec<f64> {
    if beta == 1.0 {
        let mut w = vec![0.0; n];
        w[n - 1] = 1.0 / (t[n] - t[n - 1]);
        return w;
    }
    let e = 1.0 - beta;
    let g = gamma_fn(2.0 - beta);
    (1..=n)
        .map(|k| {
            let tau = t[k] - t[k - 1];
            ((t[n] - t[k - 1]).powf(e) - (t[n] - t[k]).powf(e)) / (g * tau)
        })
        .collect()
}

fn space_grid(l: f64, nx: usize, u0: &InitialCondition) -> Result<Vec<f64>> {
    if !(l > 0.0 && l.is_finite()) || nx < 4 {
        return Err(invalid("space grid needs L > 0 and at least 4 intervals"));
    }
    if u0.eval(-l).abs().max(u0.eval(l).abs()) > 1e-10 {
        return Err(invalid(format!("u₀ has not decayed below 1e-10 at ±{l}")));
    }
    let dx = 2.0 * l / nx as f64;
    Ok((0..=nx).map(|i| -l + i as f64 * dx).collect())
}

// solves (d - D/2) v = rhs on interior nodes, D the second difference, zero boundary
fn thomas(d: f64, dx: f64, rhs: &[f64]) -> Vec<f64> {
    let m = rhs.len();
    let off = -0.5 / (dx * dx);
    let diag = d + 1.0 / (dx * dx);
    let mut c = vec![0.0; m];
    let mut r = vec![0.0; m];
    let mut den = diag;
    c[0] = off / den;
    r[0] = rhs[0] / den;
    for i in 1..m {
        den = diag - off * c[i - 1];
        c[i] = off / den;
        r[i] = (rhs[i] - off * r[i - 1]) / den;
    }
    for i in (0..m - 1).rev() {
        r[i] -= c[i] * r[i + 1];
    }
    r
}

/// `∂^β_t u = ½ ∂ₓₓ u` on `[-L, L]` with zero boundary values, by the L1 scheme on the
/// graded mesh `t_n = t (n/nt)^{(2-β)/β}` and central differences in space.
pub fn caputo_l1(beta: f64, l: f64, nx: usize, nt: usize, u0: &InitialCondition, t: f64) -> Result<GridSolution> {
    check_beta(beta)?;
    let x = space_grid(l, nx, u0)?;
    let init: Vec<f64> = x.iter().map(|v| u0.eval(*v)).collect();
    if t == 0.0 {
        return Ok(GridSolution { t, x, u: init });
    }
    if !(t > 0.0 && t.is_finite()) || nt == 0 {
        return Err(invalid("caputo_l1 needs finite t ≥ 0 and nt ≥ 1"));
    }
    let r = (2.0 - beta) / beta;
    let times: Vec<f64> = (0..=nt).map(|n| t * (n as f64 / nt as f64).powf(r)).collect();
    let dx = x[1] - x[0];
    let m = nx - 1;
    let mut u = init[1..nx].to_vec();
    // increments u^k - u^{k-1} on interior nodes
    let mut incs: Vec<Vec<f64>> = Vec::with_capacity(nt);
    for n in 1..=nt {
        let w = l1_weights(beta, &times, n);
        let d = w[n - 1];
        let mut rhs: Vec<f64> = u.iter().map(|v| d * v).collect();
        for (k, inc) in incs.iter().enumerate() {
            let wk = w[k];
            for i in 0..m {
                rhs[i] -= wk * inc[i];
            }
        }
        let next = thomas(d, dx, &rhs);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Unstable(format!("L1 step {n} produced non-finite values")));
        }
        incs.push(next.iter().zip(&u).map(|(a, b)| a - b).collect());
        u = next;
    }
    let mut full = vec![0.0; nx + 1];
    full[1..nx].copy_from_slice(&u);
    Ok(GridSolution { t, x, u: full })
}

/// Value of [`caputo_l1`] at `x`, doubling time and space resolution until two levels
/// differ by less than `tol`.
pub fn caputo_l1_converged(beta: f64, l: f64, u0: &InitialCondition, t: f64, x: f64, tol: f64) -> Result<f64> {
    let (mut nx, mut nt) = (400, 100);
    let mut prev = caputo_l1(beta, l, nx, nt, u0, t)?.value_at(x);
    for _ in 0..3 {
        nx *= 2;
        nt *= 2;
        let v = caputo_l1(beta, l, nx, nt, u0, t)?.value_at(x);
        if (v - prev).abs() < tol {
            return Ok(v);
        }
        prev = v;
    }
    Err(Error::NonconvergentRefinement(format!("L1 values at x = {x} still move by more than {tol} at nt = {nt}")))
}

/// Crank–Nicolson for `∂_t u = ½ ∂ₓₓ u` with the same grid conventions.
pub fn crank_nicolson_heat(l: f64, nx: usize, nt: usize, u0: &InitialCondition, t: f64) -> Result<GridSolution> {
    let x = space_grid(l, nx, u0)?;
    let init: Vec<f64> = x.iter().map(|v| u0.eval(*v)).collect();
    if t == 0.0 {
        return Ok(GridSolution { t, x, u: init });
    }
    if !(t > 0.0 && t.is_finite()) || nt == 0 {
        return Err(invalid("crank_nicolson_heat needs finite t ≥ 0 and nt ≥ 1"));
    }
    let dx = x[1] - x[0];
    let dt = t / nt as f64;
    let m = nx - 1;
    let mut u = init.clone();
    u[0] = 0.0;
    u[nx] = 0.0;
    let d = 2.0 / dt;
    for _ in 0..nt {
        // (2/dt - D/2) u⁺ = (2/dt + D/2) u
        let rhs: Vec<f64> = (1..=m).map(|i| d * u[i] + 0.5 * (u[i - 1] - 2.0 * u[i] + u[i + 1]) / (dx * dx)).collect();
        let next = thomas(d, dx, &rhs);
        u[1..=m].copy_from_slice(&next);
    }
    Ok(GridSolution { t, x, u })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fk::gaussian_density;

    #[test]
    fn derivative_of_square_has_order_two_minus_beta() {
        for beta in [0.3, 0.5, 0.8] {
            let exact = 2.0 / gamma_fn(3.0 - beta);
            let err = |n: usize| {
                let times: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
                let vals: Vec<f64> = times.iter().map(|t| t * t).collect();
                (l1_caputo_derivative(beta, &times, &vals).unwrap().last().unwrap() - exact).abs()
            };
            let order = (err(64) / err(128)).log2();
            assert!((order - (2.0 - beta)).abs() <= 0.3, "β={beta}: order {order}");
        }
    }

    #[test]
    fn first_order_case_matches_crank_nicolson() {
        let u0 = InitialCondition::gaussian(0.0, 1.0);
        let cn = crank_nicolson_heat(12.0, 480, 200, &u0, 1.0).unwrap();
        assert!((cn.value_at(0.0) - gaussian_density(0.0, 2.0)).abs() < 1e-4);
        let be = caputo_l1(1.0, 12.0, 480, 1000, &u0, 1.0).unwrap();
        for x in [0.0, 0.5, 1.5] {
            assert!((be.value_at(x) - cn.value_at(x)).abs() < 1e-3, "x={x}");
        }
        let near = caputo_l1(0.999, 12.0, 480, 1000, &u0, 1.0).unwrap();
        assert!((near.value_at(0.0) - cn.value_at(0.0)).abs() < 1e-3);
    }

    #[test]
    fn mass_is_conserved() {
        let u0 = InitialCondition::gaussian(0.0, 1.0);
        let m0 = caputo_l1(0.5, 20.0, 800, 10, &u0, 0.0).unwrap().mass();
        for nt in [50, 100] {
            let s = caputo_l1(0.5, 20.0, 800, nt, &u0, 1.0).unwrap();
            assert!((s.mass() - m0).abs() < 1e-4, "{} {m0}", s.mass());
        }
    }

    #[test]
    fn undecayed_data_are_rejected() {
        let u0 = InitialCondition::gaussian(0.0, 1.0);
        assert!(caputo_l1(0.5, 3.0, 100, 10, &u0, 1.0).is_err());
        assert!(caputo_l1(1.5, 20.0, 100, 10, &u0, 1.0).is_err());
    }
}
