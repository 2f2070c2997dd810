use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::kernels::Kernel;
use crate::quad::{jacobi_exponent, panel_points, QPoint};

const NODES: usize = 8;
// dyadic refinements of the last interval when the kernel is not a single power there
const END_LEVELS: usize = 30;

/// Product-integration solver for `Φ(t, λ) = 1 + λ ∫_0^t k(t,s) Φ(s, λ) ds`
/// with piecewise linear `Φ` on a fixed grid.
///
/// The weights do not depend on λ, so one solver serves many λ.
#[derive(Debug, Clone)]
pub struct VolterraSolver {
    grid: Vec<f64>,
    // row i holds the weights of Φ_0..Φ_i
    w: Vec<Vec<f64>>,
}

impl VolterraSolver {
    /// `t_j = T (j/n)²`, with the `extra` points inserted (or replacing a close node).
    pub fn graded_grid(t_max: f64, n: usize, extra: &[f64]) -> Vec<f64> {
        let mut g: Vec<f64> = (0..=n).map(|j| t_max * (j as f64 / n as f64).powi(2)).collect();
        // nodes that may still be moved onto a requested point
        let mut free = vec![true; g.len()];
        free[0] = false;
        free[n] = false;
        for &x in extra {
            if !(x > 0.0 && x <= t_max) {
                continue;
            }
            let i = g.partition_point(|v| *v < x);
            if i < g.len() && g[i] == x {
                free[i] = false;
                continue;
            }
            let near = |j: usize| free[j] && (g[j] - x).abs() <= 0.25 * (g[j] - g[j - 1]).min(g[j + 1] - g[j]);
            if i < g.len() && near(i) {
                g[i] = x;
                free[i] = false;
            } else if i > 0 && near(i - 1) {
                g[i - 1] = x;
                free[i - 1] = false;
            } else {
                g.insert(i, x);
                free.insert(i, false);
            }
        }
        g
    }

    pub fn new(kernel: &Kernel, grid: Vec<f64>) -> Result<Self> {
        let mut grid = grid;
        if grid.is_empty() || grid.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(invalid("Volterra grid must be nonempty with finite t ≥ 0"));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("Volterra grid must be strictly increasing"));
        }
        if grid[0] > 0.0 {
            grid.insert(0, 0.0);
        }
        let w = (0..grid.len()).into_par_iter().map(|i| row_weights(kernel, &grid, i)).collect::<Result<Vec<_>>>()?;
        Ok(Self { grid, w })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.grid.iter().position(|g| *g == t)
    }

    /// `Φ(t_i, λ)` on the grid.
    pub fn solve(&self, lam: f64) -> Vec<f64> {
        let n = self.grid.len();
        let mut phi = vec![1.0; n];
        if lam == 0.0 {
            return phi;
        }
        for i in 1..n {
            let row = &self.w[i];
            let mut acc = 0.0;
            for j in 0..i {
                acc += row[j] * phi[j];
            }
            phi[i] = (1.0 + lam * acc) / (1.0 - lam * row[i]);
        }
        phi
    }
}

fn row_weights(k: &Kernel, grid: &[f64], i: usize) -> Result<Vec<f64>> {
    let mut row = vec![0.0; i + 1];
    if i == 0 {
        return Ok(row);
    }
    let (e0, et) = k.exponents();
    let e0 = jacobi_exponent(e0);
    let ti = grid[i];
    let mut pts: Vec<QPoint> = Vec::with_capacity(NODES * (END_LEVELS + 1));
    for l in 0..i {
        let (a, b) = (grid[l], grid[l + 1]);
        let h = b - a;
        let el = if a == 0.0 { e0 } else { 0.0 };
        pts.clear();
        if l + 1 < i {
            panel_points(NODES, a, b, el, 0.0, ti - b, &mut pts);
            for p in &pts {
                let div = if el != 0.0 { p.s.powf(el) } else { 1.0 };
                let v = p.w / div * k.eval_gap(ti, p.s, p.gap)?;
                row[l] += v * (b - p.s) / h;
                row[l + 1] += v * (p.s - a) / h;
            }
            continue;
        }
        // last interval, singular at s = t_i
        let mut segs = vec![(h, 0.0)];
        if !k.end_is_single_power() {
            segs.clear();
            let mut g = h;
            for _ in 0..END_LEVELS {
                segs.push((g, 0.5 * g));
                g *= 0.5;
            }
            segs.push((g, 0.0));
        }
        for (j, &(g_lo, g_hi)) in segs.iter().enumerate() {
            let left = if j == 0 { el } else { 0.0 };
            let right = if g_hi == 0.0 { et } else { 0.0 };
            let lo = if j == 0 { a } else { ti - g_lo };
            pts.clear();
            panel_points(NODES, lo, ti - g_hi, left, right, g_hi, &mut pts);
            for p in &pts {
                let mut div = 1.0;
                if left != 0.0 {
                    div *= p.s.powf(left);
                }
                if right != 0.0 {
                    div *= p.gap.powf(right);
                }
                let v = p.w / div * k.eval_gap(ti, p.s, p.gap)?;
                row[l] += v * p.gap / h;
                row[l + 1] += v * (1.0 - p.gap / h);
            }
        }
    }
    if row.iter().any(|v| !v.is_finite()) {
        return Err(Error::Quadrature(format!("product-integration weights at t = {ti} are not finite")));
    }
    Ok(row)
}

/// `Φ(t, λ)` at the requested times, solved on a graded grid of 1024 intervals that contains them.
///
/// A solve on half the grid serves as refinement check.
pub fn phi_volterra(k: &Kernel, lam: f64, t_grid: &[f64]) -> Result<Vec<f64>> {
    phi_volterra_with(k, lam, t_grid, 1024)
}

pub fn phi_volterra_with(k: &Kernel, lam: f64, t_grid: &[f64], n: usize) -> Result<Vec<f64>> {
    if t_grid.windows(2).any(|w| !(w[1] > w[0])) || t_grid.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
        return Err(invalid("t_grid must be increasing with finite t ≥ 0"));
    }
    let Some(&t_max) = t_grid.last() else { return Ok(vec![]) };
    if t_max == 0.0 || lam == 0.0 {
        return Ok(vec![1.0; t_grid.len()]);
    }
    let solve = |n: usize| -> Result<Vec<f64>> {
        let s = VolterraSolver::new(k, VolterraSolver::graded_grid(t_max, n, t_grid))?;
        let v = s.solve(lam);
        Ok(t_grid.iter().map(|t| v[s.index_of(*t).expect("requested time is a node")]).collect())
    };
    let fine = solve(n)?;
    let coarse = solve(n / 2)?;
    let diff = fine.iter().zip(&coarse).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if !(diff <= 1e-3) {
        return Err(Error::NonconvergentRefinement(format!(
            "Volterra solutions on {n} and {} intervals differ by {diff:.3e}",
            n / 2
        )));
    }
    Ok(fine)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phi::phi_closed;
    use crate::specfun::mittag_leffler;

    #[test]
    fn zero_lambda_is_exactly_one() {
        let k = Kernel::ggbm(0.8, 0.6).unwrap();
        let v = phi_volterra(&k, 0.0, &[0.0, 0.5, 1.0]).unwrap();
        assert_eq!(v, vec![1.0; 3]);
    }

    #[test]
    fn grid_contains_requested_points() {
        let g = VolterraSolver::graded_grid(1.0, 16, &[0.3, 0.31, 1.0, 0.0]);
        for x in [0.3, 0.31, 1.0, 0.0] {
            assert!(g.contains(&x), "{x}");
        }
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn fractional_power_half() {
        let k = Kernel::fractional_power(0.5).unwrap();
        let ts = [0.1, 0.25, 0.5, 1.0];
        let v = phi_volterra_with(&k, -1.0, &ts, 2048).unwrap();
        for (t, x) in ts.iter().zip(&v) {
            let e = mittag_leffler(0.5, -t.sqrt()).unwrap();
            assert!((x - e).abs() < 1e-5, "t={t}: {x} {e}");
        }
    }

    #[test]
    fn ggbm_and_msm_against_closed_form() {
        for k in [Kernel::ggbm(0.8, 0.6).unwrap(), Kernel::msm(2.0, 1.0, 0.5, 2.0).unwrap()] {
            let ts: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
            let s = VolterraSolver::new(&k, VolterraSolver::graded_grid(1.0, 1024, &ts)).unwrap();
            for lam in [0.5, 2.0, 5.0] {
                let v = s.solve(-lam);
                for t in &ts {
                    let x = v[s.index_of(*t).unwrap()];
                    let e = phi_closed(&k, *t, -lam).unwrap();
                    assert!((x - e).abs() < 1e-5, "{k:?} t={t} λ={lam}: {x} {e}");
                }
            }
        }
    }

    #[test]
    fn convolution_kernel_against_closed_form() {
        let k = Kernel::conv_power_sum(0.8, vec![0.4], vec![0.5]).unwrap();
        let v = phi_volterra(&k, -2.0, &[0.5, 1.0]).unwrap();
        for (t, x) in [0.5, 1.0].iter().zip(&v) {
            let e = phi_closed(&k, *t, -2.0).unwrap();
            assert!((x - e).abs() < 1e-5, "t={t}: {x} {e}");
        }
    }

    #[test]
    fn empirical_order() {
        let k = Kernel::fractional_power(0.7).unwrap();
        let e = mittag_leffler(0.7, -2.0).unwrap();
        let err = |n: usize| {
            let s = VolterraSolver::new(&k, VolterraSolver::graded_grid(1.0, n, &[])).unwrap();
            (s.solve(-2.0).last().unwrap() - e).abs()
        };
        let (e1, e2) = (err(64), err(128));
        let order = (e1 / e2).log2();
        assert!(order >= 1.5, "order {order} ({e1:e}, {e2:e})");
    }
}
