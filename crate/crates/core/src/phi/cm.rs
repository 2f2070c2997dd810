use serde::Serialize;

use super::PhiEvaluator;
use crate::error::{invalid, Error, Result};
use crate::quad::compensated_sum;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CmViolation {
    /// 0 for positivity, k for the k-th finite difference.
    pub order: usize,
    pub lambda: f64,
    pub magnitude: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CmReport {
    pub t: f64,
    pub passed: bool,
    pub first_violation: Option<CmViolation>,
    pub values: Vec<f64>,
}

/// Checks `Φ(t,-λ) > 0` and that finite differences of order 1..3 alternate in sign on the grid.
pub fn check_complete_monotone(ev: &PhiEvaluator, t: f64, lam_grid: &[f64]) -> Result<CmReport> {
    if lam_grid.iter().any(|l| !(*l >= 0.0)) || lam_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("λ grid must be nonnegative and increasing"));
    }
    let values = lam_grid.iter().map(|l| ev.eval_decay(t, *l)).collect::<Result<Vec<_>>>()?;
    let mut first: Option<CmViolation> = None;
    let mut note = |v: CmViolation| {
        if first.as_ref().is_none_or(|f| v.lambda < f.lambda) {
            first = Some(v);
        }
    };
    if let Some(i) = values.iter().position(|v| !(*v > 0.0)) {
        note(CmViolation { order: 0, lambda: lam_grid[i], magnitude: values[i] });
    }
    let mut diff = values.clone();
    for order in 1..=3 {
        diff = diff.windows(2).map(|w| w[1] - w[0]).collect();
        let sign = if order % 2 == 1 { -1.0 } else { 1.0 };
        // rounding in Φ is amplified by 2^order in the differences
        let tol = 1e-11 * (1u32 << order) as f64;
        if let Some(i) = diff.iter().position(|d| sign * d < -tol) {
            note(CmViolation { order, lambda: lam_grid[i], magnitude: diff[i].abs() });
        }
    }
    Ok(CmReport { t, passed: first.is_none(), first_violation: first, values })
}

/// CDF of `A(t)` on increasing nodes, linear between nodes.
#[derive(Debug, Clone, Serialize)]
pub struct TimeLawCdf {
    pub t: f64,
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
}

impl TimeLawCdf {
    pub fn cdf(&self, x: f64) -> f64 {
        let i = self.nodes.partition_point(|n| *n <= x);
        if i == 0 {
            return 0.0;
        }
        if i == self.nodes.len() {
            return *self.values.last().expect("nonempty");
        }
        let (a, b) = (self.nodes[i - 1], self.nodes[i]);
        let (fa, fb) = (self.values[i - 1], self.values[i]);
        fa + (fb - fa) * (x - a) / (b - a)
    }

    /// Smallest node-interpolated `x` with `F(x) ≥ u`.
    pub fn quantile(&self, u: f64) -> f64 {
        let i = self.values.partition_point(|v| *v < u);
        if i == 0 {
            return self.nodes[0];
        }
        if i == self.values.len() {
            return *self.nodes.last().expect("nonempty");
        }
        let (fa, fb) = (self.values[i - 1], self.values[i]);
        let (a, b) = (self.nodes[i - 1], self.nodes[i]);
        if fb == fa {
            return b;
        }
        a + (b - a) * (u - fa) / (fb - fa)
    }
}

const GS_ORDER: usize = 14;

fn stehfest_weights(n: usize) -> Vec<f64> {
    let fact = |k: usize| (1..=k).map(|v| v as f64).product::<f64>();
    let h = n / 2;
    (1..=n)
        .map(|k| {
            let mut s = 0.0;
            for j in k.div_ceil(2)..=k.min(h) {
                s += (j as f64).powi(h as i32) * fact(2 * j)
                    / (fact(h - j) * fact(j) * fact(j - 1) * fact(k - j) * fact(2 * j - k));
            }
            if (k + h) % 2 == 1 {
                -s
            } else {
                s
            }
        })
        .collect()
}

/// CDF of `A(t)` by Gaver–Stehfest inversion of `Φ(t,-λ)/λ`, clamped to `[0,1]` and monotonized.
pub fn time_law_cdf(ev: &PhiEvaluator, t: f64, nodes: &[f64]) -> Result<TimeLawCdf> {
    if nodes.is_empty() || nodes.iter().any(|x| !(*x >= 0.0)) || nodes.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("CDF nodes must be nonempty, nonnegative and increasing"));
    }
    if t == 0.0 {
        return Ok(TimeLawCdf { t, nodes: nodes.to_vec(), values: vec![1.0; nodes.len()] });
    }
    let coarse: Vec<f64> = (0..=20).map(|i| 0.5 * i as f64).collect();
    let cm = check_complete_monotone(ev, t, &coarse)?;
    if let Some(v) = cm.first_violation {
        return Err(Error::InversionUnstable(format!(
            "Φ({t},-·) fails the monotonicity check at λ = {} (order {})",
            v.lambda, v.order
        )));
    }
    let v = stehfest_weights(GS_ORDER);
    let ln2 = std::f64::consts::LN_2;
    let mut raw = Vec::with_capacity(nodes.len());
    for &x in nodes {
        if x == 0.0 {
            raw.push(0.0);
            continue;
        }
        let mut terms = Vec::with_capacity(GS_ORDER);
        for (k, vk) in v.iter().enumerate() {
            let s = (k + 1) as f64 * ln2 / x;
            terms.push(vk * ev.eval_decay(t, s)? / (k + 1) as f64);
        }
        raw.push(compensated_sum(terms));
    }
    let mut values = Vec::with_capacity(raw.len());
    let mut run: f64 = 0.0;
    for (i, &r) in raw.iter().enumerate() {
        // order-14 inversion rings by a few percent next to jumps
        if !(-0.1..=1.1).contains(&r) || r < run - 0.1 {
            return Err(Error::InversionUnstable(format!(
                "Gaver–Stehfest value {r:.4} at a = {} is not a CDF value",
                nodes[i]
            )));
        }
        run = run.max(r.clamp(0.0, 1.0));
        values.push(run);
    }
    Ok(TimeLawCdf { t, nodes: nodes.to_vec(), values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::Kernel;
    use crate::phi::PhiMode;
    use crate::specfun::mwright_cdf;

    #[test]
    fn stehfest_weights_sum_to_zero() {
        let v = stehfest_weights(14);
        assert!(v.iter().sum::<f64>().abs() < 1e-6);
        // inversion of 1/(s+1) at t=1
        let f: f64 = v.iter().enumerate().map(|(k, w)| w / ((k + 1) as f64 * std::f64::consts::LN_2 + 1.0)).sum::<f64>()
            * std::f64::consts::LN_2;
        assert!((f - (-1f64).exp()).abs() < 1e-5);
    }

    #[test]
    fn ggbm_and_exponential_pass() {
        let grid: Vec<f64> = (0..=100).map(|i| 0.1 * i as f64).collect();
        let ev = PhiEvaluator::new(&Kernel::ggbm(0.8, 0.6).unwrap(), PhiMode::ClosedForm, 1.0).unwrap();
        assert!(check_complete_monotone(&ev, 1.0, &grid).unwrap().passed);
        let ev = PhiEvaluator::series(&Kernel::fractional_power(1.0).unwrap(), 1.0).unwrap();
        let r = check_complete_monotone(&ev, 1.0, &grid).unwrap();
        assert!(r.passed);
        assert!((r.values[10] - (-1f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn signed_kernel_violation_is_reported() {
        // k = 1 - 1.8 s/t gives c₁ = 0.1t, c₂ = -0.01t²
        let k = Kernel::custom("signed", |t, s| 1.0 - 1.8 * s / t, Some(1.0), 0.0, 0.0, false).unwrap();
        let ev = PhiEvaluator::series(&k, 1.0).unwrap();
        let c = ev.coefficients(1.0).unwrap();
        assert!((c[1] - 0.1).abs() < 1e-14 && (c[2] + 0.01).abs() < 1e-14);
        let grid: Vec<f64> = (0..=20).map(|i| 0.5 * i as f64).collect();
        let r = check_complete_monotone(&ev, 1.0, &grid).unwrap();
        assert!(!r.passed);
        assert!(r.first_violation.unwrap().order >= 1);
    }

    #[test]
    fn point_mass_cdf() {
        // β = 1: A(t) = t^α
        let ev = PhiEvaluator::new(&Kernel::ggbm(0.8, 1.0).unwrap(), PhiMode::ClosedForm, 1.0).unwrap();
        let nodes = [0.25, 0.5, 0.75, 1.5, 2.0, 4.0];
        let f = time_law_cdf(&ev, 1.0, &nodes).unwrap();
        assert!(f.values[0] < 0.01 && f.values[1] < 0.05, "{:?}", f.values);
        assert!(f.values[3] > 0.95 && f.values[5] > 0.99, "{:?}", f.values);
    }

    #[test]
    fn mwright_cdf_oracle() {
        let ev = PhiEvaluator::new(&Kernel::ggbm(1.0, 0.5).unwrap(), PhiMode::ClosedForm, 1.0).unwrap();
        let nodes: Vec<f64> = (1..=30).map(|i| 0.1 * i as f64).collect();
        let f = time_law_cdf(&ev, 1.0, &nodes).unwrap();
        for (x, v) in nodes.iter().zip(&f.values) {
            let e = mwright_cdf(0.5, *x).unwrap();
            assert!((v - e).abs() < 1e-3, "a={x}: {v} {e}");
        }
        assert!(f.values.windows(2).all(|w| w[1] >= w[0]));
        let q = f.quantile(0.5);
        assert!((f.cdf(q) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_time_is_point_mass_at_zero() {
        let ev = PhiEvaluator::new(&Kernel::ggbm(0.8, 0.6).unwrap(), PhiMode::ClosedForm, 1.0).unwrap();
        let f = time_law_cdf(&ev, 0.0, &[0.0, 1.0]).unwrap();
        assert_eq!(f.values, vec![1.0, 1.0]);
    }
}
