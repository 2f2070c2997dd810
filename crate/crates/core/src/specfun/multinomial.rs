use super::{is_gamma_pole, ln_gamma_signed, recip_gamma, SeriesTolerance};
use crate::error::{invalid, Error, Result};

/// Parameters of `E_{(α_1..α_m), β}`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultinomialMLParams {
    pub alphas: Vec<f64>,
    pub beta: f64,
}

impl MultinomialMLParams {
    pub fn new(alphas: Vec<f64>, beta: f64) -> Result<Self> {
        if alphas.is_empty() {
            return Err(invalid("multinomial Mittag-Leffler needs at least one index"));
        }
        if let Some(a) = alphas.iter().find(|a| !(**a > 0.0)) {
            return Err(invalid(format!("multinomial Mittag-Leffler indices must be > 0, got {a}")));
        }
        Ok(Self { alphas, beta })
    }
}

/// Sum of a truncated series together with cancellation diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesOutcome {
    pub value: f64,
    pub max_term: f64,
    pub terms: usize,
}

/// `Σ_n Σ_{n_1+..+n_m=n} n!/(n_1!..n_m!) Π z_j^{n_j} / Γ(β + Σ α_j n_j)`.
pub fn multinomial_ml_series(
    p: &MultinomialMLParams,
    z: &[f64],
    tol: SeriesTolerance,
) -> Result<SeriesOutcome> {
    let m = p.alphas.len();
    if z.len() != m {
        return Err(invalid(format!("expected {m} arguments, got {}", z.len())));
    }
    let lz: Vec<f64> = z.iter().map(|v| v.abs().ln()).collect();
    let amin = p.alphas.iter().cloned().fold(f64::INFINITY, f64::min);
    let active: Vec<usize> = (0..m).filter(|&j| z[j] != 0.0).collect();
    if active.is_empty() {
        let v = recip_gamma(p.beta);
        return Ok(SeriesOutcome { value: v, max_term: v.abs(), terms: 1 });
    }
    let mut lfact = vec![0.0f64];
    let mut sum = 0.0;
    let mut comp = 0.0;
    let mut max_term = 0.0f64;
    let mut terms = 0usize;
    let mut prev_order = f64::INFINITY;
    let mut counts = vec![0usize; active.len()];
    for n in 0.. {
        while lfact.len() <= n {
            let k = lfact.len();
            lfact.push(lfact[k - 1] + (k as f64).ln());
        }
        let mut order_abs = 0.0;
        // enumerate compositions of n over the active indices
        let mut stack_done = false;
        counts.iter_mut().for_each(|c| *c = 0);
        counts[0] = n;
        while !stack_done {
            let mut lmag = lfact[n];
            let mut sign = 1.0;
            let mut arg = p.beta;
            for (k, &j) in active.iter().enumerate() {
                let c = counts[k];
                lmag += c as f64 * lz[j] - lfact[c];
                if c % 2 == 1 && z[j] < 0.0 {
                    sign = -sign;
                }
                arg += p.alphas[j] * c as f64;
            }
            let term = if is_gamma_pole(arg) {
                0.0
            } else {
                let (lg, sg) = ln_gamma_signed(arg);
                sign * sg * (lmag - lg).exp()
            };
            let t = sum + term;
            if sum.abs() >= term.abs() {
                comp += (sum - t) + term;
            } else {
                comp += (term - t) + sum;
            }
            sum = t;
            order_abs += term.abs();
            max_term = max_term.max(term.abs());
            terms += 1;
            if terms >= tol.max_terms {
                return Err(Error::TruncationBudget(format!(
                    "multinomial Mittag-Leffler series exceeded {} terms",
                    tol.max_terms
                )));
            }
            stack_done = !next_composition(&mut counts);
        }
        let total = sum + comp;
        if p.beta + amin * n as f64 > 1.0
            && order_abs <= prev_order
            && order_abs < tol.abs_tol.max(0.1 * f64::EPSILON * total.abs())
        {
            return Ok(SeriesOutcome { value: total, max_term, terms });
        }
        if !total.is_finite() {
            break;
        }
        prev_order = order_abs;
    }
    Err(Error::TruncationBudget("multinomial Mittag-Leffler series diverged".into()))
}

// Advance to the next composition in reverse-lexicographic order; false when exhausted.
fn next_composition(c: &mut [usize]) -> bool {
    let k = c.len();
    if k == 1 {
        return false;
    }
    // find the rightmost position before the last holding a positive count
    let mut i = k - 1;
    loop {
        if i == 0 {
            return false;
        }
        i -= 1;
        if c[i] > 0 {
            break;
        }
    }
    let tail = c[k - 1];
    c[k - 1] = 0;
    c[i] -= 1;
    c[i + 1] = tail + 1;
    true
}

/// Multinomial Mittag-Leffler function by direct summation.
pub fn multinomial_ml(p: &MultinomialMLParams, z: &[f64]) -> Result<f64> {
    multinomial_ml_series(p, z, SeriesTolerance::default()).map(|o| o.value)
}
