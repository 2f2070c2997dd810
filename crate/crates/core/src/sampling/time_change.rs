use std::fmt;
use std::sync::{Arc, Mutex};

use rand::Rng;

use super::{standard_stable, BernsteinSpec, PathGrid, SeedSpec, StableTerm, Substream};
use crate::error::{invalid, Error, Result};
use crate::kernels::{Family, Kernel, StretchFn};
use crate::phi::{msm_q_params, time_law_cdf, PhiEvaluator, PhiMode, TimeLawCdf};
use crate::specfun::{invert_laplace, mittag_leffler};

/// Law of the mixing variable `A` in `A(t) = A t^θ`.
#[derive(Debug, Clone)]
pub enum MixingLaw {
    /// `A_β = η₁^{-β}`, Laplace transform `E_β(-λ)`; β = 1 is the point mass at 1.
    Stable { beta: f64 },
    /// Inverse of the numerical CDF of `A(1)`.
    Numeric(Arc<NumericTimeLaw>),
}

impl MixingLaw {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            MixingLaw::Stable { beta } => {
                if *beta == 1.0 {
                    1.0
                } else {
                    standard_stable(*beta, rng).powf(-beta)
                }
            }
            MixingLaw::Numeric(law) => {
                let tab = law.table(1.0).expect("table at t = 1 is built on construction");
                tab.quantile(rng.random())
            }
        }
    }

    /// `E e^{-λA}`.
    pub fn laplace_transform(&self, lam: f64) -> Result<f64> {
        match self {
            MixingLaw::Stable { beta } => mittag_leffler(*beta, -lam),
            MixingLaw::Numeric(law) => law.evaluator().eval_decay(1.0, lam),
        }
    }
}

/// CDFs of `A(t)` obtained by inverting `Φ(t,-λ)`, built on first use per `t`.
pub struct NumericTimeLaw {
    ev: PhiEvaluator,
    n_nodes: usize,
    cache: Mutex<Vec<(f64, Arc<TimeLawCdf>)>>,
}

impl fmt::Debug for NumericTimeLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "NumericTimeLaw({:?})", self.ev.kernel().family())
    }
}

impl NumericTimeLaw {
    pub fn new(kernel: &Kernel, t_max: f64, n_nodes: usize) -> Result<Self> {
        if !kernel.is_nonnegative() {
            return Err(invalid("a time-change law needs a nonnegative kernel"));
        }
        let ev = match PhiEvaluator::new(kernel, PhiMode::ClosedForm, t_max) {
            Ok(ev) => ev,
            Err(Error::NoClosedForm(_)) => PhiEvaluator::series(kernel, t_max)?,
            Err(e) => return Err(e),
        };
        Ok(Self { ev, n_nodes: n_nodes.max(16), cache: Mutex::new(Vec::new()) })
    }

    pub fn evaluator(&self) -> &PhiEvaluator {
        &self.ev
    }

    pub fn table(&self, t: f64) -> Result<Arc<TimeLawCdf>> {
        {
            let cache = self.cache.lock().expect("cache lock");
            if let Some((_, tab)) = cache.iter().find(|(s, _)| *s == t) {
                return Ok(tab.clone());
            }
        }
        let tab = Arc::new(self.build(t)?);
        let mut cache = self.cache.lock().expect("cache lock");
        if let Some((_, tab)) = cache.iter().find(|(s, _)| *s == t) {
            return Ok(tab.clone());
        }
        cache.push((t, tab.clone()));
        Ok(tab)
    }

    fn build(&self, t: f64) -> Result<TimeLawCdf> {
        if t == 0.0 {
            return time_law_cdf(&self.ev, 0.0, &[0.0]);
        }
        // E A(t) = c₁(t) sets the scale of the nodes
        let d = 1e-6;
        let mean = (1.0 - self.ev.eval_decay(t, d)?) / d;
        if !(mean > 0.0 && mean.is_finite()) {
            return Err(Error::InversionUnstable(format!("mean of A({t}) is not positive: {mean}")));
        }
        let mut span = 40.0 * mean;
        for _ in 0..4 {
            let n = self.n_nodes;
            let nodes: Vec<f64> = (0..=n).map(|i| span * (i as f64 / n as f64).powi(2)).collect();
            let tab = time_law_cdf(&self.ev, t, &nodes)?;
            if *tab.values.last().expect("nonempty") > 0.999 {
                return Ok(tab);
            }
            span *= 4.0;
        }
        Err(Error::InversionUnstable(format!("CDF of A({t}) does not reach 1 within {span:.3e}")))
    }
}

/// The family of laws `(A(t))_{t ≥ 0}`.
#[derive(Debug, Clone)]
pub enum TimeChangeLaw {
    /// `A(t) = A t^θ`.
    HomogeneousProduct { theta: f64, mixing: MixingLaw },
    /// First passage `E^h_t` of the subordinator with Laplace exponent `h`,
    /// simulated with `steps` steps per expected passage time.
    InverseSubordinator { h: BernsteinSpec, steps: usize },
    NumericCdf(Arc<NumericTimeLaw>),
    /// `A(g(t))`
    Stretched { base: Box<TimeChangeLaw>, stretch: StretchFn },
}

const CDF_NODES: usize = 400;
pub(crate) const PASSAGE_STEPS: usize = 1 << 14;

impl TimeChangeLaw {
    /// The law attached to a kernel; `t_max` bounds the times used with numeric laws.
    pub fn for_kernel(kernel: &Kernel, t_max: f64) -> Result<Self> {
        match kernel.family() {
            Family::Ggbm { alpha, beta } => Ok(Self::HomogeneousProduct { theta: *alpha, mixing: MixingLaw::Stable { beta: *beta } }),
            Family::FractionalPower { beta } => {
                Ok(Self::HomogeneousProduct { theta: *beta, mixing: MixingLaw::Stable { beta: *beta } })
            }
            Family::Msm { a, b, mu, nu } => {
                let (q1, q2, q3) = msm_q_params(*a, *b, *mu, *nu);
                let mixing = if q2 == 1.0 && q3 == 1.0 {
                    MixingLaw::Stable { beta: q1 }
                } else {
                    Self::numeric_mixing(kernel)?
                };
                Ok(Self::HomogeneousProduct { theta: *b, mixing })
            }
            Family::ConvMultinomialMl { beta, betas, bs } => {
                // h₂(σ) = σ^β + Σ b_j σ^{β_j}
                let mut terms: Vec<StableTerm> =
                    betas.iter().zip(bs).map(|(e, w)| StableTerm { weight: *w, exponent: *e }).collect();
                let b = if *beta == 1.0 {
                    1.0
                } else {
                    terms.insert(0, StableTerm { weight: 1.0, exponent: *beta });
                    0.0
                };
                let h = if b == 0.0 && terms.len() == 1 {
                    BernsteinSpec::StablePower { gamma: *beta }
                } else if terms.is_empty() {
                    BernsteinSpec::Identity
                } else {
                    BernsteinSpec::DriftPlusStableSum { b, terms }
                };
                Ok(Self::InverseSubordinator { h, steps: PASSAGE_STEPS })
            }
            Family::ConvPowerSum { .. } => Ok(Self::NumericCdf(Arc::new(NumericTimeLaw::new(kernel, t_max, CDF_NODES)?))),
            Family::TimeStretched { base, stretch } => {
                let g_max = stretch.g(t_max);
                Ok(Self::Stretched { base: Box::new(Self::for_kernel(base, g_max)?), stretch: stretch.clone() })
            }
            Family::Custom(_) => match kernel.theta() {
                Some(theta) => Ok(Self::HomogeneousProduct { theta, mixing: Self::numeric_mixing(kernel)? }),
                None => Ok(Self::NumericCdf(Arc::new(NumericTimeLaw::new(kernel, t_max, CDF_NODES)?))),
            },
        }
    }

    fn numeric_mixing(kernel: &Kernel) -> Result<MixingLaw> {
        let law = NumericTimeLaw::new(kernel, 1.0, CDF_NODES)?;
        law.table(1.0)?;
        Ok(MixingLaw::Numeric(Arc::new(law)))
    }

    /// True for the laws that are samples of a single homogeneous product.
    pub fn homogeneous(&self) -> Option<(f64, &MixingLaw)> {
        match self {
            Self::HomogeneousProduct { theta, mixing } => Some((*theta, mixing)),
            _ => None,
        }
    }

    /// `E e^{-λA(t)} = Φ(t,-λ)`.
    pub fn laplace_transform(&self, t: f64, lam: f64) -> Result<f64> {
        match self {
            Self::HomogeneousProduct { theta, mixing } => mixing.laplace_transform(lam * t.powf(*theta)),
            Self::InverseSubordinator { h, .. } => {
                if t == 0.0 {
                    return Ok(1.0);
                }
                let h = h.clone();
                Ok(invert_laplace(
                    move |s| {
                        let hs = bernstein_complex(&h, s);
                        hs / (s * (hs + lam))
                    },
                    t,
                    32,
                ))
            }
            Self::NumericCdf(law) => law.evaluator().eval_decay(t, lam),
            Self::Stretched { base, stretch } => base.laplace_transform(stretch.g(t), lam),
        }
    }

    /// One draw of `A(t)` from the mixing and passage substreams of `seed`.
    pub fn draw(&self, t: f64, seed: SeedSpec) -> Result<f64> {
        if t == 0.0 {
            return Ok(0.0);
        }
        match self {
            Self::HomogeneousProduct { theta, mixing } => Ok(mixing.draw(&mut seed.rng(Substream::Mixing)) * t.powf(*theta)),
            Self::InverseSubordinator { h, steps } => first_passage(h, t, *steps, &mut seed.rng(Substream::Passage)),
            Self::NumericCdf(law) => Ok(law.table(t)?.quantile(seed.rng(Substream::Mixing).random())),
            Self::Stretched { base, stretch } => base.draw(stretch.g(t), seed),
        }
    }
}

fn bernstein_complex(h: &BernsteinSpec, s: num_complex::Complex64) -> num_complex::Complex64 {
    match h {
        BernsteinSpec::Identity => s,
        BernsteinSpec::StablePower { gamma } => s.powf(*gamma),
        BernsteinSpec::DriftPlusStableSum { b, terms } => {
            terms.iter().fold(s * *b, |acc, t| acc + s.powf(t.exponent) * t.weight)
        }
    }
}

/// A draw of `A(t)`; `t = 0` gives 0.
pub fn sample_time_change(law: &TimeChangeLaw, t: f64, seed: SeedSpec) -> Result<f64> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(invalid(format!("time must be finite and ≥ 0, got {t}")));
    }
    law.draw(t, seed)
}

// increment of η^h over ds
fn increment<R: Rng + ?Sized>(h: &BernsteinSpec, ds: f64, rng: &mut R) -> f64 {
    h.draw(ds, rng)
}

fn first_passage<R: Rng + ?Sized>(h: &BernsteinSpec, level: f64, steps: usize, rng: &mut R) -> Result<f64> {
    match h {
        BernsteinSpec::Identity => Ok(level),
        // P(E_t ≤ s) = P(s^{1/γ} η₁ ≥ t)
        BernsteinSpec::StablePower { gamma } => Ok((level / standard_stable(*gamma, rng)).powf(*gamma)),
        BernsteinSpec::DriftPlusStableSum { .. } => {
            let ds = 1.0 / (h.eval(1.0 / level) * steps as f64);
            let (mut s, mut eta) = (0.0, 0.0);
            for _ in 0..64 * steps {
                let inc = increment(h, ds, rng);
                if eta + inc > level {
                    return Ok(s + ds * (level - eta) / inc);
                }
                eta += inc;
                s += ds;
            }
            Err(Error::GridTooCoarse(format!(
                "no passage above {level} within {} steps of {ds:.3e}",
                64 * steps
            )))
        }
    }
}

/// `η^h` at `s_k = k·ds`, up to and including the first value above `level`.
pub fn subordinator_path_until<R: Rng + ?Sized>(h: &BernsteinSpec, level: f64, ds: f64, max_steps: usize, rng: &mut R) -> Result<Vec<f64>> {
    let mut path = vec![0.0];
    let mut eta = 0.0;
    while eta <= level {
        if path.len() > max_steps {
            return Err(Error::GridTooCoarse(format!("subordinator stayed below {level} for {max_steps} steps")));
        }
        eta += increment(h, ds, rng);
        path.push(eta);
    }
    Ok(path)
}

/// `E^h_t` on the grid from one subordinator path with linear bracketing of each passage.
pub fn sample_inverse_subordinator_path(h: &BernsteinSpec, grid: &PathGrid, steps: usize, seed: SeedSpec) -> Result<Vec<f64>> {
    h.validate()?;
    let level = grid.horizon;
    let ds = 1.0 / (h.eval(1.0 / level) * steps as f64);
    let path = subordinator_path_until(h, level, ds, 64 * steps, &mut seed.rng(Substream::Passage))?;
    let mut out = Vec::with_capacity(grid.n_steps + 1);
    let mut k = 0;
    for t in grid.nodes() {
        while path[k + 1] <= t {
            k += 1;
        }
        let (lo, hi) = (path[k], path[k + 1]);
        out.push(ds * (k as f64 + (t - lo) / (hi - lo)));
    }
    out[0] = 0.0;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::Kernel;
    use crate::phi::phi_closed;
    use crate::quad::gauss_legendre_composite;
    use crate::stats::laplace_transform;

    fn draws(law: &TimeChangeLaw, t: f64, n: u64) -> Vec<f64> {
        (0..n).map(|i| sample_time_change(law, t, SeedSpec::new(5, i)).unwrap()).collect()
    }

    #[test]
    fn zero_time_is_zero() {
        for k in [Kernel::ggbm(0.8, 0.6).unwrap(), Kernel::conv_multinomial_ml(0.7, vec![0.3], vec![1.0]).unwrap()] {
            let law = TimeChangeLaw::for_kernel(&k, 1.0).unwrap();
            assert_eq!(sample_time_change(&law, 0.0, SeedSpec::new(1, 1)).unwrap(), 0.0);
        }
    }

    #[test]
    fn homogeneous_product_scaling() {
        let law = TimeChangeLaw::for_kernel(&Kernel::ggbm(0.8, 0.6).unwrap(), 2.0).unwrap();
        let s = SeedSpec::new(2, 17);
        let a = MixingLaw::Stable { beta: 0.6 }.draw(&mut s.rng(Substream::Mixing));
        assert_eq!(sample_time_change(&law, 2.0, s).unwrap(), a * 2f64.powf(0.8));
    }

    #[test]
    fn reducible_msm_uses_stable_mixing() {
        let law = TimeChangeLaw::for_kernel(&Kernel::msm(2.0, 1.0, 0.0, 2.0).unwrap(), 1.0).unwrap();
        assert!(matches!(law, TimeChangeLaw::HomogeneousProduct { mixing: MixingLaw::Stable { beta }, .. } if beta == 0.5));
    }

    #[test]
    fn numeric_msm_mixing_transform() {
        let k = Kernel::msm(2.0, 1.0, 0.5, 2.0).unwrap();
        let law = TimeChangeLaw::for_kernel(&k, 1.0).unwrap();
        assert!(matches!(law, TimeChangeLaw::HomogeneousProduct { mixing: MixingLaw::Numeric(_), .. }));
        let x = draws(&law, 0.7, 40_000);
        for lam in [0.5, 2.0] {
            let e = laplace_transform(&x, lam);
            let exact = phi_closed(&k, 0.7, -lam).unwrap();
            // CDF inversion error of a few 1e-4 on top of MC error
            assert!((e.mean - exact).abs() < 4.0 * e.stderr + 1e-3, "λ={lam}: {} {exact}", e.mean);
        }
    }

    #[test]
    fn numeric_cdf_law_for_power_sum_kernel() {
        let k = Kernel::conv_power_sum(0.8, vec![0.4], vec![0.5]).unwrap();
        let law = TimeChangeLaw::for_kernel(&k, 1.0).unwrap();
        assert!(matches!(law, TimeChangeLaw::NumericCdf(_)));
        let x = draws(&law, 1.0, 40_000);
        let e = laplace_transform(&x, 1.0);
        let exact = phi_closed(&k, 1.0, -1.0).unwrap();
        assert!((e.mean - exact).abs() < 4.0 * e.stderr + 1e-3, "{} {exact}", e.mean);
    }

    #[test]
    fn inverse_stable_subordinator_matches_phi() {
        // h(σ) = σ^{0.6}: E^h_t has transform E_{0.6}(-λ t^{0.6})
        let k = Kernel::conv_multinomial_ml(0.6, vec![], vec![]).unwrap();
        let law = TimeChangeLaw::for_kernel(&k, 1.0).unwrap();
        assert!(matches!(law, TimeChangeLaw::InverseSubordinator { h: BernsteinSpec::StablePower { .. }, .. }));
        let x = draws(&law, 0.8, 50_000);
        let e = laplace_transform(&x, 1.5);
        let exact = mittag_leffler(0.6, -1.5 * 0.8f64.powf(0.6)).unwrap();
        assert!((e.mean - exact).abs() < 4.0 * e.stderr);
        assert!((law.laplace_transform(0.8, 1.5).unwrap() - exact).abs() < 1e-7);
    }

    #[test]
    fn inverse_subordinator_sum_by_first_passage() {
        let k = Kernel::conv_multinomial_ml(0.7, vec![0.3], vec![1.0]).unwrap();
        let TimeChangeLaw::InverseSubordinator { h, .. } = TimeChangeLaw::for_kernel(&k, 1.0).unwrap() else {
            panic!("expected inverse subordinator")
        };
        let law = TimeChangeLaw::InverseSubordinator { h, steps: 1 << 10 };
        let x = draws(&law, 1.0, 8_000);
        let e = laplace_transform(&x, 1.0);
        let exact = phi_closed(&k, 1.0, -1.0).unwrap();
        assert!((e.mean - exact).abs() < 4.0 * e.stderr + 1e-3, "{} {exact}", e.mean);
        assert!((law.laplace_transform(1.0, 1.0).unwrap() - exact).abs() < 1e-6);
    }

    #[test]
    fn inverse_subordinator_paths_are_nondecreasing() {
        let h = BernsteinSpec::DriftPlusStableSum { b: 0.0, terms: vec![StableTerm { weight: 1.0, exponent: 0.5 }, StableTerm { weight: 0.5, exponent: 0.8 }] };
        let grid = PathGrid::new(1.0, 100).unwrap();
        for i in 0..20 {
            let p = sample_inverse_subordinator_path(&h, &grid, 1 << 10, SeedSpec::new(4, i)).unwrap();
            assert_eq!(p[0], 0.0);
            assert!(p.windows(2).all(|w| w[1] >= w[0]));
            assert!(p.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn stretched_law_is_base_at_g() {
        let k = Kernel::time_stretched(Kernel::fractional_power(0.6).unwrap(), StretchFn::Power(2.0)).unwrap();
        let law = TimeChangeLaw::for_kernel(&k, 1.0).unwrap();
        let base = TimeChangeLaw::for_kernel(&Kernel::fractional_power(0.6).unwrap(), 1.0).unwrap();
        let s = SeedSpec::new(8, 8);
        assert_eq!(sample_time_change(&law, 0.5, s).unwrap(), sample_time_change(&base, 0.25, s).unwrap());
    }

    #[test]
    fn double_laplace_of_inverse_stable() {
        // ∫ e^{-σt} E e^{-λ E_t} dt = h(σ)/(σ(h(σ)+λ)) through the law's own transform
        let law = TimeChangeLaw::InverseSubordinator { h: BernsteinSpec::StablePower { gamma: 0.5 }, steps: 16 };
        let breaks: Vec<f64> = (0..=40).map(|i| 20.0 * (i as f64 / 40.0).powi(2)).collect();
        let v = gauss_legendre_composite(&|t| (-t).exp() * law.laplace_transform(t, 1.0).unwrap(), &breaks, 16);
        assert!((v - 0.5).abs() < 1e-5, "{v}");
    }
}
