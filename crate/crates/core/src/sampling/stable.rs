use std::f64::consts::PI;

use rand::Rng;
use rand_distr::Exp1;

use super::{MixingLaw, SeedSpec, Substream};
use crate::error::{invalid, Result};
use crate::specfun::zolotarev_a;

fn check_index(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v <= 1.0) {
        return Err(invalid(format!("{name} must lie in (0,1], got {v}")));
    }
    Ok(())
}

/// `η₁` with `E e^{-λη₁} = e^{-λ^γ}`, by Kanter's representation `(a(U)/E)^{(1-γ)/γ}`.
pub fn standard_stable<R: Rng + ?Sized>(gamma: f64, rng: &mut R) -> f64 {
    if gamma == 1.0 {
        return 1.0;
    }
    let u = loop {
        let v: f64 = rng.random();
        if v > 0.0 {
            break PI * v;
        }
    };
    let e: f64 = rng.sample(Exp1);
    ((zolotarev_a(gamma, u).ln() - e.ln()) * (1.0 - gamma) / gamma).exp()
}

/// `η_t = t^{1/γ} η₁` for the γ-stable subordinator.
pub fn sample_stable_subordinator(gamma: f64, t: f64, seed: SeedSpec) -> Result<f64> {
    check_index("stable index γ", gamma)?;
    if !(t > 0.0) {
        return Err(invalid(format!("subordinator time must be > 0, got {t}")));
    }
    Ok(t.powf(1.0 / gamma) * standard_stable(gamma, &mut seed.rng(Substream::Subordinator)))
}

/// `A_β = η₁^{-β}`, whose Laplace transform is `E_β(-λ)`.
pub fn sample_a_stable_mixing(beta: f64, seed: SeedSpec) -> Result<f64> {
    check_index("β", beta)?;
    Ok(MixingLaw::Stable { beta }.draw(&mut seed.rng(Substream::Mixing)))
}

/// `𝒜 = A^{1/γ} η₁` with `A` and `η₁` from separate substreams.
pub fn sample_script_a(gamma: f64, mixing: &MixingLaw, seed: SeedSpec) -> Result<f64> {
    check_index("stable index γ", gamma)?;
    let a = mixing.draw(&mut seed.rng(Substream::Mixing));
    Ok(a.powf(1.0 / gamma) * standard_stable(gamma, &mut seed.rng(Substream::Subordinator)))
}
