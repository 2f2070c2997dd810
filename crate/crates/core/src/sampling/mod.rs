//! Random variates and paths under a seeded stream contract.
//!
//! Every draw is a function of a [`SeedSpec`] and a [`Substream`]: the master seed keys a
//! ChaCha8 generator and `(stream_id, substream)` selects one of its 2⁶⁴ streams. Paths
//! with different `stream_id` never share randomness, and the mixing variable, the
//! subordinator and the driving noise of one path use disjoint substreams.

mod fbm;
mod paths;
mod stable;
mod time_change;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub use fbm::{sample_fbm_path, FbmGenerator};
pub use paths::{sample_markov_path, sample_rsgp_path, RsgpKind, RsgpSampler};
pub use stable::{sample_a_stable_mixing, sample_script_a, sample_stable_subordinator, standard_stable};
pub use time_change::{
    sample_inverse_subordinator_path, sample_time_change, subordinator_path_until, MixingLaw, NumericTimeLaw,
    TimeChangeLaw,
};

/// Independent substreams of one path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Substream {
    Mixing = 0,
    Subordinator = 1,
    Noise = 2,
    Passage = 3,
    Aux = 4,
}

const SUBSTREAMS: u64 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        Self { master_seed, stream_id }
    }

    pub fn rng(&self, sub: Substream) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.master_seed);
        r.set_stream(self.stream_id.wrapping_mul(SUBSTREAMS).wrapping_add(sub as u64));
        r
    }
}

/// Uniform grid `t_k = k·horizon/n_steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathGrid {
    pub horizon: f64,
    pub n_steps: usize,
}

impl PathGrid {
    pub fn new(horizon: f64, n_steps: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) || n_steps == 0 {
            return Err(invalid(format!("path grid needs horizon > 0 and n_steps ≥ 1, got {horizon}, {n_steps}")));
        }
        Ok(Self { horizon, n_steps })
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|k| self.horizon * k as f64 / self.n_steps as f64).collect()
    }
}

/// One stable component `w·λ^β` of a Bernstein function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StableTerm {
    pub weight: f64,
    pub exponent: f64,
}

/// Bernstein function without killing term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum BernsteinSpec {
    /// `f(λ) = λ`
    Identity,
    /// `f(λ) = λ^γ`
    StablePower { gamma: f64 },
    /// `f(λ) = bλ + Σ b_j λ^{β_j}`
    DriftPlusStableSum { b: f64, terms: Vec<StableTerm> },
}

impl BernsteinSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            BernsteinSpec::Identity => Ok(()),
            BernsteinSpec::StablePower { gamma } => {
                if !(*gamma > 0.0 && *gamma <= 1.0) {
                    return Err(invalid(format!("stable power needs γ ∈ (0,1], got {gamma}")));
                }
                Ok(())
            }
            BernsteinSpec::DriftPlusStableSum { b, terms } => {
                if !(*b >= 0.0) {
                    return Err(invalid(format!("drift must satisfy b ≥ 0, got {b}")));
                }
                for t in terms {
                    if !(t.weight > 0.0) || !(t.exponent > 0.0 && t.exponent < 1.0) {
                        return Err(invalid(format!(
                            "stable terms need b_j > 0 and β_j ∈ (0,1), got ({}, {})",
                            t.weight, t.exponent
                        )));
                    }
                }
                if *b == 0.0 && terms.is_empty() {
                    return Err(invalid("Bernstein function f ≡ 0 has no subordinator"));
                }
                Ok(())
            }
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, BernsteinSpec::Identity)
    }

    pub fn eval(&self, lam: f64) -> f64 {
        match self {
            BernsteinSpec::Identity => lam,
            BernsteinSpec::StablePower { gamma } => lam.powf(*gamma),
            BernsteinSpec::DriftPlusStableSum { b, terms } => {
                b * lam + terms.iter().map(|t| t.weight * lam.powf(t.exponent)).sum::<f64>()
            }
        }
    }

    /// One draw of `η^f_a`.
    pub fn draw<R: Rng + ?Sized>(&self, a: f64, rng: &mut R) -> f64 {
        if a == 0.0 {
            return 0.0;
        }
        match self {
            BernsteinSpec::Identity => a,
            BernsteinSpec::StablePower { gamma } => a.powf(1.0 / gamma) * standard_stable(*gamma, rng),
            BernsteinSpec::DriftPlusStableSum { b, terms } => {
                let mut v = b * a;
                for t in terms {
                    v += (t.weight * a).powf(1.0 / t.exponent) * standard_stable(t.exponent, rng);
                }
                v
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a = SeedSpec::new(7, 3);
        assert_eq!(a.rng(Substream::Noise).next_u64(), a.rng(Substream::Noise).next_u64());
        assert_ne!(a.rng(Substream::Noise).next_u64(), a.rng(Substream::Mixing).next_u64());
        assert_ne!(a.rng(Substream::Noise).next_u64(), SeedSpec::new(7, 4).rng(Substream::Noise).next_u64());
    }

    #[test]
    fn bernstein_validation() {
        assert!(BernsteinSpec::StablePower { gamma: 1.2 }.validate().is_err());
        assert!(BernsteinSpec::DriftPlusStableSum { b: 0.0, terms: vec![] }.validate().is_err());
        let h = BernsteinSpec::DriftPlusStableSum { b: 1.0, terms: vec![StableTerm { weight: 2.0, exponent: 0.5 }] };
        assert!(h.validate().is_ok());
        assert_eq!(h.eval(4.0), 8.0);
    }

    #[test]
    fn bernstein_spec_json() {
        let h: BernsteinSpec = serde_json::from_str(r#"{"form":"stable_power","gamma":0.5}"#).unwrap();
        assert_eq!(h, BernsteinSpec::StablePower { gamma: 0.5 });
        assert!(serde_json::from_str::<BernsteinSpec>(r#"{"form":"stable_power","gamma":0.5,"x":1}"#).is_err());
    }

    #[test]
    fn path_grid() {
        let g = PathGrid::new(2.0, 4).unwrap();
        assert_eq!(g.nodes(), vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert!(PathGrid::new(0.0, 4).is_err());
    }
}
