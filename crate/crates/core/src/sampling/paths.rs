use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{FbmGenerator, PathGrid, SeedSpec, Substream};
use crate::error::{invalid, Error, Result};
use crate::fk::ProcessModel;

/// The three randomly scaled Gaussian processes with equal one-dimensional marginals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RsgpKind {
    /// `B_{𝒜 t^{θ/γ}}`
    TimeChangedBm,
    /// `√𝒜 B_{t^{θ/γ}}`
    ScaledBm,
    /// `√𝒜 B^H_t` with `H = θ/(2γ)`
    ScaledFbm,
}

/// Path sampler for one representation, reusable across draws of `𝒜`.
#[derive(Debug)]
pub struct RsgpSampler {
    kind: RsgpKind,
    exponent: f64,
    grid: PathGrid,
    fbm: Option<FbmGenerator>,
}

impl RsgpSampler {
    pub fn new(kind: RsgpKind, gamma: f64, theta: f64, grid: PathGrid) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0 && theta > 0.0) {
            return Err(invalid(format!("RSGP needs γ ∈ (0,1] and θ > 0, got γ = {gamma}, θ = {theta}")));
        }
        let exponent = theta / gamma;
        let fbm = match kind {
            RsgpKind::ScaledFbm => Some(FbmGenerator::new(exponent / 2.0, grid)?),
            _ => None,
        };
        Ok(Self { kind, exponent, grid, fbm })
    }

    pub fn grid(&self) -> &PathGrid {
        &self.grid
    }

    pub fn sample<R: Rng + ?Sized>(&self, cal_a: f64, rng: &mut R) -> Vec<f64> {
        let nodes = self.grid.nodes();
        match self.kind {
            RsgpKind::ScaledFbm => {
                let s = cal_a.sqrt();
                self.fbm.as_ref().expect("built with the sampler").sample(rng).into_iter().map(|v| s * v).collect()
            }
            RsgpKind::TimeChangedBm | RsgpKind::ScaledBm => {
                let (time_scale, amp) = match self.kind {
                    RsgpKind::TimeChangedBm => (cal_a, 1.0),
                    _ => (1.0, cal_a.sqrt()),
                };
                let mut out = Vec::with_capacity(nodes.len());
                let (mut b, mut prev) = (0.0, 0.0);
                for t in nodes {
                    let tau = time_scale * t.powf(self.exponent);
                    if tau > prev {
                        b += (tau - prev).sqrt() * rng.sample::<f64, _>(StandardNormal);
                    }
                    prev = tau;
                    out.push(amp * b);
                }
                out
            }
        }
    }
}

/// One RSGP path given a draw of `𝒜`.
pub fn sample_rsgp_path(kind: RsgpKind, cal_a: f64, gamma: f64, theta: f64, grid: &PathGrid, seed: SeedSpec) -> Result<Vec<f64>> {
    if !(cal_a >= 0.0) {
        return Err(invalid(format!("𝒜 must be ≥ 0, got {cal_a}")));
    }
    if kind == RsgpKind::ScaledFbm {
        let h = theta / (2.0 * gamma);
        if !(h > 0.0 && h < 1.0) {
            return Err(Error::InvalidHurst(h));
        }
    }
    Ok(RsgpSampler::new(kind, gamma, theta, *grid)?.sample(cal_a, &mut seed.rng(Substream::Noise)))
}

/// Path of `ξ` started at `x0`, subordinated when the model says so.
///
/// Brownian and stable increments are exact; the Doss–Sussmann path is the flow of the
/// exact driving Brownian path, so the only error is in the flow integration.
pub fn sample_markov_path(model: &ProcessModel, x0: f64, grid: &PathGrid, seed: SeedSpec) -> Result<Vec<f64>> {
    model.base.validate()?;
    model.subordination.validate()?;
    let mut noise = seed.rng(Substream::Noise);
    let mut sub = seed.rng(Substream::Subordinator);
    let dt = grid.dt();
    let mut y = 0.0;
    let mut out = Vec::with_capacity(grid.n_steps + 1);
    out.push(x0);
    for _ in 0..grid.n_steps {
        let dtau = model.subordination.draw(dt, &mut sub);
        y = model.base.advance(y, dtau, &mut noise);
        out.push(model.base.observe(y, x0));
    }
    Ok(out)
}
