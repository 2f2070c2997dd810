use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};

use super::{PathGrid, SeedSpec, Substream};
use crate::error::{Error, Result};

const CHOLESKY_MAX: usize = 2048;

enum Method {
    Circulant { scale: Vec<f64>, fft: Arc<dyn Fft<f64>> },
    Cholesky { l: DMatrix<f64> },
}

/// Exact fractional Brownian motion on a uniform grid: circulant embedding of the
/// increment covariance, with a dense Cholesky factor as fallback.
pub struct FbmGenerator {
    hurst: f64,
    grid: PathGrid,
    method: Method,
}

impl fmt::Debug for FbmGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = match self.method {
            Method::Circulant { .. } => "circulant",
            Method::Cholesky { .. } => "cholesky",
        };
        write!(f, "FbmGenerator(H = {}, n = {}, {m})", self.hurst, self.grid.n_steps)
    }
}

// autocovariance of unit-step fractional Gaussian noise
fn fgn_cov(h: f64, k: usize) -> f64 {
    let k = k as f64;
    let p = 2.0 * h;
    0.5 * ((k + 1.0).powf(p) - 2.0 * k.powf(p) + (k - 1.0).abs().powf(p))
}

fn check_hurst(h: f64) -> Result<()> {
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::InvalidHurst(h));
    }
    Ok(())
}

impl FbmGenerator {
    pub fn new(hurst: f64, grid: PathGrid) -> Result<Self> {
        check_hurst(hurst)?;
        match Self::circulant(hurst, grid) {
            Ok(g) => Ok(g),
            Err(e) if grid.n_steps <= CHOLESKY_MAX => Self::cholesky(hurst, grid).map_err(|e2| Error::Embedding(format!("{e}; {e2}"))),
            Err(e) => Err(e),
        }
    }

    pub fn circulant(hurst: f64, grid: PathGrid) -> Result<Self> {
        check_hurst(hurst)?;
        let n = grid.n_steps;
        let m = 2 * n;
        let mut c: Vec<Complex64> = (0..m).map(|j| Complex64::new(fgn_cov(hurst, j.min(m - j)), 0.0)).collect();
        let fft = FftPlanner::new().plan_fft_forward(m);
        fft.process(&mut c);
        let top = c.iter().map(|z| z.re).fold(0.0, f64::max);
        if let Some(z) = c.iter().find(|z| z.re < -1e-10 * top) {
            return Err(Error::Embedding(format!("circulant eigenvalue {:.3e} is negative", z.re)));
        }
        let scale = c.iter().map(|z| (z.re.max(0.0) / m as f64).sqrt()).collect();
        Ok(Self { hurst, grid, method: Method::Circulant { scale, fft } })
    }

    pub fn cholesky(hurst: f64, grid: PathGrid) -> Result<Self> {
        check_hurst(hurst)?;
        let n = grid.n_steps;
        if n > CHOLESKY_MAX {
            return Err(Error::Embedding(format!("Cholesky fallback is limited to {CHOLESKY_MAX} steps, got {n}")));
        }
        let cov = DMatrix::from_fn(n, n, |i, j| fgn_cov(hurst, i.abs_diff(j)));
        let l = cov.cholesky().ok_or_else(|| Error::Embedding("increment covariance is not positive definite".into()))?.l();
        Ok(Self { hurst, grid, method: Method::Cholesky { l } })
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    pub fn grid(&self) -> &PathGrid {
        &self.grid
    }

    /// `B^H` at the grid nodes, starting from `B^H_0 = 0`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let n = self.grid.n_steps;
        let incr: Vec<f64> = match &self.method {
            Method::Circulant { scale, fft } => {
                let mut z: Vec<Complex64> = scale
                    .iter()
                    .map(|s| Complex64::new(s * rng.sample::<f64, _>(StandardNormal), s * rng.sample::<f64, _>(StandardNormal)))
                    .collect();
                fft.process(&mut z);
                z[..n].iter().map(|v| v.re).collect()
            }
            Method::Cholesky { l } => {
                let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
                (l * z).iter().copied().collect()
            }
        };
        let step = self.grid.dt().powf(self.hurst);
        let mut path = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        path.push(0.0);
        for v in incr {
            acc += v * step;
            path.push(acc);
        }
        path
    }
}

pub fn sample_fbm_path(hurst: f64, grid: &PathGrid, seed: SeedSpec) -> Result<Vec<f64>> {
    Ok(FbmGenerator::new(hurst, *grid)?.sample(&mut seed.rng(Substream::Noise)))
}
