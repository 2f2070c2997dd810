//! Monte Carlo summaries with order-independent summation.

use serde::Serialize;

use crate::quad::pairwise_sum;

/// Sample mean and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStderr {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

/// Mean and `std/√n`, both by pairwise summation so the result does not depend on
/// how the values were produced.
pub fn mean_stderr(x: &[f64]) -> MeanStderr {
    let n = x.len();
    if n == 0 {
        return MeanStderr { mean: f64::NAN, stderr: f64::NAN, n };
    }
    let mean = pairwise_sum(x) / n as f64;
    if n == 1 {
        return MeanStderr { mean, stderr: f64::NAN, n };
    }
    let sq: Vec<f64> = x.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&sq) / (n - 1) as f64;
    MeanStderr { mean, stderr: (var / n as f64).sqrt(), n }
}

/// `|a - b| ≤ k (sa + sb)`.
pub fn within_joint(a: f64, sa: f64, b: f64, sb: f64, k: f64) -> bool {
    (a - b).abs() <= k * (sa + sb)
}

/// Empirical `E[e^{-λX}]` with its standard error.
pub fn laplace_transform(x: &[f64], lam: f64) -> MeanStderr {
    let v: Vec<f64> = x.iter().map(|a| (-lam * a).exp()).collect();
    mean_stderr(&v)
}
