//! Monte Carlo Feynman–Kac estimators.
//!
//! `u(t,x) = E[u₀(ξ_{η^f_{A(t)}}) exp(∫_0^{η^f_{A(t)}} V(ξ_s) ds)]` with `ξ` started at `x`,
//! `A(t)` from the kernel's time-change law and `η^f` the subordinator of the process model.

mod model;
mod solve;

pub use model::{doss_sussmann_flow, BaseProcess, InitialCondition, PotentialSpec, ProcessModel, Sigma};
pub(crate) use model::flow;
#[cfg(test)]
pub(crate) use model::gaussian_density;
pub use solve::{
    path_samples, solve, solve_doss_sussmann, stretch_solution, DossSussmannEstimate, Estimate, FkProblem, GridDiagnostic,
    PathSample, Representation, DEFAULT_GRID_STEPS,
};
