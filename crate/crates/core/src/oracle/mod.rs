//! Deterministic reference solutions: mixing-density quadrature, Fourier multipliers,
//! the L1 finite-difference scheme for the Caputo case and the double Laplace check.

mod caputo;
mod double_laplace;
mod mixing;
mod spectral;

pub use caputo::{caputo_l1, caputo_l1_converged, crank_nicolson_heat, l1_caputo_derivative, GridSolution};
pub use double_laplace::{double_laplace_identity, DoubleLaplaceReport};
pub use mixing::semigroup_quadrature;
pub use spectral::{spectral_solution, SpectralGrid, Symbol};
