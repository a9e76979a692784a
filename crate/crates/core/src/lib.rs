//! Equilibrium measures of the logarithmic energy on a union of intervals,
//! their linear response and the density-density correlation kernel.
//!
//! The quadrature and series layer ([`quadrature`], [`surface::gamma_coeffs`])
//! is generic over [`scalar::Scalar`]; everything above it works in `f64`.

// `!(x < tol)` is deliberate throughout: NaN has to fail the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod equilibrium;
pub mod error;
pub mod kernel;
pub mod oracle;
pub mod perturbation;
pub mod quadrature;
pub mod scalar;
pub mod surface;
pub mod verify;

pub use equilibrium::{solve, EquilibriumSolution, PotentialSpec, SolutionRecord, SolveOptions};
pub use error::{Error, Result};
pub use kernel::{respond, variance, KernelGrid, KernelMethod, ResponseSample};
pub use oracle::{discrete_equilibrium, fd_response, DiscreteMeasure, OracleOptions};
pub use perturbation::Perturbation;
pub use surface::{CycleFamily, Support, SurfaceCache};

pub type Mesh = quadrature::IntervalMesh<f64>;
pub type Gamma = surface::GammaCoeffs<f64>;
pub type Cheb = quadrature::ChebSeries<f64>;
