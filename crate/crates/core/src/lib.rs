//! Finite element solvers for the spectral fractional Laplacian and its
//! time-fractional parabolic counterpart.
//!
//! The nonlocal operator `(-Δ)^s` on a domain `Ω` is realized as the
//! Dirichlet-to-Neumann map of a degenerate elliptic problem posed on the
//! semi-infinite cylinder `Ω × (0, ∞)` with weight `y^α`, `α = 1 - 2s`. The
//! cylinder is truncated at height `Y`, discretized with tensor-product
//! meshes graded towards `y = 0`, and solved with conjugate gradients or a
//! V-cycle multigrid whose smoother inverts whole vertical lines.
//!
//! Module map:
//!
//! * [`mesh`] graded intervals, base meshes of `(0,1)` and `(0,1)^2`, cylinder meshes.
//! * [`assembly`] closed-form weighted moments and operator assembly.
//! * [`solver`] CSR conjugate gradients, line smoothers, multigrid.
//! * [`special`] and [`spectral`] closed-form reference solutions.
//! * [`afem`] cylindrical-star error estimator and the adaptive loop.
//! * [`caputo`] L1 time stepping for the Caputo derivative.
//! * [`experiment`] batch studies, rate fits, CSV/JSON output.

pub mod afem;
pub mod assembly;
pub mod caputo;
pub mod data;
mod error;
pub mod exec;
pub mod experiment;
pub mod mesh;
pub mod quadrature;
pub mod solver;
pub mod sparse;
pub mod special;
pub mod spectral;

pub use error::{Error, Result};
pub use exec::Exec;

/// Coefficient vector over the free degrees of freedom of a cylinder mesh.
pub type FieldVector = Vec<f64>;
