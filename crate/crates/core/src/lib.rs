//! Numerical laboratory for a two-species Lotka–Volterra competition model in which
//! the invading species `u` disperses nonlocally on a moving range `[g(t), h(t)]`
//! while the resident `v` disperses nonlocally on the whole line.
//!
//! Modules, bottom up:
//! - [`kernels`]: dispersal kernels and the exact cell quadrature.
//! - [`eigenvalue`]: principal eigenvalue of the truncated nonlocal operator.
//! - [`dynamics`]: the spatially homogeneous ODE, the `F(s)` classification,
//!   attractor-bound iterations and invariant-region checks.
//! - [`simulator`]: explicit time stepping of the free-boundary system.
//! - [`diagnostics`]: metrics, regime detection and theorem-level consistency checks.
//! - [`runner`]: scenario files, sweeps and output emission.

// `!(x > 0.0)` is the NaN-rejecting positivity test used throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod dynamics;
pub mod eigenvalue;
pub mod grid;
pub mod kernels;
pub mod numfmt;
pub mod runner;
pub mod simulator;

pub use dynamics::ModelParams;
pub use kernels::{validate_kernel, KernelSpec, ValidatedKernel};
