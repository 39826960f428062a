//! Constrained energy minimization for the Schrödinger–Maxwell system
//!
//! ```text
//! −Δu + K(x) φ u = |u|^{p−1} u + h(x)   in Ω = (0,1)³
//! −Δφ = K(x) u²                          in Ω
//! u = φ = 0                              on ∂Ω
//! ```
//!
//! with supercritical `p` allowed. The pipeline estimates the embedding
//! constants that make the ball `‖Δu‖_{L³} <= r₁` invariant under the
//! auxiliary linear solve, minimizes the energy over that ball, and then
//! certifies the minimizer as a discrete weak solution.
//!
//! The crate is laid out bottom-up:
//!
//! * [`grid`]: the unit-cube grid, fields, norms and the 7-point Laplacian
//! * [`poisson`]: conjugate-gradient Dirichlet solves and `φ_u`
//! * [`energy`]: the energy, its split, `I_K` and the first variation
//! * [`sampling`]: the seeded family of smooth random test fields
//! * [`ball`]: constants `C₁`, `C₂`, the radius `r₁` and the bound `m`
//! * [`minimize`]: retracted Sobolev-gradient descent over the ball
//! * [`verify`]: fixed-point, PDE-residual and variational-inequality checks
//! * [`runner`]: configuration, end-to-end runs, reports and grid studies
//!
//! Data-parallel loops go through [`exec`], which falls back to sequential
//! execution when the `parallel` feature is off.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ball;
pub mod energy;
pub mod error;
pub mod exec;
pub mod grid;
pub mod minimize;
pub mod poisson;
pub mod runner;
pub mod sampling;
pub mod verify;

pub use error::{Error, Result};
pub use grid::{build_grid, DomainGrid, ScalarField};
