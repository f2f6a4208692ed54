//! Numerical laboratory for scale-free unique-continuation (observability)
//! constants of Schrödinger operators `H_L = -Δ_L + V_L` on cubes
//! `Λ_L = (-L/2, L/2)^d`.
//!
//! The crate computes, at desk scale (d ∈ {1,2}, dense Galerkin truncations):
//!
//! * analytic Laplacian eigenbases for Dirichlet/Neumann/periodic boundary
//!   conditions and dense diagonalization of `H_L` ([`spectral`]),
//! * equidistributed ball arrangements `W_δ(L)` and the regions used by the
//!   ghost-dimension machinery ([`geometry`]),
//! * the two exponential decay classes for eigenfunction expansions, their
//!   minimal constants, and the explicit B→A conversion ([`funclass`]),
//! * every closed-form constant of the estimate pipeline ([`constants`]),
//! * measured and sharp observability constants `‖φ‖²_{W_δ}/‖φ‖²` via Gram
//!   eigenproblems and a dual bound for the weighted class ([`observability`]),
//! * the ghost-dimension extension `F_n` with its two-sided H¹ bounds and
//!   interpolation measurements ([`ghost`]),
//! * the smooth-bump counterexample showing polynomial coefficient decay does
//!   not suffice ([`counterexample`]).
//!
//! All randomness is seeded and all reductions are fixed-order, so every
//! computed value is reproducible bit for bit.

pub mod constants;
pub mod counterexample;
pub mod error;
pub mod funclass;
pub mod geometry;
pub mod ghost;
pub mod linalg;
pub mod logdom;
pub mod observability;
pub mod quad;
pub mod spectral;

pub use error::{Error, Result};
pub use logdom::LogVal;
