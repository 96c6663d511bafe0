//! Desk-scale numerical laboratory for entropic quantum electrodynamics on a
//! finite lattice.
//!
//! The ontic configuration space is a finite truncation of `X_N × A`: N
//! particles hopping on a periodic cubic lattice with `Ls^D` sites, and one
//! cyclic vector-potential amplitude per (site, component) with `M` levels of
//! spacing `dA`. States of knowledge live on the cotangent bundle over
//! probability distributions on that space, in `(rho, phi)` or wave-function
//! coordinates `psi = rho^{1/2} e^{i phi / hbar}`.
//!
//! Module map:
//! - [`lattice`] — the discretization itself: [`lattice::LatticeSpec`],
//!   configuration indexing, and all discrete derivative operators.
//! - [`ephase`] — symplectic form, information metric, complex structure,
//!   Poisson brackets, normalization generator and ray flow.
//! - [`maxent`] — the short-step maximum-entropy transition kernel: prior,
//!   constraints, multipliers, sampler, brute-force dual solver, and the
//!   integral evolution of `rho`.
//! - [`operator`] — Hermitian kernel operators on configuration space,
//!   assembled from structured terms and applied matrix-free.
//! - [`evolution`] — current velocities, continuity equation, Hamiltonian
//!   functional and kernel, the unitary Cayley integrator, action residuals.
//! - [`gauge`] — lattice gauge transformations, electric-field operator,
//!   Gauss constraints (difference and generator forms), physical-subspace
//!   projection, first-class checks.
//! - [`observables`] — charge/current densities, expected A/B/E fields,
//!   Maxwell residuals, Helmholtz split, and the periodic Poisson solver.
//!
//! The crate is `no_std + alloc`; all transcendental math goes through
//! [`libm`] so results are bit-identical across environments. Everything is
//! deterministic given a seed.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod dense;
pub mod ephase;
pub mod error;
pub mod evolution;
pub mod gauge;
pub mod lattice;
pub mod linalg;
pub mod math;
pub mod maxent;
pub mod observables;
pub mod operator;
pub mod rng;

pub use error::{EdError, Result};

/// Complex double — the scalar type for wave functions and kernels.
pub type C64 = num_complex::Complex<f64>;
