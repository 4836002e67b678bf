//! Fisher information of lattice-periodic Poisson population codes.
//!
//! A grid module is an ensemble of neurons whose tuning curves are translated
//! Gaussian lattice sums `theta_{L+y}(alpha) = sum_p exp(-pi alpha |p+y|^2)`.
//! The resolution of the population code at the origin is governed by the
//! functional
//!
//! ```text
//! F(L) = integral over B_R of  |grad theta|^2 / (4 theta)  d mu(y)
//! ```
//!
//! maximized over unit-covolume lattices. This crate provides:
//!
//! * [`lattice`] — lattice construction, fundamental-domain charts in
//!   dimensions 2 and 3, duals, shells and strong-eutaxy checks;
//! * [`theta`] — truncated translated theta sums with analytic gradients,
//!   the per-point Fisher density `Q`, and discrete-Gaussian expectations;
//! * [`quadrature`] — Gauss–Legendre disk and ball rules for radial measures;
//! * [`fisher`] — firing fields and the Fisher functional with its scaling
//!   and dual-space identities;
//! * [`landscape`] — moduli-space scans, parameter sweeps, finite-difference
//!   Hessians and volume-stationarity checks;
//! * [`spike`] — Poisson spiking simulation, empirical Fisher traces and a
//!   maximum-likelihood decoder against the Cramér–Rao bound;
//! * [`output`] / [`config`] — deterministic CSV/JSON emission and the flat
//!   key-value run configuration used by the CLI.

// Comparisons are written `!(x > 0.0)` on purpose: the negation also
// rejects NaN, which `x <= 0.0` would let through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod fisher;
pub mod landscape;
pub mod lattice;
pub mod output;
pub mod quadrature;
pub mod rng;
pub mod spike;
pub mod theta;

pub use error::Error;

/// Crate version string recorded in every output artifact.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
