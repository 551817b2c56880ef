//! Numerical harmonic analysis on the Heisenberg group `H^n`.
//!
//! The crate is organised bottom-up:
//!
//! * [`group`] – group law, Korányi norm, balls, left-invariant derivatives;
//! * [`quad`] and [`sampling`] – one-dimensional rules and ball quadrature;
//! * [`potential`] – reverse-Hölder potentials and the critical radius `ρ`;
//! * [`kernels`] – heat kernel, Schrödinger semigroups, fractional integrals
//!   and the kernel-estimate checkers;
//! * [`functions`] and [`spaces`] – test functions and Morrey/BMO/Hölder norms;
//! * [`experiments`] – configuration, boundedness sweeps and CSV output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod exec;
pub mod experiments;
pub mod functions;
pub mod group;
pub mod kernels;
pub mod potential;
pub mod quad;
pub mod sampling;
pub mod spaces;

pub use error::{Error, Result};
pub use functions::{ScalarField, TestFunction};
pub use group::{Ball, GroupElement, GroupParams};
pub use potential::Potential;
pub use sampling::{QuadratureMethod, QuadratureSpec};
