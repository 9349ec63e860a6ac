//! Numerical toolkit for singular integrals with mixed homogeneity.
//!
//! The crate provides the anisotropic quasi-distance and its ellipsoids
//! ([`metric`]), variable kernels and their axioms ([`kernel`]), spherical
//! harmonic expansions ([`harmonics`]), sampled functions ([`gridfn`]),
//! truncated singular integrals and commutators ([`operators`]), maximal
//! functions and Morrey/BMO machinery ([`spaces`]), and an experiment
//! harness that checks the expected inequalities empirically ([`verify`]).

pub mod coverage;
pub mod error;
pub mod gridfn;
pub mod harmonics;
pub mod kernel;
pub mod metric;
pub mod numeric;
pub mod operators;
pub mod rng;
pub mod spaces;
pub mod verify;

pub use error::{Error, Result};
