//! Finite-element solver and convergence harness for the parabolic-parabolic
//! interface problem with loosely coupled Robin-Robin splitting.
//!
//! The crate provides structured two-subdomain meshes ([`mesh`]), P1/P2
//! assembly ([`fem`]), a sparse direct solver ([`sparse`]), manufactured
//! test cases ([`manufactured`]), the time-stepping schemes ([`schemes`]),
//! error functionals ([`diagnostics`]) and the experiment driver behind the
//! command-line tool ([`experiments`]).

pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod fem;
pub mod manufactured;
pub mod mesh;
pub mod quadrature;
pub mod schemes;
pub mod sparse;

pub use error::{Error, Result};
