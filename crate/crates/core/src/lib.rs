//! Exact full-CI references and a penalized Hartree–Fock 1RDM functional
//! (`F = Y - κ f(n) - b`) evaluated against them on small Hamiltonians.
//!
//! Modules, bottom-up:
//! - [`hamio`]: integrals, FCIDUMP I/O, Hubbard dimer generator
//! - [`fock`]: determinant FCI and CI-vector contractions
//! - [`rdm`]: 1RDM type, natural orbitals, Frobenius distance
//! - [`functionals`]: HF functional, penalties, cumulant energy, gradients
//! - [`minimizer`]: occupation/orbital minimization and (κ, b) fitting
//! - [`analysis`]: geometry scans and diagnostics

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod fock;
pub mod functionals;
pub mod hamio;
pub mod minimizer;
pub mod rdm;

pub use error::{Error, Result};
pub use fock::{solve_fci, CIVector, FciSolution};
pub use functionals::{FunctionalParams, PenaltyFunctional};
pub use hamio::{hubbard_dimer, parse_fcidump, IntegralSet};
pub use rdm::{NaturalDecomposition, OneRDM};
