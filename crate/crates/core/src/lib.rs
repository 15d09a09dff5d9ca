//! Domain-wall melting dynamics in two-species Bose-Hubbard chains and their
//! effective t-J and XXZ descriptions.
//!
//! The crate is organised bottom-up: [`models`] builds Hamiltonians as term
//! lists, sparse sector matrices and MPOs; [`tensornet`] holds the
//! block-sparse MPS machinery; [`states`] prepares initial states;
//! [`evolve`] integrates with certified Krylov steps; [`observables`] and
//! [`analysis`] turn states into records and comparisons; [`runner`] wires
//! everything to configs, CSV files and checkpoints.

extern crate blas_src;

pub mod analysis;
pub mod error;
pub mod evolve;
pub mod krylov;
pub mod models;
pub mod observables;
pub mod runner;
pub mod states;
pub mod symmetry;
pub mod tensornet;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
