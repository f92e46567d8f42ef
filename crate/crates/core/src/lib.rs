//! Numerical toolkit for the Laplacian on the hexagonal lattice with
//! long-range metric and potential perturbations.
//!
//! The crate builds the free and perturbed operators, their momentum-space
//! symbol, an explicit conjugate operator in both representations, and a set
//! of checkers: commutator identities, Mourre positivity, weighted resolvent
//! bounds, propagation estimates, decay hypotheses and the integer identities
//! satisfied by the conjugate operator's coefficient tables.

pub mod acceptance;
pub mod config;
pub mod conjugate;
pub mod error;
pub mod hypotheses;
pub mod lap;
pub mod lattice;
pub mod linalg;
pub mod mourre;
pub mod operators;
pub mod symbol;
pub mod tables;

pub use error::{HexError, Result};
