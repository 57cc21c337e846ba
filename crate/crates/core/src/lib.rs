//! Electric-field control of donor spins: spin Hamiltonian, Stark shifts,
//! pulse propagation, experiment sequences, tomography and the pulse-program
//! format.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod engine;
pub mod error;
pub mod output;
pub mod presets;
pub mod program;
pub mod sequences;
pub mod spin;
pub mod stark;
pub mod tomography;

pub use error::{Error, ParseError, Result};
