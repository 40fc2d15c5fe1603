//! Spectral coin measures with prescribed mixing and rigidity profiles along
//! integer sequences, certified Fourier coefficients, and a finite-resolution
//! model of the dyadic interpolation construction.

pub mod arith;
pub mod cli;
pub mod coin;
mod error;
pub mod generic;
pub mod grid;
pub mod linalg;
pub mod poly;
pub mod prime;
pub mod report;
pub mod sequences;
pub mod weyl;

pub use error::{Error, Result};
