//! Numerical toolkit for mKdV breathers restricted to the left half-line.

pub mod breather;
pub mod cli;
pub mod config;
pub mod error;
pub mod functionals;
pub mod grid;
pub mod io;
pub mod modulation;
pub mod solver;
pub mod spectral;
pub mod taylor;

pub use breather::{BreatherParams, Shifts};
pub use error::{Error, Result};
pub use grid::{Field, Grid};
