//! Transfer-operator cocycles and local limit theorem diagnostics for
//! inhomogeneous finite-state Markov chains.

pub mod chain;
pub mod dp;
pub mod error;
pub mod llt;
pub mod matrix_products;
pub mod numeric;
pub mod observables;
pub mod processes;
pub mod report;
pub mod sim;
pub mod transfer;
pub mod window;

pub use error::{Error, Result};
