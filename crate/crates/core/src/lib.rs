//! Periodic next-nearest-neighbour atomistic chain, its quasinonlocal
//! quasicontinuum (QNL) coupling, and computable consistency, stability and
//! existence estimates for the coupled model.

pub mod calculus;
pub mod certify;
pub mod chain;
pub mod cli;
pub mod error;
pub mod estimate;
pub mod hessian;
pub mod linalg;
pub mod qc;
pub mod solve;

pub use error::{Error, Result};
