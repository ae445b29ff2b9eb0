//! Exact spectral analysis, bounds and simulation for the random walk on
//! symplectic forms over F_q^{2n} driven by non-symplectic transvections.

pub mod bounds;
pub mod cli;
pub mod error;
pub mod fq_arith;
pub mod fq_linalg;
pub mod gl_combinat;
pub mod par;
pub mod spectral;
pub mod verify;
pub mod walk;

pub use error::{Error, Result};
