//! Numerical model of a two-crystal quasi-phase-matched photon-pair source.

// `!(x > 0.0)` style checks also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod coherence;
pub mod error;
pub mod experiment;
pub mod fixtures;
pub mod materials;
pub mod phasematch;
pub mod quadrature;
pub mod quantum;
pub mod scenario;
pub mod tomography;

pub use error::{Error, Result};
