//! Extreme eigenvalues of spiked complex Wishart matrices.
//!
//! The crate evaluates the generalized Tracy–Widom laws `F_k` and the
//! GUE-edge laws `G_k`, samples the spiked ensemble `S = XX*/M`, computes
//! exact finite-size gap probabilities from contour-integral kernels, and
//! provides the goodness-of-fit and independence statistics used to compare
//! them.
//!
//! Everything here is `no_std` with `alloc`. File formats, the command line
//! and parallel fan-out live in the companion `spiked-spectra` crate.
#![no_std]
#![forbid(unsafe_code)]
#![warn(missing_docs)]
extern crate alloc;

pub mod ensemble;
pub mod error;
pub mod fredholm;
pub mod laws;
pub mod linalg;
pub mod oracle;
pub mod quad;
pub mod special;
pub mod stats;

pub use error::{Error, Result};

/// Complex double used throughout.
pub type C64 = num_complex::Complex<f64>;
