//! Numerical q-analysis on geometric lattices: Jackson-type q-integrals,
//! q-moments and growth classes, the moment-driven q-convolution, q-Fourier
//! transforms, and the lattice analyticity test.

pub mod error;
pub mod scaled;
pub mod qcore;
pub mod par;
pub mod lattice;
pub mod deriv;
pub mod special;
pub mod moments;
pub mod convolution;
pub mod fourier;
pub mod analytic;
pub mod verify;

pub use error::{QError, Result};
pub use num_complex::Complex64;
pub use scaled::Scaled;
