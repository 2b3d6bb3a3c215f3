//! Szegő kernels of positive line bundles and their near-diagonal scaling
//! limits, computed on a small set of model geometries.
//!
//! The crate is organised bottom-up:
//!
//! - [`models`]: the bundles, orthonormal section bases and kernels;
//! - [`geometry`]: preferred charts, preferred frames, Heisenberg charts;
//! - [`scaling`]: rescaled kernels against the Heisenberg model;
//! - [`kodaira`]: Kodaira maps, the Fubini–Study pullback, injectivity;
//! - [`statphase`]: the complex stationary phase integral behind the
//!   scaling theorem;
//! - [`transversality`]: peak sections, lattices, transverse sections and
//!   genus arithmetic;
//! - [`symbolcalc`]: Nijenhuis tensors and the symbol ideal of an almost
//!   complex structure.
//!
//! The [`guide`] module renders the accompanying book chapters.

mod error;
pub mod geometry;
pub mod jet;
pub mod kodaira;
pub mod models;
pub mod numeric;
pub mod report;
pub mod scaling;
pub mod statphase;
pub mod symbolcalc;
pub mod transversality;

pub use error::{Error, Result};
pub use num_complex::Complex64;

pub mod guide;
