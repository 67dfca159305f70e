//! Plate–membrane transmission system on an annulus/disk pair.
//!
//! A structurally damped plate on the annulus `r_interface < r < r_outer`
//! is coupled across the interface circle to a damped or undamped membrane
//! on the inner disk. The system is decomposed into angular Fourier modes;
//! each mode is discretized with C¹ Hermite elements on the annulus and
//! linear elements on the disk, sharing the interface value.

pub mod assembly;
pub mod cli;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod fit;
pub mod model;
pub mod spectral;

pub use error::{Error, Result};
