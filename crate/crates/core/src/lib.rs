//! Swing-equation simulation of power networks and training of distributed
//! neural frequency controllers that are stable and frequency-safe by
//! construction.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); file I/O and
//! verification use `f64`.

pub mod controller;
pub mod dynamics;
pub mod equilibrium;
pub mod error;
pub mod io;
pub mod netgraph;
pub mod scalar;
pub mod tape;
pub mod training;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::{Real, Scalar};
