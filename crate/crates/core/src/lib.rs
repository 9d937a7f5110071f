//! Stochastic-geometry analysis of LEO satellite downlinks where a ground
//! station is jointly served by its `K` nearest satellites, which null their
//! mutual interference, while every farther visible satellite interferes.
//!
//! Distances are kilometres everywhere except inside path-loss terms, which
//! work in metres so that the free-space gain constant is consistent.

pub mod coverage;
pub mod distributions;
pub mod error;
pub mod geometry;
pub mod interference;
pub mod montecarlo;
pub mod quadrature;
pub mod special;
pub mod units;

pub use error::{Error, Result};
