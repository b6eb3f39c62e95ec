//! Simulation and verification toolkit for slow/fast systems driven by
//! fractional Ornstein-Uhlenbeck noise.

pub mod chaos;
pub mod config;
pub mod ensemble;
pub mod error;
pub mod gaussian_paths;
pub mod hermite_process;
pub mod homogenizer;
pub mod quadrature;
pub mod report;
pub mod rng;
pub mod rough;
pub mod scaling_limits;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
