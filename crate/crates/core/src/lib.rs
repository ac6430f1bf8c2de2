//! Electron transfer in chains of quantum dots: sine-basis eigensolver,
//! split-operator propagation, tight-binding pulse model and telegraph-noise
//! ensembles, all in a shared dimensionless unit system.

// `!(a < b)` is used on purpose so NaN inputs fail validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod eigen;
pub mod error;
pub mod noise;
pub mod plot;
pub mod potential;
pub mod quadrature;
pub mod scenario;
mod spectral;
pub mod splitop;
pub mod tightbinding;
pub mod units;
pub mod wave;

pub use error::{Error, Result};
