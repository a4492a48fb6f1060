//! Structured signal recovery from random linear measurements: convex
//! estimators solved by operator splitting, samplers for the measurement
//! ensembles (including quadratic rank-one projections and their Wigner
//! surrogate), closed-form and Monte Carlo recovery thresholds, and a
//! deterministic parallel sweep harness for mapping phase transitions.

pub mod ensembles;
pub mod error;
pub mod harness;
pub mod model;
pub mod solvers;
pub mod theory;

pub use error::{Error, Result};
