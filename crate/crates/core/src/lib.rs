//! Simulator and library for positioning-based channel estimation on
//! RIS-aided mmWave links.

// NaN-rejecting checks are written as `!(x > 0.0)`
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod codebook;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod geometry;
pub mod localization;
pub mod oracle;
pub mod par;
pub mod pipeline;

pub use error::{Error, Result};
