//! Simulation, estimation and bounds for network-coded bidirectional
//! amplify-and-forward relay chains.
//!
//! Two end nodes T₁ and T₂ exchange data through a chain of `2N − 1`
//! half-duplex relays. The crate covers pilot construction, the training
//! round that lets each end node learn the composite channel parameters it
//! needs for self-interference cancellation, LMMSE and ML estimators of those
//! parameters, their closed-form MSE and Cramér–Rao bounds, and a Monte-Carlo
//! driver producing CSV tables.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod channel;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod numeric;
pub mod simulator;
pub mod training;

pub use error::{Error, Result};
pub use numeric::{CMat, CVec, RngStream, C64};
