//! Simulation and learning toolkit for LEO satellite edge computing with
//! terahertz inter-satellite links.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agent;
pub mod baselines;
pub mod constellation;
pub mod error;
pub mod geo;
pub mod harness;
pub mod link;
pub mod nn;
pub mod sim;
pub mod traffic;

pub use error::{Error, Result};
