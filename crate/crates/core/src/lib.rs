//! Regression-driven terramechanics for a four-wheeled rover on granular soil.
//!
//! Wheel slip and sinkage come from calibrated regressions rather than from
//! resolving the wheel–soil contact. Slip is imposed by driving the body at a
//! slip-adjusted speed; sinkage by tuning a compliant contact's stiffness so
//! that its static penetration matches the predicted depth. Terrain keeps a
//! permanent rut depth and a regenerated grouser trace per cell.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod contact;
pub mod error;
pub mod lsq;
pub mod model;
pub mod sim;
pub mod terrain;
pub mod vehicle;

pub use error::{Error, Result};
