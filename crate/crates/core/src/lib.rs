//! Variational Gaussian wave packets for magnetic Schrödinger equations.
//!
//! The crate propagates thawed Gaussian packets through the parameter
//! equations of motion, provides Gaussian moment and averaging machinery, and
//! includes a spectral grid solver used as reference.

pub mod error;
pub mod fields;
pub mod linalg;
pub mod moments;
pub mod motion;
pub mod odeint;
pub mod gridref;
pub mod egorov;
pub mod packet;

pub use error::{Error, Result};
