#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod error;
pub mod experiment;
pub mod filon;
pub mod geometry;
pub mod kernels;
pub mod oracle;
pub mod parallel;
pub mod quadrature;
pub mod spectral;
pub mod special;
pub mod verify;

pub use error::{Error, Result};
