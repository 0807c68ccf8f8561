//! Multiple kernel learning with spectral (Ky-Fan) constraints on the kernel
//! weights, together with the complexity machinery used to bound it.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod complexity;
pub mod config;
pub mod constraints;
pub(crate) mod convex;
pub mod data;
pub mod error;
pub mod hypothesis;
pub mod kernels;
pub mod oracle;
pub mod spectral;
pub mod trainer;

pub use error::{Error, Result};
