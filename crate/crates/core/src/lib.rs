#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod beamforming;
pub mod channel;
pub mod error;
pub mod estimation;
pub mod harness;
pub mod linalg;
pub mod par;
pub mod power;
pub mod rng;
pub mod scenario;
pub mod se;

pub use error::{Error, Result};
