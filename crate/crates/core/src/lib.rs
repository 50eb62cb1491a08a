//! Ergodic rates of single-user eigen-beamforming and multi-user zero-forcing
//! in the MIMO broadcast channel with delayed and quantized CSIT, with the
//! SU/MU mode-switching points and operating regions derived from them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod closed_form;
pub mod codebook;
pub mod error;
pub mod linalg;
pub mod mode_switch;
pub mod numerics;
pub mod parallel;
pub mod precoding;
pub mod simulate;

pub use error::{Error, Result};
