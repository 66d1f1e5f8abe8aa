//! Learning truncated additive noise for differentially private mechanisms.
//!
//! The crate discretises noise on an equidistant grid ([`noise`]), reduces a
//! mechanism to its worst-case output pair ([`worst_case`]), bounds the
//! privacy leakage of that pair under composition ([`buckets`], [`moments`],
//! checked against [`oracle`]), and trains a stacked-sigmoid noise model
//! against those bounds ([`learner`]).

pub mod buckets;
pub mod cli;
pub mod compare;
pub mod curve;
pub mod error;
pub mod io;
pub mod learner;
pub mod moments;
pub mod noise;
pub mod oracle;
pub mod verify;
pub mod worst_case;

pub use error::{Error, Result};
