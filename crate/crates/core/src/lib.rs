//! Exact, seed-deterministic simulation of BB84 with block-wise basis
//! choices: the protocol itself, eavesdropping models including the
//! singlet-simulation reduction, classical post-processing, and exact
//! accounting of every random bit consumed.

// `!(x >= 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attacks;
pub mod error;
pub mod infotheory;
pub mod oracle;
pub mod postprocess;
pub mod protocol;
pub mod quantum;
pub mod randomness;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
