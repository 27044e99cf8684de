// Negated float comparisons are used on purpose so NaN inputs fail validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acoustics;
pub mod attack;
pub mod cli;
pub mod error;
pub mod feedback;
pub mod field;
pub mod signals;
pub mod sim;

pub use error::{Error, Result};
