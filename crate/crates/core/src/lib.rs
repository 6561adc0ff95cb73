// Negated comparisons reject NaN on purpose; index loops mirror matrix notation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod error;
pub mod family;
pub mod measure;
pub mod particles;
pub mod problem;
pub mod selection;
pub mod solver;
mod util;
pub mod verify;

pub use error::{Error, Result};
