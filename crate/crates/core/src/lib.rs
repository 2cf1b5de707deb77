#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod check;
pub mod contrastive;
pub mod error;
pub mod mls;
pub mod numdiff;
pub mod special_fn;
pub mod trainer;
pub mod vecops;
pub mod vmf;

pub use error::{Error, Result};
