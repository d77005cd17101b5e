//! File formats, the paired benchmark and the pipeline glue behind the
//! `tiedfactor` command line. All numerics live in `tiedfactor-core`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod archive;
pub mod bench;
pub mod error;
pub mod fsutil;
pub mod model;
pub mod pipeline;
pub mod scores;

pub use error::{IoError, IoResult};
