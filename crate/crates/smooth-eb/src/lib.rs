//! File formats, parallel runners and the `smooth-eb` command-line tool on
//! top of `smooth-eb-core`.

pub mod cli;
mod error;
pub mod io;
pub mod report;
pub mod runner;

pub use error::{Error, Result};
