//! File formats, run configuration, reports and the experiment pipeline
//! behind the `skewscan` command.

pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod pipeline;
pub mod report;

pub use error::{Error, Result};
