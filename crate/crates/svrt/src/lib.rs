//! File formats, dataset generation on disk, reports and the `svrt` command
//! line, built on the `svrt-core` library.

pub mod checkpoint;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod pgm;
pub mod record;
pub mod report;

pub use error::{Error, Result};
