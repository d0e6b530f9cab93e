//! File formats, encoders and the `sumreward` command line on top of
//! `sumreward-core`.

pub mod cli;
pub mod encoder;
pub mod error;
pub mod io;
pub mod manifest;
pub mod scoring;
pub mod summarize;

pub use error::{Error, Result};
