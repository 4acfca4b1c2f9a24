//! Batch front end for `xos-core`: reads a scenario document, runs one
//! analysis and renders the result.

pub mod commands;
pub mod document;
pub mod error;
pub mod output;

pub use document::{parse, to_toml, Document, Model, FORMAT_VERSION};
pub use error::{exit, CliError};
pub use output::{sig, Format, Report};
