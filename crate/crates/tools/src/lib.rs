//! File formats, a parallel campaign runner and the `ensemble-cma` command
//! line built on the `ensemble-cma` core.

pub mod archive_io;
pub mod campaign;
pub mod config;
mod error;
pub mod field_io;
pub mod kv;
pub mod state_io;
pub mod trace_io;

pub use error::{Result, ToolError};

/// Shortest text that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}
