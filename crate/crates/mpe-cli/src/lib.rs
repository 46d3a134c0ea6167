//! File formats, benchmark harness and CLI plumbing around
//! [`mpe_core`].

pub mod cli;
pub mod error;
pub mod harness;
pub mod io;
pub mod synth;

pub use error::ToolError;
