//! Dataset IO, checkpoints, parallel fold execution and the `gma` command
//! line, on top of `gma-core`.

pub mod checkpoint;
pub mod cli;
pub mod error;
pub mod exec;
pub mod io;

pub use error::{GmaError, Result};
