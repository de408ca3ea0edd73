//! Configuration, artifact I/O and the experiment commands.

pub mod commands;
pub mod config;
pub mod io;

pub use commands::ExitStatus;
pub use config::{Axis, RunConfig};
