//! Library side of the `dao` command: configuration loading and the
//! calibrate, run and eval commands.

pub mod calibrate;
pub mod config;
pub mod eval;
pub mod run;
