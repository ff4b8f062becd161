//! File formats, parallel drivers and the `gsls` command-line front end for
//! [`gsls_core`].

pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod parallel;
pub mod plotdata;
pub mod report;

pub use error::{CliError, ExitCode};
