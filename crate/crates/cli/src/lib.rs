//! File formats, report export, a thread-pool executor and the command-line
//! front end for `anticooc-core`.

pub mod cli;
mod error;
pub mod export;
pub mod io;
pub mod par;

pub use error::{Error, Result};
