//! File formats, thread-parallel drivers and the command-line interface
//! built on [`tmsvloss_core`].

pub mod batch;
pub mod cli;
pub mod error;
pub mod io;

pub use error::{Error, Result};
pub use tmsvloss_core as core;
