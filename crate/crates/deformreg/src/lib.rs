//! File formats, the external matcher bridge and the `deformreg` command line
//! on top of `deformreg-core`.

pub mod cli;
pub mod error;
pub mod formats;
pub mod matcher;
pub mod report;

pub use error::{Error, Result};
