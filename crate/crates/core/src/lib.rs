//! Change-point tests for dynamic networks.

pub mod baseline;
pub mod error;
pub mod harness;
pub mod io;
pub mod mosaic;
pub mod netgen;
pub mod oracle;
pub mod segstats;
pub mod statutil;
pub mod symmat;

pub use error::{Error, Result};
