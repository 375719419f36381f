pub mod cli;
pub mod complexity;
pub mod config;
pub mod decision;
pub mod error;
pub mod imaging;
pub mod patches;
pub mod representations;
pub mod rft;

pub use error::{LsrError, Result};
