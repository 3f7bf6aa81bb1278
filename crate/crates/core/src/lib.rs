pub mod classifiers;
pub mod cli;
pub mod dataset;
pub mod embedded;
pub mod error;
pub mod evaluation;
pub mod filter;
pub mod report;
pub mod stats;
pub mod wrapper;

pub use error::{Error, Result};
