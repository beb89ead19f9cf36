//! Library surface of the command line driver, kept separate from the
//! binary so integration tests can exercise config parsing and the pipeline
//! pieces directly.

pub mod config;
pub mod context;
pub mod pipeline;
