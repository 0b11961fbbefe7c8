//! JSON formats, run reports and the command-line driver for `aleph-core`.

pub mod cli;
pub mod json;
pub mod report;
pub mod suites;
