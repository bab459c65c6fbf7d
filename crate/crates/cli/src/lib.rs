//! Command-line companion to `sindex-core`: JSON configs, dataset files,
//! CSV trajectory output, and a seeded batch experiment driver.

pub mod config;
pub mod dataset;
pub mod driver;
pub mod error;
pub mod trajectory_io;
