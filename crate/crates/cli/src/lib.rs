//! Library behind the `timebin` binary: configuration parsing, run
//! reports, and the subcommand implementations. Kept as a library so
//! integration tests can parse configs and report documents with the same
//! code the binary uses.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;
