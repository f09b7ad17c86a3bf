//! Persistence, verification suites and the command-line runner.

pub mod cli;
pub mod config;
pub mod output;
pub mod simulate;
pub mod tables;
pub mod verify;
