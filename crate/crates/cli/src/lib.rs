//! Orchestration for the `mbtree` binary: argument parsing, config
//! merging, artifact formatting and the acceptance suite.

pub mod acceptance;
pub mod commands;
pub mod config;
pub mod error;
