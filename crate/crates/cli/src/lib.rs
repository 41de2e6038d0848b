//! Configuration, orchestration and artifact writing for the `planecell` binary.

pub mod commands;
pub mod config;
pub mod output;
