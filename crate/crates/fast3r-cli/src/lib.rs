//! Library surface behind the `fast3r` binary, exposed so integration tests
//! can drive the commands directly.

pub mod commands;
pub mod config;
pub mod error;
pub mod ply;
pub mod predfile;
pub mod report;
