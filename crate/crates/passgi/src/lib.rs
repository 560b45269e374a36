//! Toolchain backend, experiment runner, and CLI plumbing for evolving
//! compiler pass sequences with [`passgi_core`].

pub mod backend;
pub mod builtin;
pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod report;

pub use error::Error;
