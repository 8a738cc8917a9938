//! Command-line client, platform launcher and local signing agent.

pub mod agent;
pub mod app;
pub mod defs;
pub mod error;
pub mod ops;
pub mod profile;

pub use error::CliError;
