//! Configuration and output plumbing of the `rockrelax` command.

pub mod config;
pub mod output;

pub use config::{parse_config, serialize_config, ConfigError, RunConfig, Syntax};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "ROCKRELAX_THREADS";
