//! Configuration, runners and persistence behind the `msalab` binary.

pub mod config;
pub mod output;
pub mod run;

pub use config::RunConfig;
pub use output::{config_hash, persist, resolve_out_dir, RunManifest, OUT_ENV};
pub use run::{run, Command, CommandOutput, Table};
