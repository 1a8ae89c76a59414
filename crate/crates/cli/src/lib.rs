//! Command implementations and the HTTP service behind the `geonorm` binary.

pub mod commands;
pub mod server;
pub mod settings;

pub use settings::{GlobalArgs, Settings};
