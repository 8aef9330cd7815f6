//! File formats and helpers behind the `ppdt` binary.

pub mod config;
pub mod error;
pub mod files;
pub mod input;
