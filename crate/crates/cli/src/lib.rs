//! Config-driven driver for the shalekit analysis loop.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod pipeline;

use std::path::{Path, PathBuf};

/// Environment variable that overrides the configured output directory.
pub const OUT_ENV: &str = "SHALEKIT_OUT";

pub const EXIT_OK: u8 = 0;
pub const EXIT_VALIDATION: u8 = 1;
pub const EXIT_RUNTIME: u8 = 2;

/// `--out`, then `SHALEKIT_OUT`, then the config's `output_dir`.
pub fn resolve_out_dir(flag: Option<&Path>, config: Option<&Path>) -> Option<PathBuf> {
    flag.map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .or_else(|| config.map(Path::to_path_buf))
}
