//! File formats and batch commands around [`omnistereo_core`].
//!
//! The `omnistereo` binary is a thin clap front end over [`commands`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod formats;

pub use commands::{CommandError, EXIT_INPUT, EXIT_OPTIMIZATION};

/// Thread count from `OMNISTEREO_THREADS`: unset, empty or `0` means auto.
pub fn thread_count(var: Option<&str>) -> Result<usize, String> {
    match var.map(str::trim) {
        None | Some("") => Ok(0),
        Some(v) => v.parse().map_err(|_| format!("OMNISTEREO_THREADS must be a non-negative integer, got {v:?}")),
    }
}
