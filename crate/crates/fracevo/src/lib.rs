//! Experiment runner for `fracevo-core`: JSON configs, CSV tables and
//! manifests that can be re-run.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod commands;
pub mod config;
pub mod output;
pub mod specs;

use std::path::PathBuf;

use anyhow::Result;

use commands::invoke;
use config::{Cli, Command};

/// Runs one parsed command line and returns the manifest path.
pub fn run(cli: Cli) -> Result<PathBuf> {
    match cli.command {
        Command::ExitTime(a) => invoke(a),
        Command::Potential(a) => invoke(a),
        Command::SolveLinear(a) => invoke(a),
        Command::SolveNonlinear(a) => invoke(a),
        Command::MittagLeffler(a) => invoke(a),
        Command::Yosida(a) => invoke(a),
        Command::Validate(a) => invoke(a),
        Command::Rerun(r) => commands::rerun(&r),
    }
}

/// Exit code and one-line message for an error.
pub fn describe(err: &anyhow::Error) -> (u8, String) {
    if let Some(c) = err.downcast_ref::<config::ConfigError>() {
        return (2, format!("config error: {c}"));
    }
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<fracevo_core::Error>() {
            return (1, format!("error [{}]: {err:#}", e.category()));
        }
    }
    (1, format!("error: {err:#}"))
}
