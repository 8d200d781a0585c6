//! Command-line front end: CSV ingestion, flag validation, subcommand
//! dispatch and JSON/text reports.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dispatch;
pub mod ingest;
pub mod report;

use std::fs;
use std::io::Write;

use anyhow::{Context, Result};

pub use config::{Cli, Command, OutputFormat, RunConfig};
pub use dispatch::dispatch;
pub use ingest::{ingest_csv, parse_csv, IngestError};
pub use report::{Report, SCHEMA_VERSION};

/// Validates, fills in a generated seed where one is needed, runs and
/// emits the report. Generated seeds are announced on stderr.
pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = RunConfig::from_cli(cli);
    cfg.validate().map_err(anyhow::Error::msg)?;
    if cfg.subcommand.is_stochastic() && cfg.seed.is_none() {
        let seed = rand::random::<u64>();
        eprintln!("seed: {seed}");
        cfg.seed = Some(seed);
    }
    let report = dispatch(&cfg)?;
    let body = match cfg.output {
        OutputFormat::Json => report.to_json()?,
        OutputFormat::Text => report.to_text()?,
    };
    match cfg.out.as_deref().filter(|_| cfg.subcommand != Command::Sample) {
        Some(path) => fs::write(path, body).with_context(|| format!("cannot write {}", path.display()))?,
        None => std::io::stdout().lock().write_all(body.as_bytes())?,
    }
    Ok(())
}
