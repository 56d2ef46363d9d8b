//! `elicit`: prepare query sets, run simulated sweeps, serve live sessions
//! and tabulate their results.

mod prepare;
mod report;
mod serve;
mod simulate;

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "elicit", version, about = "Elicit a linear classification metric from pairwise preferences")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a scorer on a labeled CSV (or take pre-scored data) and write the query set.
    Prepare(prepare::PrepareArgs),
    /// Run the search against simulated linear oracles.
    Simulate(simulate::SimulateArgs),
    /// Serve live sessions over HTTP.
    Serve(serve::ServeArgs),
    /// Tabulate elicited metrics and M for completed sessions.
    Report(report::ReportArgs),
}

/// `id=path` pairs naming prepared query sets. The path may be a
/// `query_set.json` or a directory holding one.
pub(crate) fn parse_dataset(s: &str) -> Result<(String, PathBuf), String> {
    let (id, path) = s
        .split_once('=')
        .ok_or_else(|| format!("expected ID=PATH, got `{s}`"))?;
    if id.is_empty() {
        return Err("dataset id is empty".into());
    }
    Ok((id.to_string(), PathBuf::from(path)))
}

pub(crate) fn load_datasets(
    specs: &[(String, PathBuf)],
) -> Result<std::collections::BTreeMap<String, std::sync::Arc<elicit_core::QuerySet>>> {
    let mut out = std::collections::BTreeMap::new();
    for (id, path) in specs {
        let file = if path.is_dir() { path.join("query_set.json") } else { path.clone() };
        let qs = elicit_service::load_query_set(&file)
            .with_context(|| format!("loading query set `{id}` from {}", file.display()))?;
        if out.insert(id.clone(), std::sync::Arc::new(qs)).is_some() {
            bail!("dataset id `{id}` given twice");
        }
    }
    Ok(out)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let default_level = if matches!(cli.command, Command::Serve(_)) { "info" } else { "warn" };
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(default_level)),
        )
        .init();
    match cli.command {
        Command::Prepare(args) => prepare::run(args),
        Command::Simulate(args) => simulate::run(args),
        Command::Serve(args) => serve::run(args),
        Command::Report(args) => report::run(args),
    }
}
