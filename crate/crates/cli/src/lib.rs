//! Command-line front end and HTTP service for the on-time arrival solver.

pub mod args;
pub mod commands;
pub mod manifest;
pub mod service;
pub mod source;

use std::sync::Arc;

use anyhow::{Context, Result};

use args::{Cli, Command, ServeArgs};
use source::{builtin, load_network, LoadedNetwork};

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Ingest(a) => commands::run_ingest(a),
        Command::Solve(a) => commands::run_solve(a),
        Command::Policy(a) => commands::run_policy(a),
        Command::Simulate(a) => commands::run_simulate(a),
        Command::Compare(a) => commands::run_compare(a),
        Command::Bench(a) => commands::run_bench(a),
        Command::Serve(a) => run_serve(a),
    }
}

/// `example1` and `syn3`, plus `ID=SOURCE` entries.
pub fn service_networks(extra: &[String]) -> Result<Vec<LoadedNetwork>> {
    let mut nets = vec![
        LoadedNetwork::from_instance(&builtin("example1")?)?,
        LoadedNetwork::from_instance(&builtin("syn3")?)?,
    ];
    for entry in extra {
        let (id, source) = entry
            .split_once('=')
            .with_context(|| format!("expected ID=SOURCE, got `{entry}`"))?;
        let mut net = load_network(source, None)?;
        net.id = id.to_string();
        nets.retain(|n| n.id != id);
        nets.push(net);
    }
    Ok(nets)
}

fn run_serve(args: &ServeArgs) -> Result<()> {
    let state = Arc::new(service::AppState::new(
        service_networks(&args.nets)?,
        args.workers,
        args.log.clone(),
    )?);
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(service::serve(state, args.addr))
}

/// Machine-readable form of an error, printed on failure.
pub fn error_json(err: &anyhow::Error) -> serde_json::Value {
    let kind = err.downcast_ref::<sota_core::Error>().map_or("cli", |e| e.kind());
    serde_json::json!({ "error": { "kind": kind, "message": format!("{err:#}") } })
}
