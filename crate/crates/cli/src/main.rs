//! `netlocal`: distances between rooted networks, policy-irrelevance tests,
//! k-NN policy-effect estimates, error bounds and simulations.
//!
//! Exit codes: 0 success, 1 invalid input or configuration, 2 search budget
//! exceeded, 64 usage error. The cache of exact distances holds
//! `NETLOCAL_CACHE_SIZE` entries (0 or unset disables it).

mod commands;
mod manifest;

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;

use commands::{BoundArgs, DistanceArgs, EstimateArgs, FixturesArgs, Output, PsiArgs, SimulateArgs, TestArgs};
use manifest::{default_manifest_path, sha256_hex, RunManifest};
use netlocal::{Metric, SeedStreams};

const EXIT_INVALID: u8 = 1;
const EXIT_BUDGET: u8 = 2;
const EXIT_USAGE: u8 = 64;

#[derive(Debug, Parser)]
#[command(name = "netlocal", version, about = "Local inference for policy effects on networks")]
struct Cli {
    /// Master seed; every random choice draws from a named sub-stream of it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Result file; stdout when omitted.
    #[arg(long, global = true, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Manifest file; defaults to `<out>.manifest.json`, or stderr without --out.
    #[arg(long, global = true, value_name = "FILE")]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Distance between two rooted networks with witness and ε profile.
    Distance(DistanceArgs),
    /// Permutation test of policy irrelevance between two rooted networks.
    Test(TestArgs),
    /// k-nearest-neighbour estimate of the average outcome at a rooted network.
    Estimate(EstimateArgs),
    /// Empirical distribution of nearest-neighbour distances.
    Psi(PsiArgs),
    /// Mean-squared-error bound for the estimate or the policy effect.
    Bound(BoundArgs),
    /// Monte Carlo experiments written as CSV tables.
    Simulate(SimulateArgs),
    /// List or write the built-in rooted networks.
    Fixtures(FixturesArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Distance(_) => "distance",
            Command::Test(_) => "test",
            Command::Estimate(_) => "estimate",
            Command::Psi(_) => "psi",
            Command::Bound(_) => "bound",
            Command::Simulate(_) => "simulate",
            Command::Fixtures(_) => "fixtures",
        }
    }
}

fn metric_from_env() -> Result<Metric> {
    let metric = Metric::new();
    match std::env::var("NETLOCAL_CACHE_SIZE") {
        Ok(v) => {
            let n: usize = v
                .trim()
                .parse()
                .map_err(|_| netlocal::Error::Config(format!("NETLOCAL_CACHE_SIZE must be a count, got `{v}`")))?;
            Ok(if n > 0 { metric.with_cache(n) } else { metric })
        }
        Err(_) => Ok(metric),
    }
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(netlocal::Error::Config("--threads must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("starting the worker pool")?;
    }
    let start = Instant::now();
    let streams = SeedStreams::new(cli.seed);
    let metric = metric_from_env()?;
    let Output { payload, inputs } = match &cli.command {
        Command::Distance(a) => commands::distance(a, metric)?,
        Command::Test(a) => commands::test(a, &metric, &streams)?,
        Command::Estimate(a) => commands::estimate(a, &metric, &streams)?,
        Command::Psi(a) => commands::psi(a, &metric, &streams)?,
        Command::Bound(a) => commands::bound(a, &streams)?,
        Command::Simulate(a) => {
            if cli.out.is_none() {
                return Err(netlocal::Error::Config("simulate needs --out FILE".into()).into());
            }
            commands::simulate(a, &metric, &streams)?
        }
        Command::Fixtures(a) => commands::fixtures(a)?,
    };

    match &cli.out {
        Some(path) => fs::write(path, &payload).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().write_all(&payload)?,
    }

    let manifest = RunManifest {
        command: cli.command.name().to_owned(),
        parameters: serde_json::to_value(&cli.command)?,
        seed: cli.seed,
        tool_version: env!("CARGO_PKG_VERSION").to_owned(),
        inputs,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        result_sha256: sha256_hex(&payload),
    };
    let mut text = serde_json::to_vec_pretty(&manifest)?;
    text.push(b'\n');
    match cli.manifest.clone().or_else(|| cli.out.as_deref().map(default_manifest_path)) {
        Some(path) => fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stderr().write_all(&text)?,
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<netlocal::Error>() {
        Some(netlocal::Error::BudgetExceeded { .. }) => EXIT_BUDGET,
        _ => EXIT_INVALID,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
