//! `pauli`: run, sweep, verify and convergence drivers for the Pauli–Darwin /
//! Pauli–Poisswell simulator.
//!
//! Exit status: 0 when every gate passes, 1 when a gate fails, 2 on errors
//! (an `error.toml` record is left in the output directory).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use crate::commands::{ErrorRecord, Gate};
use crate::config::{ConfigError, DiagnosticsSection, RunConfig};

#[derive(Parser)]
#[command(name = "pauli", version, about = "Pseudo-spectral Pauli-Darwin / Pauli-Poisswell simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve one configuration and write diagnostics.csv and snapshots.
    Run(Common),
    /// Compare runs over `sweep.epsilons` and fit the deviation rate.
    Sweep(Common),
    /// Check the operator identities on random fields.
    Verify(VerifyArgs),
    /// Observed order under dt refinement (or a grid-size study with `convergence.ns`).
    Convergence(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    #[command(flatten)]
    shared: Shared,
}

#[derive(Args)]
struct VerifyArgs {
    /// Only the `seed` and `[diagnostics]` entries are used.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[command(flatten)]
    shared: Shared,
}

#[derive(Args)]
struct Shared {
    /// Output directory (overrides `output.directory`).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Override a config key, e.g. `--set hamiltonian_evolution.epsilon=0.1`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Shared {
    fn overrides(&self) -> Vec<String> {
        let mut o = self.set.clone();
        if let Some(seed) = self.seed {
            o.push(format!("seed={seed}"));
        }
        if let Some(out) = &self.out {
            o.push(format!("output.directory={}", toml::Value::String(out.display().to_string())));
        }
        o
    }

    fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| "out".into())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (fallback_dir, result) = match &cli.command {
        Command::Run(c) => (c.shared.out_dir(), load(c).and_then(|cfg| commands::run(&cfg))),
        Command::Sweep(c) => (c.shared.out_dir(), load(c).and_then(|cfg| commands::sweep(&cfg))),
        Command::Convergence(c) => (c.shared.out_dir(), load(c).and_then(|cfg| commands::convergence(&cfg))),
        Command::Verify(v) => (v.shared.out_dir(), verify(v)),
    };
    match result {
        Ok(gates) => report(&gates),
        Err(err) => {
            eprintln!("error: {err:#}");
            let record = ErrorRecord::from_error(&err);
            if let Err(e) = record.write(&fallback_dir) {
                eprintln!("could not write error record: {e}");
            }
            ExitCode::from(2)
        }
    }
}

fn load(c: &Common) -> Result<RunConfig> {
    Ok(config::parse_config(&c.config, &c.shared.overrides())?)
}

fn report(gates: &[Gate]) -> ExitCode {
    print!("{}", commands::describe(gates));
    if gates.iter().all(|g| g.passed) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

/// `seed` and `[diagnostics]` for `verify`, which does not need a full run
/// configuration.
#[derive(serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct VerifyConfig {
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    diagnostics: DiagnosticsSection,
}

fn verify(v: &VerifyArgs) -> Result<Vec<Gate>> {
    let (seed, diag) = match &v.config {
        Some(path) => {
            let cfg = config::parse_config(path, &v.shared.overrides())?;
            (cfg.seed, cfg.diagnostics)
        }
        None => {
            let mut table = toml::Table::new();
            for o in &v.shared.set {
                config::apply_override(&mut table, o)?;
            }
            let vc: VerifyConfig = serde_path_to_error::deserialize(table).map_err(|e| ConfigError::TypeError {
                key: e.path().to_string(),
                message: e.inner().message().to_string(),
            })?;
            (v.shared.seed.unwrap_or(vc.seed), vc.diagnostics)
        }
    };
    let dir = v.shared.out_dir();
    std::fs::create_dir_all(&dir)?;
    let resolved = VerifyConfig { seed, diagnostics: diag };
    std::fs::write(dir.join("resolved_config.toml"), toml::to_string(&resolved)?)?;
    commands::verify(seed, &resolved.diagnostics, &dir)
}
