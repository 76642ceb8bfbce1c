//! Thin command-line front end over the experiment runner.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use isac_lab::experiments::{self, ExperimentKind};

#[derive(Parser)]
#[command(name = "isac-lab", version, about = "Link-level ISAC experiments from scenario configs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment kind on a scenario and write its artifacts.
    Run {
        /// Experiment kind; see `list-kinds`.
        kind: String,
        /// Scenario config, JSON.
        #[arg(long)]
        scenario: PathBuf,
        /// Output directory for artifacts and `manifest.json`.
        #[arg(long)]
        out: PathBuf,
        /// Scenario override, e.g. `--set seed=7` or `--set users[0].sinr_target_db=12`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Verify a manifest's artifacts and print every probe outcome.
    Report {
        /// Path to a `manifest.json` written by `run`.
        manifest: PathBuf,
    },
    /// List the runnable experiment kinds.
    ListKinds,
}

fn parse_overrides(raw: &[String]) -> isac_lab::Result<Vec<(String, String)>> {
    raw.iter()
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| {
                    isac_lab::IsacError::config(kv.clone(), "override must look like key=value")
                })
        })
        .collect()
}

fn execute(cli: Cli) -> isac_lab::Result<ExitCode> {
    match cli.command {
        Command::Run { kind, scenario, out, set } => {
            let kind: ExperimentKind = kind.parse()?;
            let overrides = parse_overrides(&set)?;
            let sc = experiments::load_scenario_with_overrides(&scenario, &overrides)?;
            let manifest = experiments::run(kind, &sc, &out)?;
            print!("{}", experiments::render_report(&manifest));
            if let Some(p) = manifest.probes.iter().find(|p| !p.pass) {
                eprintln!("probe failed: {}", p.name);
                return Ok(ExitCode::FAILURE);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Report { manifest } => {
            let m = experiments::verify_artifacts(&manifest)?;
            print!("{}", experiments::render_report(&m));
            if let Some(p) = m.probes.iter().find(|p| !p.pass) {
                eprintln!("probe failed: {}", p.name);
                return Ok(ExitCode::FAILURE);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::ListKinds => {
            for kind in ExperimentKind::ALL {
                println!("{:<24} {}", kind.name(), kind.description());
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
