//! Declarative pipeline: load a scenario file, run one experiment kind, and
//! print the manifest report with its self-check probes.
//!
//! Run with: cargo run --release --example run_experiment

use isac_lab::experiments::{render_report, run, ExperimentKind};
use isac_lab::scenario::Scenario;
use std::path::Path;

fn main() -> isac_lab::Result<()> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let scenario = Scenario::load(root.join("scenarios/demo.json"))?;
    let out = std::env::temp_dir().join("isac-lab-example-run");

    for kind in [ExperimentKind::FullDuplexBudget, ExperimentKind::OfdmReceivers] {
        let manifest = run(kind, &scenario, &out.join(kind.name()))?;
        print!("{}", render_report(&manifest));
        println!();
    }
    println!("artifacts under {}", out.display());
    Ok(())
}
