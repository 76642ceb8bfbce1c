//! Self-interference suppression cascade for a monostatic full-duplex node:
//! physical isolation, transmit null projection, and time-domain subtraction,
//! each stage measured on a concrete channel draw.
//!
//! Run with: cargo run --release --example full_duplex_budget

use isac_lab::full_duplex::{null_projector, si_budget, SiChannel};
use isac_lab::linalg::CMat;
use isac_lab::rng;

fn main() -> isac_lab::Result<()> {
    let (n_rx, n_tx, rank) = (16, 16, 4);
    let mut r = rng::stream(31, "fd-example");
    let si = SiChannel::random_rank(n_rx, n_tx, rank, 0.0, &mut r)?;
    let x = CMat::from_fn(n_tx, 32, |_, _| rng::complex_normal(&mut r));

    let proj = null_projector(&si)?;
    let leak = (&si.matrix * &proj.projector).norm() / si.matrix.norm();
    println!(
        "rank-{rank} coupling on {n_tx} antennas: projector keeps {} spatial DoF, leak {:.1e}",
        proj.dof, leak
    );

    println!("\n{:<22} {:>12} {:>12}", "stage", "stage dB", "cumulative dB");
    for stage in si_budget(&si, 40.0, true, -30.0, &x, &mut rng::stream(31, "fd-example-run"))? {
        println!("{:<22} {:>12.1} {:>12.1}", stage.stage, stage.suppression_db, stage.cumulative_db);
    }

    println!("\nwithout null projection:");
    for stage in si_budget(&si, 40.0, false, -30.0, &x, &mut rng::stream(31, "fd-example-run"))? {
        println!("{:<22} {:>12.1} {:>12.1}", stage.stage, stage.suppression_db, stage.cumulative_db);
    }
    Ok(())
}
