//! Block-level precoding sweep between sum rate and beampattern error, with
//! the zero-forcing-plus-waterfilling reference at the communication end.
//!
//! Run with: cargo run --release --example precoding_tradeoff

use isac_lab::blp::{
    zf_with_waterfilling, AlphaMode, DesiredBeampattern, SensingObjective, SolveOptions,
    TradeoffContext,
};
use isac_lab::scenario::Scenario;

fn main() -> isac_lab::Result<()> {
    let sc = Scenario::demo();
    let angles: Vec<f64> = sc.targets.iter().map(|t| t.angle_deg).collect();
    let desired = DesiredBeampattern::from_mainlobes(&angles, 8.0, 1.0)?;
    let options = SolveOptions::default();

    let ctx = TradeoffContext::new(
        &sc.users,
        &sc.tx_array,
        SensingObjective::BeampatternMse { desired, alpha: AlphaMode::Optimized },
        options.clone(),
    )?;

    println!("{:>5} {:>12} {:>14}", "rho", "sum rate", "pattern MSE");
    for point in ctx.sweep(&[0.0, 0.25, 0.5, 0.75, 1.0])? {
        println!(
            "{:>5.2} {:>12.4} {:>14.6e}",
            point.rho, point.solution.sum_rate, point.solution.sensing_value
        );
    }

    // At rho = 1 the joint design must reach zero forcing with waterfilling.
    let zf = zf_with_waterfilling(&sc.users, options.power_budget)?;
    let joint = ctx.comm_endpoint();
    println!("\n{:<6} {:>14} {:>14}", "user", "ZF-WF SINR dB", "joint SINR dB");
    for (k, (z, j)) in zf.sinrs.iter().zip(&joint.user_sinrs).enumerate() {
        println!("{:<6} {:>14.3} {:>14.3}", k, 10.0 * z.log10(), 10.0 * j.log10());
    }
    Ok(())
}
