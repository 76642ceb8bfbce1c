//! Secrecy-rate beamforming with and without artificial noise under equal QoS
//! and beampattern ceilings, plus a directional-modulation beam set that pins
//! every user's symbol exactly while the radar mainlobe stays steady.
//!
//! Run with: cargo run --release --example secure_beams

use isac_lab::blp::{AlphaMode, DesiredBeampattern};
use isac_lab::constellation::Constellation;
use isac_lab::rng;
use isac_lab::scenario::{rayleigh_channel, ArrayGeometry, CommUser};
use isac_lab::secure_data::{
    beam_gain_db, best_pattern_mse, dm_beam_set, solve_secure, EveModel, SecureOptions,
    SensingConstraint,
};
use num_complex::Complex64;

fn main() -> isac_lab::Result<()> {
    let n = 8;
    let array = ArrayGeometry::half_wavelength(n);
    let eve_angle = 0.0;
    let mut r = rng::stream(23, "secure-example");
    let users: Vec<CommUser> = (0..2)
        .map(|_| CommUser {
            channel: rayleigh_channel(&mut r, n),
            sinr_target_db: 6.0,
            noise_power: 0.05,
        })
        .collect();
    let eve = EveModel::new(eve_angle, Complex64::new(0.9, 0.0), 0.05, 0.0)?;

    let desired = DesiredBeampattern::from_mainlobes(&[eve_angle], 10.0, 1.0)?;
    let opts = SecureOptions::default();
    let floor = best_pattern_mse(&array, &users, &desired, &opts)?;
    let sensing = SensingConstraint {
        desired,
        alpha: AlphaMode::Optimized,
        max_mse: (floor * 3.0).max(1e-12),
    };

    let no_an = solve_secure(
        &array,
        &users,
        &eve,
        Some(&sensing),
        &SecureOptions { with_an: false, ..opts.clone() },
    )?;
    let with_an = solve_secure(&array, &users, &eve, Some(&sensing), &opts)?;

    println!("{:<18} {:>12} {:>10} {:>12}", "design", "secrecy rate", "eve rate", "pattern MSE");
    for (name, sol) in [("no noise", &no_an), ("artificial noise", &with_an)] {
        println!(
            "{:<18} {:>12.4} {:>10.4} {:>12.4e}",
            name,
            sol.secrecy_rate,
            sol.eve_rate,
            sol.sensing_mse.unwrap_or(f64::NAN)
        );
    }

    // Directional modulation: one weight vector per QPSK symbol pair, exact
    // symbol pinning at both users, mainlobe gain steady across the set.
    let dm_array = ArrayGeometry::half_wavelength(16);
    let w_rad = dm_array.steering_vector(eve_angle)?.map(|v| v / 4.0);
    let user_angles = [-45.0, 30.0];
    let syms = Constellation::psk(4)?.points().to_vec();
    let beams = dm_beam_set(&w_rad, &dm_array, &user_angles, &syms)?;
    let mut max_pin = 0.0_f64;
    let mut gains = Vec::new();
    for (b, w) in beams.iter().enumerate() {
        for (k, &ang) in user_angles.iter().enumerate() {
            let a = dm_array.steering_vector(ang)?;
            let idx = (b / syms.len().pow((user_angles.len() - 1 - k) as u32)) % syms.len();
            max_pin = max_pin.max((w.dotc(&a) - syms[idx]).norm());
        }
        gains.push(beam_gain_db(&dm_array, w, eve_angle)?);
    }
    let spread = gains.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - gains.iter().copied().fold(f64::INFINITY, f64::min);
    println!("\nDM beam set: {} beams over 2 users x QPSK", beams.len());
    println!("max symbol pinning error {max_pin:.2e}");
    println!("mainlobe gain spread     {spread:.3} dB");
    Ok(())
}
