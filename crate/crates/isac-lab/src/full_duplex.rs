//! Full-duplex operation: self-interference signal models, subtractive
//! time-domain cancellation with imperfect estimates, and spatial nulling
//! through an orthogonal projector on the transmit side.
//!
//! A monostatic base station that transmits while it listens sees its own
//! signal through the self-interference (SI) channel at a level many orders
//! of magnitude above the echoes of interest. Suppression is budgeted in
//! cascade: physical isolation scales the SI channel down, the transmit
//! covariance can be confined to the SI null space, and whatever leaks
//! through is subtracted digitally using a channel estimate.

use num_complex::Complex64;
use rand::Rng;

use crate::blp::{beampattern_mse, AlphaMode, DesiredBeampattern, PrecoderSet};
use crate::error::{IsacError, Result};
use crate::linalg::{mgs_orthonormal, CMat};
use crate::rng;
use crate::scenario::ArrayGeometry;

/// Self-interference channel between a transceiver's own arrays.
#[derive(Clone, Debug)]
pub struct SiChannel {
    /// Coupling matrix, receive elements by transmit elements.
    pub matrix: CMat,
    /// Nominal per-entry SI power in dB, bookkeeping for budget tables.
    pub gain_db: f64,
}

impl SiChannel {
    pub fn new(matrix: CMat, gain_db: f64) -> Result<Self> {
        if matrix.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(IsacError::domain("SI channel entries must be finite"));
        }
        Ok(SiChannel { matrix, gain_db })
    }

    /// I.i.d. complex-normal coupling with mean entry power `10^(gain_db/10)`.
    pub fn random(n_rx: usize, n_tx: usize, gain_db: f64, rng: &mut impl Rng) -> Result<Self> {
        if n_rx == 0 || n_tx == 0 {
            return Err(IsacError::dimension("SI channel needs nonzero dimensions"));
        }
        let scale = 10.0_f64.powf(gain_db / 20.0);
        let matrix =
            CMat::from_fn(n_rx, n_tx, |_, _| rng::complex_normal(rng) * scale);
        SiChannel::new(matrix, gain_db)
    }

    /// Random coupling constrained to a given rank, same power convention.
    pub fn random_rank(
        n_rx: usize,
        n_tx: usize,
        rank: usize,
        gain_db: f64,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if rank == 0 || rank > n_rx.min(n_tx) {
            return Err(IsacError::dimension(format!(
                "rank {rank} impossible for a {n_rx} x {n_tx} channel"
            )));
        }
        let left = CMat::from_fn(n_rx, rank, |_, _| rng::complex_normal(rng));
        let right = CMat::from_fn(rank, n_tx, |_, _| rng::complex_normal(rng));
        let mut matrix = left * right;
        let target = 10.0_f64.powf(gain_db / 20.0) * ((n_rx * n_tx) as f64).sqrt();
        let norm = matrix.norm();
        if norm > 0.0 {
            matrix *= Complex64::from(target / norm);
        }
        SiChannel::new(matrix, gain_db)
    }

    /// Physical isolation as a scalar attenuation of the coupling.
    pub fn isolated(&self, isolation_db: f64) -> SiChannel {
        let factor = Complex64::from(10.0_f64.powf(-isolation_db / 20.0));
        SiChannel {
            matrix: &self.matrix * factor,
            gain_db: self.gain_db - isolation_db,
        }
    }
}

/// Which full-duplex signal model applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FdMode {
    /// The base station senses echoes of its own downlink transmission.
    DownlinkMonostatic,
    /// The base station senses echoes of uplink user transmissions while
    /// its own downlink leaks in as self-interference.
    UplinkBistatic,
    /// Both at once.
    Hybrid,
}

/// Propagation channels entering the full-duplex models. `downlink` carries
/// base-station echoes back to its receive array; `uplink` carries user
/// transmissions (direct or via targets) to the same array.
#[derive(Clone, Debug)]
pub struct FdChannels {
    pub downlink: Option<CMat>,
    pub uplink: Option<CMat>,
}

/// Received baseband block under the selected model:
/// downlink-monostatic `(H_dl + H_si) X`, uplink-bistatic
/// `H_ul X_u + H_si X`, hybrid `H_ul X_u + (H_dl + H_si) X`, plus noise.
pub fn fd_receive(
    mode: FdMode,
    channels: &FdChannels,
    si: &SiChannel,
    x_bs: &CMat,
    x_users: Option<&CMat>,
    noise: &CMat,
) -> Result<CMat> {
    let (n_rx, n_tx) = si.matrix.shape();
    if x_bs.nrows() != n_tx {
        return Err(IsacError::dimension(format!(
            "base-station block has {} rows, SI channel expects {n_tx}",
            x_bs.nrows()
        )));
    }
    if noise.nrows() != n_rx || noise.ncols() != x_bs.ncols() {
        return Err(IsacError::dimension("noise block shape mismatch"));
    }
    fn downlink(channels: &FdChannels, n_rx: usize, n_tx: usize) -> Result<&CMat> {
        let h = channels
            .downlink
            .as_ref()
            .ok_or_else(|| IsacError::domain("mode requires a downlink radar channel"))?;
        if h.shape() != (n_rx, n_tx) {
            return Err(IsacError::dimension("downlink channel shape mismatch"));
        }
        Ok(h)
    }
    fn uplink_term(
        channels: &FdChannels,
        x_users: Option<&CMat>,
        n_rx: usize,
        n_cols: usize,
    ) -> Result<CMat> {
        let h = channels
            .uplink
            .as_ref()
            .ok_or_else(|| IsacError::domain("mode requires an uplink channel"))?;
        let xu =
            x_users.ok_or_else(|| IsacError::domain("mode requires an uplink user block"))?;
        if h.nrows() != n_rx || h.ncols() != xu.nrows() || xu.ncols() != n_cols {
            return Err(IsacError::dimension("uplink channel or block shape mismatch"));
        }
        Ok(h * xu)
    }
    let y = match mode {
        FdMode::DownlinkMonostatic => (downlink(channels, n_rx, n_tx)? + &si.matrix) * x_bs,
        FdMode::UplinkBistatic => {
            uplink_term(channels, x_users, n_rx, x_bs.ncols())? + &si.matrix * x_bs
        }
        FdMode::Hybrid => {
            uplink_term(channels, x_users, n_rx, x_bs.ncols())?
                + (downlink(channels, n_rx, n_tx)? + &si.matrix) * x_bs
        }
    };
    Ok(y + noise)
}

/// Subtract the reconstructed self-interference `H̃ X̃` from a received
/// block. The channel estimate errs by a random perturbation of Frobenius
/// norm `10^(error_db/20)` relative to the true channel; `error_db` of
/// negative infinity means a perfect estimate.
pub fn td_cancel(
    y: &CMat,
    si: &SiChannel,
    x_estimate: &CMat,
    error_db: f64,
    rng: &mut impl Rng,
) -> Result<CMat> {
    let (n_rx, n_tx) = si.matrix.shape();
    if x_estimate.nrows() != n_tx || y.nrows() != n_rx || y.ncols() != x_estimate.ncols() {
        return Err(IsacError::dimension("cancellation block shape mismatch"));
    }
    let estimate = if error_db == f64::NEG_INFINITY {
        si.matrix.clone()
    } else {
        let mut e = CMat::from_fn(n_rx, n_tx, |_, _| rng::complex_normal(rng));
        let norm = e.norm();
        if norm > 0.0 {
            e *= Complex64::from(10.0_f64.powf(error_db / 20.0) * si.matrix.norm() / norm);
        }
        &si.matrix + e
    };
    Ok(y - estimate * x_estimate)
}

/// Spatial null projection outcome. A zero `dof` means the SI channel has
/// full column rank, spatial nulling cannot transmit anything, and the
/// projector degenerates to zero.
#[derive(Clone, Debug)]
pub struct NullProjection {
    pub projector: CMat,
    /// Transmit degrees of freedom remaining after nulling.
    pub dof: usize,
    /// Numerical rank of the SI channel.
    pub rank: usize,
}

/// Orthogonal projector onto the null space of the SI channel,
/// `W = I - Q Q^H` with `Q` an orthonormal basis of the row space. Any
/// transmit block multiplied by `W` produces exactly zero self-interference.
pub fn null_projector(si: &SiChannel) -> Result<NullProjection> {
    let n_tx = si.matrix.ncols();
    if n_tx == 0 {
        return Err(IsacError::dimension("SI channel has no transmit columns"));
    }
    let (q, rank) = mgs_orthonormal(&si.matrix.adjoint(), 1e-10);
    let dof = n_tx - rank;
    let projector = if dof == 0 {
        CMat::zeros(n_tx, n_tx)
    } else if rank == 0 {
        CMat::identity(n_tx, n_tx)
    } else {
        let basis = q.columns(0, rank).clone_owned();
        CMat::identity(n_tx, n_tx) - &basis * basis.adjoint()
    };
    Ok(NullProjection { projector, dof, rank })
}

/// Beampattern matching error of a precoder set after confining its
/// covariance to the SI null space: the plain metric evaluated on
/// `W R W^H`. Directions inside the row space of the SI channel are
/// annihilated, and the returned error honestly reflects that collapse.
pub fn fd_beampattern_mse(
    p: &PrecoderSet,
    si: &SiChannel,
    desired: &DesiredBeampattern,
    array: &ArrayGeometry,
    alpha: AlphaMode,
) -> Result<f64> {
    let null = null_projector(si)?;
    if si.matrix.ncols() != array.num_elements {
        return Err(IsacError::dimension(
            "SI channel transmit side must match the array",
        ));
    }
    let r = p.transmit_covariance();
    let projected = &null.projector * r * null.projector.adjoint();
    beampattern_mse(&projected, desired, array, alpha)
}

/// One stage of the suppression cascade.
#[derive(Clone, Debug)]
pub struct BudgetStage {
    pub stage: String,
    /// Suppression contributed by this stage alone, dB (positive numbers
    /// mean attenuation).
    pub suppression_db: f64,
    /// Running total, dB.
    pub cumulative_db: f64,
}

/// Measure the residual self-interference budget of the standard cascade on
/// a concrete channel draw: physical isolation scales the coupling down,
/// transmit-side null projection removes what the spatial structure allows,
/// and time-domain subtraction with an imperfect estimate cleans up the
/// rest. Each stage sees the system as configured by the previous stages:
/// the canceller estimates the effective coupling from the original block
/// to the receiver, including the projector. Suppression per stage is
/// measured, not assumed.
pub fn si_budget(
    si: &SiChannel,
    isolation_db: f64,
    use_null_projection: bool,
    cancel_error_db: f64,
    x_bs: &CMat,
    rng: &mut impl Rng,
) -> Result<Vec<BudgetStage>> {
    let floor = 1e-300_f64;
    let power = |m: &CMat| m.norm_squared().max(floor);
    let baseline = power(&(&si.matrix * x_bs));
    let mut stages = Vec::new();
    let push = |name: &str, before: f64, after: f64, stages: &mut Vec<BudgetStage>| {
        let suppression = 10.0 * (before / after).log10();
        let cumulative = 10.0 * (baseline / after).log10();
        stages.push(BudgetStage {
            stage: name.to_string(),
            suppression_db: suppression,
            cumulative_db: cumulative,
        });
    };

    let isolated = si.isolated(isolation_db);
    let after_isolation = power(&(&isolated.matrix * x_bs));
    push("isolation", baseline, after_isolation, &mut stages);

    // Effective coupling from the original block once the transmit chain
    // applies the projector (or does not).
    let effective = if use_null_projection {
        let null = null_projector(&isolated)?;
        if null.dof == 0 {
            return Err(IsacError::infeasible(
                "SI channel has full column rank; spatial nulling leaves no \
                 transmit degrees of freedom",
            ));
        }
        SiChannel::new(&isolated.matrix * &null.projector, isolated.gain_db)?
    } else {
        isolated.clone()
    };
    let y = &effective.matrix * x_bs;
    let after_null = power(&y);
    push(
        if use_null_projection { "null_projection" } else { "null_projection_skipped" },
        after_isolation,
        after_null,
        &mut stages,
    );

    let cancelled = td_cancel(&y, &effective, x_bs, cancel_error_db, rng)?;
    push("td_cancellation", after_null, power(&cancelled), &mut stages);
    Ok(stages)
}

/// Render the budget as `stage,suppression_db,cumulative_db`.
pub fn budget_to_csv(stages: &[BudgetStage]) -> String {
    let mut out = String::from("stage,suppression_db,cumulative_db\n");
    for s in stages {
        out.push_str(&format!(
            "{},{:.6},{:.6}\n",
            s.stage, s.suppression_db, s.cumulative_db
        ));
    }
    out
}
