//! Data-security designs: artificial-noise transmission, secrecy-rate
//! evaluation and optimization, and radar-centric directional modulation.
//!
//! The threat model is a single-antenna eavesdropper at a known angle
//! (optionally with an angular uncertainty that widens the sensing mainlobe).
//! Artificial noise is carried in a factor `F` so its covariance `F F^H`
//! stays positive semidefinite through every optimizer step; legitimate users
//! receive that noise as plain interference.

use num_complex::Complex64;

use crate::blp::{
    ascend, beampattern_gains, beampattern_mse, channel_matrix, full_state, user_sinr,
    AlphaMode, DesiredBeampattern, PrecoderSet, Projection, POWER_SLACK,
};
use crate::error::{IsacError, Result};
use crate::linalg::{mgs_orthonormal, CMat, CVec};
use crate::scenario::{ArrayGeometry, CommUser};

/// Transmit design carrying both precoded data and artificial noise.
#[derive(Clone, Debug)]
pub struct AnTransmit {
    /// Data precoder, one column per user.
    pub w_comm: CMat,
    /// Artificial-noise factor; the transmitted AN covariance is `F F^H`.
    pub an_factor: CMat,
    pub power_budget: f64,
}

impl AnTransmit {
    pub fn new(w_comm: CMat, an_factor: CMat, power_budget: f64) -> Result<Self> {
        if w_comm.nrows() != an_factor.nrows() {
            return Err(IsacError::dimension(format!(
                "{} precoder rows vs {} noise-factor rows",
                w_comm.nrows(),
                an_factor.nrows()
            )));
        }
        if !(power_budget > 0.0) {
            return Err(IsacError::domain("power budget must be positive"));
        }
        let total = w_comm.norm_squared() + an_factor.norm_squared();
        if total > power_budget * (1.0 + POWER_SLACK) {
            return Err(IsacError::domain(format!(
                "transmit power {total:.6} exceeds budget {power_budget:.6}"
            )));
        }
        Ok(Self { w_comm, an_factor, power_budget })
    }

    pub fn num_antennas(&self) -> usize {
        self.w_comm.nrows()
    }

    pub fn total_power(&self) -> f64 {
        self.w_comm.norm_squared() + self.an_factor.norm_squared()
    }

    /// Artificial-noise covariance `F F^H`; PSD by construction.
    pub fn an_covariance(&self) -> CMat {
        &self.an_factor * self.an_factor.adjoint()
    }

    /// View as a precoder set whose radar columns carry the noise factor;
    /// per-user SINR and beampattern formulas then apply unchanged.
    pub fn as_precoder(&self) -> PrecoderSet {
        PrecoderSet {
            w_comm: self.w_comm.clone(),
            w_radar: self.an_factor.clone(),
            power_budget: self.power_budget,
        }
    }
}

/// Single-antenna eavesdropper with line-of-sight geometry.
#[derive(Clone, Debug)]
pub struct EveModel {
    pub angle_deg: f64,
    /// Complex path gain between the array and the eavesdropper.
    pub path_loss: Complex64,
    pub noise_power: f64,
    /// Half-width of the angular uncertainty interval around `angle_deg`.
    pub uncertainty_deg: f64,
}

impl EveModel {
    pub fn new(
        angle_deg: f64,
        path_loss: Complex64,
        noise_power: f64,
        uncertainty_deg: f64,
    ) -> Result<Self> {
        if !(noise_power > 0.0) {
            return Err(IsacError::domain("eavesdropper noise power must be positive"));
        }
        if !(uncertainty_deg >= 0.0) {
            return Err(IsacError::domain("angular uncertainty must be nonnegative"));
        }
        Ok(Self { angle_deg, path_loss, noise_power, uncertainty_deg })
    }

    /// Effective channel vector `beta * a(theta_E)`.
    pub fn channel(&self, array: &ArrayGeometry) -> Result<CVec> {
        Ok(array.steering_vector(self.angle_deg)? * self.path_loss)
    }
}

/// Achievable rate at the eavesdropper:
/// `log2(1 + |beta|^2 a^H R_c a / (|beta|^2 a^H R_N a + sigma_E^2))`
/// with `R_c = W_c W_c^H` and `R_N` the artificial-noise covariance.
pub fn eve_rate(t: &AnTransmit, eve: &EveModel, array: &ArrayGeometry) -> Result<f64> {
    if array.num_elements != t.num_antennas() {
        return Err(IsacError::dimension("array size does not match transmit design"));
    }
    let a = array.steering_vector(eve.angle_deg)?;
    let g = eve.path_loss.norm_sqr();
    let signal = g * (t.w_comm.adjoint() * &a).norm_squared();
    let jam = g * (t.an_factor.adjoint() * &a).norm_squared();
    Ok((1.0 + signal / (jam + eve.noise_power)).log2())
}

/// Per-user achievable rates with artificial noise as interference.
pub fn user_rates(t: &AnTransmit, users: &[CommUser]) -> Result<Vec<f64>> {
    let sinrs = user_sinr(&t.as_precoder(), users)?;
    Ok(sinrs.iter().map(|&g| (1.0 + g).log2()).collect())
}

/// Worst-case secrecy rate `min_u [R_{B,u} - R_E]^+`.
pub fn secrecy_rate(
    t: &AnTransmit,
    users: &[CommUser],
    eve: &EveModel,
    array: &ArrayGeometry,
) -> Result<f64> {
    let re = eve_rate(t, eve, array)?;
    let rates = user_rates(t, users)?;
    let worst = rates.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok((worst - re).max(0.0))
}

/// Sum secrecy rate `sum_u [R_{B,u} - R_E]^+`, the optional aggregate metric.
pub fn sum_secrecy_rate(
    t: &AnTransmit,
    users: &[CommUser],
    eve: &EveModel,
    array: &ArrayGeometry,
) -> Result<f64> {
    let re = eve_rate(t, eve, array)?;
    let rates = user_rates(t, users)?;
    Ok(rates.iter().map(|&r| (r - re).max(0.0)).sum())
}

/// Secrecy objective aggregated across users.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SecrecyMetric {
    #[default]
    WorstCase,
    Sum,
}

/// Beampattern-shape side constraint on the total transmit covariance.
#[derive(Clone, Debug)]
pub struct SensingConstraint {
    pub desired: DesiredBeampattern,
    pub alpha: AlphaMode,
    /// Upper bound on the beampattern matching error.
    pub max_mse: f64,
}

/// Knobs of the secrecy-rate solver.
#[derive(Clone, Debug)]
pub struct SecureOptions {
    pub power_budget: f64,
    /// Allow a nonzero artificial-noise component.
    pub with_an: bool,
    pub metric: SecrecyMetric,
    pub iterations: usize,
}

impl Default for SecureOptions {
    fn default() -> Self {
        Self { power_budget: 1.0, with_an: true, metric: SecrecyMetric::WorstCase, iterations: 600 }
    }
}

/// Secrecy-rate design outcome with feasibility diagnostics.
#[derive(Clone, Debug)]
pub struct SecureSolution {
    pub transmit: AnTransmit,
    pub secrecy_rate: f64,
    pub eve_rate: f64,
    pub user_sinrs: Vec<f64>,
    pub sensing_mse: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Maximize the secrecy rate subject to per-user SINR targets, an optional
/// beampattern-error ceiling, and the power budget.
///
/// Feasibility is established first: the QoS targets alone via zero-forcing,
/// then the sensing ceiling by error descent at fixed QoS floors. The two
/// failure modes are reported as distinct errors. When artificial noise is
/// enabled the ascent continues from the best noise-free design, so enabling
/// it can only improve the achieved secrecy rate.
pub fn solve_secure(
    array: &ArrayGeometry,
    users: &[CommUser],
    eve: &EveModel,
    sensing: Option<&SensingConstraint>,
    opts: &SecureOptions,
) -> Result<SecureSolution> {
    if users.is_empty() {
        return Err(IsacError::dimension("at least one user required"));
    }
    let n = array.num_elements;
    let h = channel_matrix(users, n)?;
    let a = array.steering_vector(eve.angle_deg)?;
    let budget = opts.power_budget;

    // QoS feasibility gate: exact-target zero forcing inside the budget.
    let zf = crate::blp::zf_at_targets(users, budget).map_err(|e| {
        IsacError::infeasible(format!("QoS targets are infeasible without security: {e}"))
    })?;
    let floors: Vec<f64> = users.iter().map(|u| u.sinr_target_linear() * (1.0 - 1e-9)).collect();
    let base = PrecoderSet {
        w_comm: zf.w_comm.clone(),
        w_radar: CMat::zeros(n, 0),
        power_budget: budget,
    };
    let mut start = full_state(&base, n);

    let eval = SecrecyWork {
        h,
        eve_channel: &a * eve.path_loss,
        eve_noise: eve.noise_power,
        noise: users.iter().map(|u| u.noise_power).collect(),
        metric: opts.metric,
        pattern: match sensing {
            Some(s) => Some(PatternGrid::new(&s.desired, array, s.alpha)?),
            None => None,
        },
    };

    let sinr_ok =
        |w: &CMat| -> bool { eval.sinrs(w).iter().zip(&floors).all(|(&g, &f)| g >= f) };

    // Sensing feasibility gate: descend the pattern error at fixed QoS.
    let mut sensing_cap = f64::INFINITY;
    if let Some(s) = sensing {
        sensing_cap = s.max_mse;
        if eval.pattern_mse(&start) > sensing_cap {
            let run = ascend(
                eval.wake_noise(&start, 1e-3),
                budget,
                Projection::Ball,
                opts.iterations,
                1e-12,
                &|w| -eval.pattern_mse(w),
                &|w| -eval.pattern_mse_grad(w),
                &sinr_ok,
            );
            if eval.pattern_mse(&run.state) > sensing_cap {
                return Err(IsacError::infeasible(format!(
                    "sensing error floor {:.3e} exceeds the ceiling {:.3e} at the required QoS",
                    eval.pattern_mse(&run.state),
                    sensing_cap
                )));
            }
            start = run.state;
        }
    }

    let feasible =
        |w: &CMat| -> bool { sinr_ok(w) && eval.pattern_mse_opt(w).map_or(true, |m| m <= sensing_cap) };
    debug_assert!(feasible(&start));

    // Candidate starts: the feasibility base, its full-budget rescale, and a
    // few deterministic random blends. Infeasible candidates are dropped.
    // The worst-case objective is nonsmooth, so a single start is routinely
    // trapped; the ensemble is identical across noise-free and noise-enabled
    // runs to keep their comparison one-sided.
    let mut starts: Vec<CMat> = vec![start.clone()];
    let scale = (budget / start.norm_squared().max(1e-300)).sqrt();
    if scale > 1.0 {
        let scaled = &start * Complex64::from(scale * (1.0 - 1e-12));
        if feasible(&scaled) {
            starts.push(scaled);
        }
    }
    let mut seed_rng = crate::rng::stream(0x53c2, "secure-multistart");
    for _ in 0..3 {
        let noise_dir = CMat::from_fn(n, start.ncols(), |_, _| {
            crate::rng::complex_normal(&mut seed_rng)
        });
        for sigma in [0.5, 0.2, 0.05] {
            let mut cand = &start * Complex64::from(scale.max(1.0) * 0.7)
                + &noise_dir * Complex64::from(sigma * budget.sqrt() / noise_dir.norm());
            let p = cand.norm_squared();
            if p > budget {
                cand *= Complex64::from((budget / p).sqrt());
            }
            if feasible(&cand) {
                starts.push(cand);
                break;
            }
        }
    }

    // Phase 1 ascends with the noise columns pinned at zero; phase 2 lets
    // artificial noise grow from each phase-1 result. The secrecy gradient
    // vanishes at F = 0, so the phase-2 start is nudged off zero, keeping the
    // nudge only when it stays feasible and does not lose rate.
    let value = |w: &CMat| eval.secrecy_gap(w);
    let mut best: Option<CMat> = None;
    let mut iterations = 0usize;
    let mut converged = true;
    for s in starts {
        let run1 = ascend(
            s,
            budget,
            Projection::Ball,
            opts.iterations,
            1e-12,
            &value,
            &|w| eval.secrecy_grad(w, false),
            &feasible,
        );
        iterations += run1.iterations;
        let mut leg = run1.state;
        let mut leg_converged = run1.converged;
        if opts.with_an {
            let mut seed = leg.clone();
            let base_value = value(&leg);
            for shrink in 0..8 {
                let cand =
                    eval.wake_noise_toward_eve(&leg, 1e-1 * 0.31_f64.powi(shrink), budget);
                if feasible(&cand)
                    && value(&cand) >= base_value - 1e-12 * (1.0 + base_value.abs())
                {
                    seed = cand;
                    break;
                }
            }
            let run2 = ascend(
                seed,
                budget,
                Projection::Ball,
                opts.iterations,
                1e-12,
                &value,
                &|w| eval.secrecy_grad(w, true),
                &feasible,
            );
            iterations += run2.iterations;
            if value(&run2.state) >= value(&leg) {
                leg = run2.state;
                leg_converged = run2.converged;
            }
        }
        if best.as_ref().map_or(true, |b| value(&leg) > value(b)) {
            converged = leg_converged;
            best = Some(leg);
        }
    }
    let best = best.expect("at least the feasibility base start is present");

    let (w_comm, an_factor) = eval.split(&best);
    let transmit = AnTransmit::new(w_comm, an_factor, budget)?;
    let sr = match opts.metric {
        SecrecyMetric::WorstCase => secrecy_rate(&transmit, users, eve, array)?,
        SecrecyMetric::Sum => sum_secrecy_rate(&transmit, users, eve, array)?,
    };
    let sensing_mse = match sensing {
        Some(s) => Some(beampattern_mse(
            &transmit.as_precoder().transmit_covariance(),
            &s.desired,
            array,
            s.alpha,
        )?),
        None => None,
    };
    Ok(SecureSolution {
        eve_rate: eve_rate(&transmit, eve, array)?,
        secrecy_rate: sr,
        user_sinrs: user_sinr(&transmit.as_precoder(), users)?,
        sensing_mse,
        iterations,
        converged,
        transmit,
    })
}

/// One step of the angular-uncertainty sweep.
#[derive(Clone, Debug)]
pub struct UncertaintyPoint {
    pub uncertainty_deg: f64,
    pub secrecy_rate: f64,
    /// Achieved 3 dB mainlobe width around the eavesdropper angle.
    pub mainlobe_width_deg: f64,
    pub solution: SecureSolution,
}

/// Sweep the angular uncertainty of a target that doubles as the
/// eavesdropper: each step broadens the required sensing mainlobe to cover
/// the uncertainty interval, then maximizes the secrecy rate under it.
pub fn sweep_uncertainty(
    array: &ArrayGeometry,
    users: &[CommUser],
    eve_base: &EveModel,
    uncertainties_deg: &[f64],
    base_halfwidth_deg: f64,
    opts: &SecureOptions,
) -> Result<Vec<UncertaintyPoint>> {
    let mut out = Vec::with_capacity(uncertainties_deg.len());
    for &delta in uncertainties_deg {
        if !(delta >= 0.0) {
            return Err(IsacError::domain("uncertainty must be nonnegative"));
        }
        let eve = EveModel { uncertainty_deg: delta, ..eve_base.clone() };
        let halfwidth = base_halfwidth_deg + delta;
        let desired =
            DesiredBeampattern::from_mainlobes(&[eve.angle_deg], halfwidth, 1.0)?;
        // Ceiling at a fixed multiple of the best error achievable at this
        // width, so the constraint binds equally hard across the sweep.
        let floor = best_pattern_mse(array, users, &desired, opts)?;
        let sensing = SensingConstraint {
            desired,
            alpha: AlphaMode::Optimized,
            max_mse: (floor * 1.5).max(1e-12),
        };
        let solution = solve_secure(array, users, &eve, Some(&sensing), opts)?;
        let width = mainlobe_width_deg(array, &solution.transmit, eve.angle_deg)?;
        out.push(UncertaintyPoint {
            uncertainty_deg: delta,
            secrecy_rate: solution.secrecy_rate,
            mainlobe_width_deg: width,
            solution,
        });
    }
    Ok(out)
}

/// Smallest beampattern error reachable while holding every QoS target.
pub fn best_pattern_mse(
    array: &ArrayGeometry,
    users: &[CommUser],
    desired: &DesiredBeampattern,
    opts: &SecureOptions,
) -> Result<f64> {
    let n = array.num_elements;
    let zf = crate::blp::zf_at_targets(users, opts.power_budget)?;
    let floors: Vec<f64> = users.iter().map(|u| u.sinr_target_linear() * (1.0 - 1e-9)).collect();
    let eval = SecrecyWork {
        h: channel_matrix(users, n)?,
        eve_channel: CVec::zeros(n),
        eve_noise: 1.0,
        noise: users.iter().map(|u| u.noise_power).collect(),
        metric: SecrecyMetric::WorstCase,
        pattern: Some(PatternGrid::new(desired, array, AlphaMode::Optimized)?),
    };
    let base = PrecoderSet {
        w_comm: zf.w_comm.clone(),
        w_radar: CMat::zeros(n, 0),
        power_budget: opts.power_budget,
    };
    let start = eval.wake_noise(&full_state(&base, n), 1e-3);
    let sinr_ok =
        |w: &CMat| -> bool { eval.sinrs(w).iter().zip(&floors).all(|(&g, &f)| g >= f) };
    let run = ascend(
        start,
        opts.power_budget,
        Projection::Ball,
        opts.iterations,
        1e-12,
        &|w| -eval.pattern_mse(w),
        &|w| -eval.pattern_mse_grad(w),
        &sinr_ok,
    );
    Ok(eval.pattern_mse(&run.state))
}

/// 3 dB width of the transmit beampattern lobe containing `center_deg`.
pub fn mainlobe_width_deg(
    array: &ArrayGeometry,
    t: &AnTransmit,
    center_deg: f64,
) -> Result<f64> {
    let r = t.as_precoder().transmit_covariance();
    let step = 0.25;
    let angles: Vec<f64> = (0..=720).map(|i| -90.0 + i as f64 * step).collect();
    let gains = beampattern_gains(&r, array, &angles)?;
    let center_idx = ((center_deg + 90.0) / step).round() as usize;
    let center_idx = center_idx.min(angles.len() - 1);
    // Climb to the local peak, then walk both 3 dB edges.
    let mut peak = center_idx;
    while peak + 1 < gains.len() && gains[peak + 1] > gains[peak] {
        peak += 1;
    }
    while peak > 0 && gains[peak - 1] > gains[peak] {
        peak -= 1;
    }
    let half = gains[peak] * 0.5;
    let mut lo = peak;
    while lo > 0 && gains[lo - 1] >= half {
        lo -= 1;
    }
    let mut hi = peak;
    while hi + 1 < gains.len() && gains[hi + 1] >= half {
        hi += 1;
    }
    Ok((hi - lo) as f64 * step)
}

// ---------------------------------------------------------------------------
// Secrecy optimizer internals
// ---------------------------------------------------------------------------

/// Evaluation workspace over the stacked state `[W_c | F]` of width U + N.
struct SecrecyWork {
    /// Rows are `h_u^H`.
    h: CMat,
    eve_channel: CVec,
    eve_noise: f64,
    noise: Vec<f64>,
    metric: SecrecyMetric,
    pattern: Option<PatternGrid>,
}

struct PatternGrid {
    /// Rows are `a(theta_i)^H`.
    a: CMat,
    desired: Vec<f64>,
    alpha: AlphaMode,
}

impl PatternGrid {
    fn new(desired: &DesiredBeampattern, array: &ArrayGeometry, alpha: AlphaMode) -> Result<Self> {
        let mut a = CMat::zeros(desired.angles_deg.len(), array.num_elements);
        for (i, &theta) in desired.angles_deg.iter().enumerate() {
            let s = array.steering_vector(theta)?;
            for j in 0..array.num_elements {
                a[(i, j)] = s[j].conj();
            }
        }
        Ok(Self { a, desired: desired.gains.clone(), alpha })
    }
}

impl SecrecyWork {
    fn num_users(&self) -> usize {
        self.h.nrows()
    }

    fn split(&self, w: &CMat) -> (CMat, CMat) {
        let u = self.num_users();
        let n = w.nrows();
        (w.columns(0, u).clone_owned(), w.columns(u, n).clone_owned())
    }

    fn sinrs(&self, w: &CMat) -> Vec<f64> {
        let u = self.num_users();
        let hw = &self.h * w;
        (0..u)
            .map(|k| {
                let signal = hw[(k, k)].norm_sqr();
                let mut denom = self.noise[k];
                for j in 0..w.ncols() {
                    if j != k {
                        denom += hw[(k, j)].norm_sqr();
                    }
                }
                signal / denom
            })
            .collect()
    }

    fn rates(&self, w: &CMat) -> Vec<f64> {
        self.sinrs(w).iter().map(|&g| (1.0 + g).log2()).collect()
    }

    fn eve_snr(&self, w: &CMat) -> (f64, f64) {
        let u = self.num_users();
        let ew = w.adjoint() * &self.eve_channel;
        let mut signal = 0.0;
        let mut jam = 0.0;
        for j in 0..w.ncols() {
            if j < u {
                signal += ew[j].norm_sqr();
            } else {
                jam += ew[j].norm_sqr();
            }
        }
        (signal, jam + self.eve_noise)
    }

    fn eve_rate(&self, w: &CMat) -> f64 {
        let (s, d) = self.eve_snr(w);
        (1.0 + s / d).log2()
    }

    /// Unclamped secrecy objective; its positive part is the secrecy rate.
    fn secrecy_gap(&self, w: &CMat) -> f64 {
        let re = self.eve_rate(w);
        let rates = self.rates(w);
        match self.metric {
            SecrecyMetric::WorstCase => {
                rates.iter().cloned().fold(f64::INFINITY, f64::min) - re
            }
            SecrecyMetric::Sum => {
                let sum: f64 = rates.iter().map(|&r| (r - re).max(0.0)).sum();
                if sum > 0.0 {
                    sum
                } else {
                    // All gaps clamped: fall back to the best raw gap so the
                    // ascent still has a direction to improve.
                    rates.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - re
                }
            }
        }
    }

    /// Ascent direction for the secrecy gap; noise columns are pinned to
    /// zero unless `with_noise` is set.
    fn secrecy_grad(&self, w: &CMat, with_noise: bool) -> CMat {
        let u = self.num_users();
        let n = w.nrows();
        let rates = self.rates(w);
        let active: Vec<usize> = match self.metric {
            SecrecyMetric::WorstCase => {
                let worst = rates
                    .iter()
                    .enumerate()
                    .min_by(|a, b| a.1.total_cmp(b.1))
                    .map(|(i, _)| i)
                    .unwrap_or(0);
                vec![worst]
            }
            SecrecyMetric::Sum => {
                let re = self.eve_rate(w);
                let pos: Vec<usize> =
                    (0..u).filter(|&k| rates[k] - re > 0.0).collect();
                if pos.is_empty() {
                    let bb = rates
                        .iter()
                        .enumerate()
                        .max_by(|a, b| a.1.total_cmp(b.1))
                        .map(|(i, _)| i)
                        .unwrap_or(0);
                    vec![bb]
                } else {
                    pos
                }
            }
        };
        let mut grad = CMat::zeros(n, w.ncols());
        let hw = &self.h * w;
        let ln2 = std::f64::consts::LN_2;
        for &k in &active {
            let signal = hw[(k, k)].norm_sqr();
            let mut denom = self.noise[k];
            for j in 0..w.ncols() {
                if j != k {
                    denom += hw[(k, j)].norm_sqr();
                }
            }
            let gam = signal / denom;
            let c = 1.0 / (ln2 * (1.0 + gam));
            let hk = self.h.row(k).adjoint();
            for j in 0..w.ncols() {
                let coef = if j == k {
                    Complex64::from(c / denom) * hw[(k, k)]
                } else {
                    -Complex64::from(c * gam / denom) * hw[(k, j)]
                };
                for r in 0..n {
                    grad[(r, j)] += hk[r] * coef;
                }
            }
        }
        // Eavesdropper part enters every active user's gap identically.
        let weight = active.len() as f64;
        let (s, d) = self.eve_snr(w);
        let ce = weight / (ln2 * (1.0 + s / d));
        let ew = w.adjoint() * &self.eve_channel;
        for j in 0..w.ncols() {
            let coef = if j < u {
                // d(-R_E)/d conj(w_j): signal column.
                -Complex64::from(ce / d) * ew[j]
            } else {
                Complex64::from(ce * s / (d * d)) * ew[j]
            };
            for r in 0..n {
                grad[(r, j)] += self.eve_channel[r] * coef;
            }
        }
        if !with_noise {
            for j in u..w.ncols() {
                for r in 0..n {
                    grad[(r, j)] = Complex64::from(0.0);
                }
            }
        }
        grad
    }

    fn pattern_mse_opt(&self, w: &CMat) -> Option<f64> {
        self.pattern.as_ref().map(|p| {
            let v = &p.a * w;
            let gains: Vec<f64> =
                (0..v.nrows()).map(|i| v.row(i).norm_squared()).collect();
            let alpha = crate::blp::resolve_alpha(p.alpha, &p.desired, &gains);
            let m = gains.len() as f64;
            p.desired
                .iter()
                .zip(&gains)
                .map(|(&dd, &g)| (alpha * dd - g).powi(2))
                .sum::<f64>()
                / m
        })
    }

    fn pattern_mse(&self, w: &CMat) -> f64 {
        self.pattern_mse_opt(w).unwrap_or(0.0)
    }

    /// Gradient of the pattern error with the inner scale held fixed.
    fn pattern_mse_grad(&self, w: &CMat) -> CMat {
        let Some(p) = self.pattern.as_ref() else {
            return CMat::zeros(w.nrows(), w.ncols());
        };
        let v = &p.a * w;
        let gains: Vec<f64> = (0..v.nrows()).map(|i| v.row(i).norm_squared()).collect();
        let alpha = crate::blp::resolve_alpha(p.alpha, &p.desired, &gains);
        let m = gains.len() as f64;
        let mut scaled = CMat::zeros(v.nrows(), v.ncols());
        for i in 0..v.nrows() {
            let e = 2.0 * (gains[i] - alpha * p.desired[i]) / m;
            for j in 0..v.ncols() {
                scaled[(i, j)] = v[(i, j)] * Complex64::from(e);
            }
        }
        p.a.adjoint() * scaled
    }

    /// Copy of the state with near-zero noise columns nudged to a small
    /// isotropic value so their gradient becomes informative.
    fn wake_noise(&self, w: &CMat, eps: f64) -> CMat {
        let u = self.num_users();
        let n = w.nrows();
        let mut out = w.clone();
        for j in u..w.ncols() {
            if out.column(j).norm_squared() < eps * eps {
                out[((j - u) % n, j)] += Complex64::from(eps);
            }
        }
        out
    }

    /// Noise seed aimed at the eavesdropper through the null space of every
    /// user channel: jamming there reduces the eavesdropper's rate without
    /// touching any user's SINR. Falls back to an isotropic nudge when the
    /// eavesdropper sits inside the users' channel span.
    fn wake_noise_toward_eve(&self, w: &CMat, eps: f64, budget: f64) -> CMat {
        let u = self.num_users();
        let (q, rank) = mgs_orthonormal(&self.h.adjoint(), 1e-12);
        let mut dir = self.eve_channel.clone();
        if rank > 0 {
            let qq = q.columns(0, rank).clone_owned();
            dir -= &qq * (qq.adjoint() * &self.eve_channel);
        }
        let dn = dir.norm();
        if dn < 1e-9 * (1.0 + self.eve_channel.norm()) {
            return self.wake_noise(w, eps * budget.sqrt());
        }
        let mut out = w.clone();
        let col = u.min(w.ncols().saturating_sub(1));
        let add = &dir * Complex64::from(eps * budget.sqrt() / dn);
        for r in 0..w.nrows() {
            out[(r, col)] += add[r];
        }
        let p = out.norm_squared();
        if p > budget {
            out *= Complex64::from((budget / p).sqrt());
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Directional modulation
// ---------------------------------------------------------------------------

/// Angle/value pair pinning the far-field response `w^H a(theta)`.
#[derive(Clone, Debug)]
pub struct DmConstraint {
    pub angle_deg: f64,
    pub value: Complex64,
}

/// Minimum-distance directional-modulation weight: the `w` closest to the
/// radar beamformer `w_rad` with `w^H a(theta_u)` pinned to each requested
/// symbol value. Closed-form affine projection; constraints hold exactly.
pub fn dm_design(
    w_rad: &CVec,
    array: &ArrayGeometry,
    constraints: &[DmConstraint],
) -> Result<CVec> {
    let n = w_rad.len();
    if array.num_elements != n {
        return Err(IsacError::dimension("array size does not match weight length"));
    }
    if constraints.is_empty() {
        return Ok(w_rad.clone());
    }
    if constraints.len() > n {
        return Err(IsacError::dimension(format!(
            "{} response constraints exceed {} antennas",
            constraints.len(),
            n
        )));
    }
    let u = constraints.len();
    let mut a = CMat::zeros(n, u);
    for (j, c) in constraints.iter().enumerate() {
        a.set_column(j, &array.steering_vector(c.angle_deg)?);
    }
    let (_, rank) = mgs_orthonormal(&a, 1e-10);
    if rank < u {
        return Err(IsacError::numerical(
            "steering vectors at the constrained angles are linearly dependent",
        ));
    }
    // w^H a_u = s_u  <=>  A^H w = conj(s). Projection onto the affine set:
    // w = w_rad + A (A^H A)^{-1} (conj(s) - A^H w_rad).
    let s_bar = CVec::from_fn(u, |k, _| constraints[k].value.conj());
    let gram = a.adjoint() * &a;
    let rhs = &s_bar - a.adjoint() * w_rad;
    let mult = gram
        .lu()
        .solve(&rhs)
        .ok_or_else(|| IsacError::numerical("steering Gram matrix is singular"))?;
    Ok(w_rad + &a * mult)
}

/// All directional-modulation weights for a per-user PSK symbol dictionary:
/// one beam per element of the symbol product set, ordered with the last
/// user's symbol index varying fastest.
pub fn dm_beam_set(
    w_rad: &CVec,
    array: &ArrayGeometry,
    user_angles_deg: &[f64],
    symbols: &[Complex64],
) -> Result<Vec<CVec>> {
    if user_angles_deg.is_empty() || symbols.is_empty() {
        return Err(IsacError::dimension("need at least one user and one symbol"));
    }
    let u = user_angles_deg.len();
    let total = symbols.len().pow(u as u32);
    let mut beams = Vec::with_capacity(total);
    for index in 0..total {
        let mut digits = index;
        let mut constraints = Vec::with_capacity(u);
        for k in (0..u).rev() {
            let pick = digits % symbols.len();
            digits /= symbols.len();
            constraints.push(DmConstraint {
                angle_deg: user_angles_deg[k],
                value: symbols[pick],
            });
        }
        constraints.reverse();
        beams.push(dm_design(w_rad, array, &constraints)?);
    }
    Ok(beams)
}

/// CSV export of per-beam power patterns: `angle_deg,gain_db,beam_index`.
pub fn beam_set_to_csv(
    array: &ArrayGeometry,
    beams: &[CVec],
    angles_deg: &[f64],
) -> Result<String> {
    let mut out = String::from("angle_deg,gain_db,beam_index\n");
    for (b, w) in beams.iter().enumerate() {
        for &theta in angles_deg {
            let a = array.steering_vector(theta)?;
            let gain = w.dotc(&a).norm_sqr().max(1e-300);
            out.push_str(&format!("{theta},{:.12e},{b}\n", 10.0 * gain.log10()));
        }
    }
    Ok(out)
}

/// Far-field gain of one weight vector at one angle, in dB.
pub fn beam_gain_db(array: &ArrayGeometry, w: &CVec, angle_deg: f64) -> Result<f64> {
    let a = array.steering_vector(angle_deg)?;
    Ok(10.0 * w.dotc(&a).norm_sqr().max(1e-300).log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blp::sum_rate_from_sinrs;
    use crate::rng;
    use crate::scenario::rayleigh_channel;
    use approx::assert_relative_eq;
    use rand::RngExt;

    fn demo_users(array: &ArrayGeometry) -> Vec<CommUser> {
        [-40.0, 60.0]
            .iter()
            .map(|&a| CommUser::line_of_sight(array, a, 8.0, 0.05).unwrap())
            .collect()
    }

    fn demo_transmit(rng: &mut rng::Stream, n: usize, an_cols: usize) -> AnTransmit {
        let w = CMat::from_fn(n, 2, |_, _| crate::rng::complex_normal(rng))
            * Complex64::from(0.3);
        let f = CMat::from_fn(n, an_cols, |_, _| crate::rng::complex_normal(rng))
            * Complex64::from(0.2);
        let p = w.norm_squared() + f.norm_squared();
        AnTransmit::new(w, f, p * 1.5).unwrap()
    }

    #[test]
    fn test_an_transmit_power_and_psd() {
        let mut r = rng::stream(40, "sec-an");
        let t = demo_transmit(&mut r, 6, 6);
        let rn = t.an_covariance();
        assert_relative_eq!(
            t.total_power(),
            t.w_comm.norm_squared() + rn.diagonal().iter().map(|z| z.re).sum::<f64>(),
            max_relative = 1e-12
        );
        // PSD: quadratic forms nonnegative, Hermitian.
        assert!((&rn - rn.adjoint()).norm() < 1e-12);
        for _ in 0..20 {
            let v = rayleigh_channel(&mut r, 6);
            assert!(crate::linalg::herm_quad(&rn, &v) >= -1e-12);
        }
        assert!(AnTransmit::new(CMat::zeros(4, 2), CMat::zeros(4, 4), 0.0).is_err());
        assert!(
            AnTransmit::new(
                CMat::from_element(4, 2, Complex64::from(1.0)),
                CMat::zeros(4, 4),
                1.0
            )
            .is_err()
        );
    }

    #[test]
    fn test_eve_rate_matches_direct_formula() {
        let mut r = rng::stream(41, "sec-eve");
        let array = ArrayGeometry::half_wavelength(6);
        let eve = EveModel::new(25.0, Complex64::new(0.6, -0.3), 0.04, 0.0).unwrap();
        let t = demo_transmit(&mut r, 6, 6);
        let a = array.steering_vector(25.0).unwrap();
        let rc = &t.w_comm * t.w_comm.adjoint();
        let rn = t.an_covariance();
        let g = eve.path_loss.norm_sqr();
        let expected = (1.0
            + g * crate::linalg::herm_quad(&rc, &a)
                / (g * crate::linalg::herm_quad(&rn, &a) + eve.noise_power))
            .log2();
        assert_relative_eq!(
            eve_rate(&t, &eve, &array).unwrap(),
            expected,
            max_relative = 1e-12
        );
    }

    #[test]
    fn test_eve_rate_limits() {
        let mut r = rng::stream(42, "sec-lims");
        let array = ArrayGeometry::half_wavelength(6);
        let w = CMat::from_fn(6, 2, |_, _| crate::rng::complex_normal(&mut r))
            * Complex64::from(0.2);
        // Zero path gain silences the tap entirely.
        let dead = EveModel::new(10.0, Complex64::from(0.0), 0.1, 0.0).unwrap();
        let t = AnTransmit::new(w.clone(), CMat::zeros(6, 0), 1.0).unwrap();
        assert_eq!(eve_rate(&t, &dead, &array).unwrap(), 0.0);
        // Strong noise factor aimed everywhere drives the rate toward zero.
        let f = CMat::identity(6, 6) * Complex64::from(200.0);
        let jammed = AnTransmit::new(w, f, 1e9).unwrap();
        let eve = EveModel::new(10.0, Complex64::from(1.0), 0.1, 0.0).unwrap();
        assert!(eve_rate(&jammed, &eve, &array).unwrap() < 1e-4);
    }

    #[test]
    fn test_secrecy_rate_hand_computed_two_user_case() {
        let array = ArrayGeometry::half_wavelength(4);
        let users = demo_users(&array);
        // Orthonormal-ish fixed design evaluated against the raw formulas.
        let mut r = rng::stream(43, "sec-hand");
        let t = demo_transmit(&mut r, 4, 4);
        let eve = EveModel::new(5.0, Complex64::new(0.8, 0.1), 0.06, 0.0).unwrap();
        let re = eve_rate(&t, &eve, &array).unwrap();
        let sinrs = user_sinr(&t.as_precoder(), &users).unwrap();
        let expected = sinrs
            .iter()
            .map(|&g| (1.0 + g).log2() - re)
            .fold(f64::INFINITY, f64::min)
            .max(0.0);
        assert_relative_eq!(
            secrecy_rate(&t, &users, &eve, &array).unwrap(),
            expected,
            max_relative = 1e-12
        );
        // Eve noise to infinity: secrecy rate becomes the worst user rate.
        let deaf = EveModel::new(5.0, Complex64::new(0.8, 0.1), 1e18, 0.0).unwrap();
        let worst =
            sinrs.iter().map(|&g| (1.0 + g).log2()).fold(f64::INFINITY, f64::min);
        assert_relative_eq!(
            secrecy_rate(&t, &users, &deaf, &array).unwrap(),
            worst,
            max_relative = 1e-9
        );
        let _ = sum_rate_from_sinrs(&sinrs);
    }

    #[test]
    fn test_secrecy_rate_clamps_and_is_monotone_in_eve_snr() {
        let mut r = rng::stream(44, "sec-mono");
        let array = ArrayGeometry::half_wavelength(4);
        let users = demo_users(&array);
        let t = demo_transmit(&mut r, 4, 4);
        // Enormous eavesdropper gain: rate clamps at zero.
        let strong = EveModel::new(5.0, Complex64::from(1e6), 1e-6, 0.0).unwrap();
        assert_eq!(secrecy_rate(&t, &users, &strong, &array).unwrap(), 0.0);
        // Secrecy rate never increases as the path gain grows.
        let mut last = f64::INFINITY;
        for gain in [0.01, 0.1, 0.3, 1.0, 3.0] {
            let eve = EveModel::new(5.0, Complex64::from(gain), 0.05, 0.0).unwrap();
            let sr = secrecy_rate(&t, &users, &eve, &array).unwrap();
            assert!(sr <= last + 1e-12);
            assert!(sr >= 0.0);
            last = sr;
        }
    }

    #[test]
    fn test_solve_secure_reports_distinct_infeasibilities() {
        let array = ArrayGeometry::half_wavelength(4);
        let eve = EveModel::new(0.0, Complex64::from(0.5), 0.1, 0.0).unwrap();
        // QoS impossible: absurd SINR target at a tiny budget.
        let greedy: Vec<CommUser> = [(-30.0), 45.0]
            .iter()
            .map(|&a| CommUser::line_of_sight(&array, a, 80.0, 1.0).unwrap())
            .collect();
        let err = solve_secure(
            &array,
            &greedy,
            &eve,
            None,
            &SecureOptions { power_budget: 1e-3, ..Default::default() },
        )
        .unwrap_err();
        assert!(format!("{err}").contains("QoS"));
        // Sensing ceiling impossible: demand a near-exact delta pattern.
        let users = demo_users(&array);
        let desired = DesiredBeampattern::from_mainlobes(&[0.0], 4.0, 1.0).unwrap();
        let err = solve_secure(
            &array,
            &users,
            &eve,
            Some(&SensingConstraint {
                desired,
                alpha: AlphaMode::Optimized,
                max_mse: 1e-18,
            }),
            &SecureOptions { iterations: 40, ..Default::default() },
        )
        .unwrap_err();
        assert!(format!("{err}").contains("sensing"));
    }

    #[test]
    fn test_solve_secure_holds_qos_floors_and_budget() {
        let array = ArrayGeometry::half_wavelength(8);
        let users = demo_users(&array);
        let eve = EveModel::new(10.0, Complex64::from(0.9), 0.05, 0.0).unwrap();
        let opts = SecureOptions { iterations: 200, ..Default::default() };
        let sol = solve_secure(&array, &users, &eve, None, &opts).unwrap();
        assert!(sol.transmit.total_power() <= opts.power_budget * (1.0 + 1e-9));
        for (got, user) in sol.user_sinrs.iter().zip(&users) {
            assert!(
                *got >= user.sinr_target_linear() * (1.0 - 1e-6),
                "sinr {got} below target {}",
                user.sinr_target_linear()
            );
        }
        assert!(sol.secrecy_rate >= 0.0);
    }

    #[test]
    fn test_artificial_noise_never_hurts_and_usually_helps() {
        let mut r = rng::stream(45, "sec-ablate");
        let array = ArrayGeometry::half_wavelength(8);
        let mut improved = 0usize;
        let cases = 12usize;
        for _ in 0..cases {
            let users: Vec<CommUser> = (0..2)
                .map(|_| CommUser {
                    channel: rayleigh_channel(&mut r, 8),
                    sinr_target_db: 6.0,
                    noise_power: 0.05,
                })
                .collect();
            let eve = EveModel::new(
                -80.0 + 160.0 * r.random::<f64>(),
                Complex64::from_polar(0.7 + 0.6 * r.random::<f64>(), r.random::<f64>()),
                0.05,
                0.0,
            )
            .unwrap();
            let base = SecureOptions { iterations: 150, ..Default::default() };
            let no_an = solve_secure(
                &array,
                &users,
                &eve,
                None,
                &SecureOptions { with_an: false, ..base.clone() },
            )
            .unwrap();
            let with_an = solve_secure(&array, &users, &eve, None, &base).unwrap();
            assert!(
                with_an.secrecy_rate >= no_an.secrecy_rate - 1e-9,
                "AN lost rate: {} vs {}",
                with_an.secrecy_rate,
                no_an.secrecy_rate
            );
            if with_an.secrecy_rate > no_an.secrecy_rate + 1e-6 {
                improved += 1;
            }
        }
        assert!(improved * 10 >= cases * 9, "AN improved only {improved}/{cases}");
    }

    #[test]
    fn test_loose_thresholds_match_unconstrained_ascent() {
        let array = ArrayGeometry::half_wavelength(8);
        // Token QoS: targets far below what any reasonable design achieves.
        let users: Vec<CommUser> = [(-40.0), 60.0]
            .iter()
            .map(|&a| CommUser::line_of_sight(&array, a, -30.0, 0.05).unwrap())
            .collect();
        let eve = EveModel::new(10.0, Complex64::from(0.9), 0.05, 0.0).unwrap();
        let opts = SecureOptions { iterations: 400, ..Default::default() };
        let constrained = solve_secure(&array, &users, &eve, None, &opts).unwrap();
        // Unconstrained oracle: plain secrecy ascent from many random starts.
        let mut r = rng::stream(46, "sec-oracle");
        let eval = SecrecyWork {
            h: channel_matrix(&users, 8).unwrap(),
            eve_channel: array.steering_vector(10.0).unwrap() * eve.path_loss,
            eve_noise: eve.noise_power,
            noise: users.iter().map(|u| u.noise_power).collect(),
            metric: SecrecyMetric::WorstCase,
            pattern: None,
        };
        let mut best = f64::NEG_INFINITY;
        for _ in 0..8 {
            let start = CMat::from_fn(8, 10, |_, _| crate::rng::complex_normal(&mut r))
                * Complex64::from(0.2);
            let run = ascend(
                start,
                1.0,
                Projection::Ball,
                400,
                1e-12,
                &|w| eval.secrecy_gap(w),
                &|w| eval.secrecy_grad(w, true),
                &|_| true,
            );
            best = best.max(eval.secrecy_gap(&run.state));
        }
        assert!(
            constrained.secrecy_rate >= best.max(0.0) - 0.05,
            "constrained {} vs oracle {}",
            constrained.secrecy_rate,
            best
        );
    }

    #[test]
    fn test_uncertainty_sweep_widens_mainlobe_and_costs_rate() {
        let array = ArrayGeometry::half_wavelength(16);
        let users: Vec<CommUser> = [(-50.0), 55.0]
            .iter()
            .map(|&a| CommUser::line_of_sight(&array, a, 6.0, 0.05).unwrap())
            .collect();
        let eve = EveModel::new(0.0, Complex64::from(0.9), 0.05, 0.0).unwrap();
        let opts = SecureOptions { iterations: 150, ..Default::default() };
        let sweep =
            sweep_uncertainty(&array, &users, &eve, &[0.0, 5.0, 10.0], 4.0, &opts).unwrap();
        assert_eq!(sweep.len(), 3);
        for pair in sweep.windows(2) {
            assert!(
                pair[1].mainlobe_width_deg >= pair[0].mainlobe_width_deg - 1e-9,
                "width shrank: {} -> {}",
                pair[0].mainlobe_width_deg,
                pair[1].mainlobe_width_deg
            );
            assert!(
                pair[1].secrecy_rate <= pair[0].secrecy_rate + 1e-6,
                "rate grew: {} -> {}",
                pair[0].secrecy_rate,
                pair[1].secrecy_rate
            );
        }
    }

    #[test]
    fn test_dm_single_user_closed_form_and_kkt() {
        let mut r = rng::stream(47, "sec-dm1");
        let array = ArrayGeometry::half_wavelength(8);
        let w_rad = rayleigh_channel(&mut r, 8);
        let s = Complex64::from_polar(1.0, 0.9);
        let c = DmConstraint { angle_deg: 12.0, value: s };
        let w = dm_design(&w_rad, &array, std::slice::from_ref(&c)).unwrap();
        let a = array.steering_vector(12.0).unwrap();
        // Constraint exact.
        assert!((w.dotc(&a) - s).norm() < 1e-10);
        // Matches the rank-one update formula.
        let expected =
            &w_rad + &a * ((s.conj() - a.dotc(&w_rad)) / Complex64::from(a.norm_squared()));
        assert!((&w - &expected).norm() < 1e-10);
        // KKT: the perturbation lies in the span of the steering vector.
        let d = &w - &w_rad;
        let proj = &a * (a.dotc(&d) / Complex64::from(a.norm_squared()));
        assert!((&d - &proj).norm() < 1e-10);
    }

    #[test]
    fn test_dm_zero_perturbation_when_already_feasible() {
        let mut r = rng::stream(48, "sec-dm0");
        let array = ArrayGeometry::half_wavelength(8);
        let w_rad = rayleigh_channel(&mut r, 8);
        let a = array.steering_vector(-33.0).unwrap();
        let existing = w_rad.dotc(&a);
        let w = dm_design(
            &w_rad,
            &array,
            &[DmConstraint { angle_deg: -33.0, value: existing }],
        )
        .unwrap();
        assert!((&w - &w_rad).norm() < 1e-10);
    }

    #[test]
    fn test_dm_multiuser_exactness_and_minimality() {
        let mut r = rng::stream(49, "sec-dmm");
        let array = ArrayGeometry::half_wavelength(8);
        let w_rad = rayleigh_channel(&mut r, 8);
        let constraints = vec![
            DmConstraint { angle_deg: -40.0, value: Complex64::from_polar(1.0, 0.5) },
            DmConstraint { angle_deg: 25.0, value: Complex64::from_polar(1.0, -1.8) },
            DmConstraint { angle_deg: 60.0, value: Complex64::from_polar(1.0, 2.4) },
        ];
        let w = dm_design(&w_rad, &array, &constraints).unwrap();
        let mut a = CMat::zeros(8, 3);
        for (j, c) in constraints.iter().enumerate() {
            let v = array.steering_vector(c.angle_deg).unwrap();
            a.set_column(j, &v);
            assert!((w.dotc(&v) - c.value).norm() < 1e-10, "constraint {j}");
        }
        // Any feasible perturbation (null space of A^H) increases distance.
        let dist = (&w - &w_rad).norm();
        let gram = a.adjoint() * &a;
        for _ in 0..20 {
            let v = rayleigh_channel(&mut r, 8);
            let mult = gram.clone().lu().solve(&(a.adjoint() * &v)).unwrap();
            let d = &v - &a * mult;
            if d.norm() < 1e-8 {
                continue;
            }
            let w2 = &w + &d * Complex64::from(0.1);
            assert!((&w2 - &w_rad).norm() > dist);
        }
    }

    #[test]
    fn test_dm_dependent_steering_is_an_error() {
        let mut r = rng::stream(50, "sec-dmdep");
        let array = ArrayGeometry::half_wavelength(8);
        let w_rad = rayleigh_channel(&mut r, 8);
        let dup = vec![
            DmConstraint { angle_deg: 10.0, value: Complex64::from(1.0) },
            DmConstraint { angle_deg: 10.0, value: Complex64::from(-1.0) },
        ];
        assert!(dm_design(&w_rad, &array, &dup).is_err());
    }

    #[test]
    fn test_dm_beam_set_preserves_mainlobe() {
        let array = ArrayGeometry::half_wavelength(32);
        // Radar beam toward broadside: conjugate-steering weights.
        let a0 = array.steering_vector(0.0).unwrap();
        let w_rad = CVec::from_fn(32, |k, _| a0[k].conj());
        let qpsk: Vec<Complex64> = (0..4)
            .map(|m| {
                Complex64::from_polar(
                    0.25,
                    std::f64::consts::FRAC_PI_4 + m as f64 * std::f64::consts::FRAC_PI_2,
                )
            })
            .collect();
        let beams = dm_beam_set(&w_rad, &array, &[-40.0, 60.0], &qpsk).unwrap();
        assert_eq!(beams.len(), 16);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (i, w) in beams.iter().enumerate() {
            // Every beam realizes its own symbol pair exactly.
            let s1 = w.dotc(&array.steering_vector(-40.0).unwrap());
            let s2 = w.dotc(&array.steering_vector(60.0).unwrap());
            assert!((s1 - qpsk[i / 4]).norm() < 1e-10);
            assert!((s2 - qpsk[i % 4]).norm() < 1e-10);
            let g = beam_gain_db(&array, w, 0.0).unwrap();
            lo = lo.min(g);
            hi = hi.max(g);
        }
        assert!(hi - lo < 0.5, "mainlobe varies {:.3} dB", hi - lo);
        let csv = beam_set_to_csv(&array, &beams, &[-90.0, 0.0, 90.0]).unwrap();
        assert_eq!(csv.lines().count(), 1 + 3 * 16);
        assert!(csv.starts_with("angle_deg,gain_db,beam_index\n"));
    }
}
