//! Block-level joint precoding for a dual-function transmitter.
//!
//! Communication quality is measured per user from the precoder statistics
//! (SINR, sum rate, multi-user interference energy); sensing quality from the
//! transmit covariance (beampattern matching error, angle CRLB). A weighted
//! first-order solver trades the two off and traces monotone Pareto fronts;
//! a zero-forcing water-filling design serves as the communication baseline.

use num_complex::Complex64;

use crate::error::{IsacError, Result};
use crate::linalg::{CMat, CVec};
use crate::scenario::{ArrayGeometry, CommUser};

/// Relative slack allowed on the power budget after projection.
pub const POWER_SLACK: f64 = 1e-6;

/// Communication and radar precoder columns sharing one power budget.
#[derive(Clone, Debug)]
pub struct PrecoderSet {
    /// One column per user.
    pub w_comm: CMat,
    /// Radar stream columns (any count up to the antenna count).
    pub w_radar: CMat,
    /// Total transmit power bound, `tr(Wc Wc^H + Wr Wr^H) <= budget`.
    pub power_budget: f64,
}

impl PrecoderSet {
    pub fn new(w_comm: CMat, w_radar: CMat, power_budget: f64) -> Result<Self> {
        if w_comm.nrows() != w_radar.nrows() {
            return Err(IsacError::dimension(format!(
                "comm precoder has {} rows, radar {}",
                w_comm.nrows(),
                w_radar.nrows()
            )));
        }
        if !(power_budget > 0.0) {
            return Err(IsacError::domain("power budget must be positive"));
        }
        let set = Self { w_comm, w_radar, power_budget };
        let total = set.total_power();
        if total > power_budget * (1.0 + POWER_SLACK) {
            return Err(IsacError::domain(format!(
                "precoder power {total:.6} exceeds budget {power_budget:.6}"
            )));
        }
        Ok(set)
    }

    pub fn num_antennas(&self) -> usize {
        self.w_comm.nrows()
    }

    pub fn total_power(&self) -> f64 {
        self.w_comm.norm_squared() + self.w_radar.norm_squared()
    }

    /// `R_X = Wc Wc^H + Wr Wr^H`; data and radar streams are uncorrelated.
    pub fn transmit_covariance(&self) -> CMat {
        &self.w_comm * self.w_comm.adjoint() + &self.w_radar * self.w_radar.adjoint()
    }

    pub fn beampattern_mse(
        &self,
        desired: &DesiredBeampattern,
        array: &ArrayGeometry,
        alpha: AlphaMode,
    ) -> Result<f64> {
        beampattern_mse(&self.transmit_covariance(), desired, array, alpha)
    }

    pub fn crlb_angle(&self, angle_deg: f64, model: &CrlbModel) -> Result<f64> {
        crlb_angle(&self.transmit_covariance(), angle_deg, model)
    }
}

/// Target transmit beampattern sampled on an angle grid.
#[derive(Clone, Debug, PartialEq)]
pub struct DesiredBeampattern {
    /// Strictly increasing grid, degrees.
    pub angles_deg: Vec<f64>,
    /// Nonnegative desired power gains, linear scale.
    pub gains: Vec<f64>,
}

/// Sidelobe floor relative to the mainlobe level (-30 dB).
const PATTERN_FLOOR: f64 = 1e-3;
/// Raised-cosine transition width between mainlobe and floor, degrees.
const PATTERN_EDGE_DEG: f64 = 2.0;

impl DesiredBeampattern {
    pub fn new(angles_deg: Vec<f64>, gains: Vec<f64>) -> Result<Self> {
        if angles_deg.len() != gains.len() || angles_deg.is_empty() {
            return Err(IsacError::dimension("angle and gain grids must match and be nonempty"));
        }
        if angles_deg.windows(2).any(|w| w[1] <= w[0]) {
            return Err(IsacError::domain("beampattern angles must be strictly increasing"));
        }
        if gains.iter().any(|&g| !(g >= 0.0)) {
            return Err(IsacError::domain("beampattern gains must be nonnegative"));
        }
        Ok(Self { angles_deg, gains })
    }

    /// One-degree grid spanning the full field of view.
    pub fn grid() -> Vec<f64> {
        (-90..=90).map(f64::from).collect()
    }

    /// Constant desired gain across the field of view.
    pub fn flat(level: f64) -> Self {
        let angles = Self::grid();
        let gains = vec![level; angles.len()];
        Self { angles_deg: angles, gains }
    }

    /// Flat mainlobes of half-width `halfwidth_deg` around each center, a
    /// -30 dB floor elsewhere, and raised-cosine edges over two degrees.
    pub fn from_mainlobes(centers_deg: &[f64], halfwidth_deg: f64, level: f64) -> Result<Self> {
        if centers_deg.is_empty() {
            return Err(IsacError::domain("at least one mainlobe center required"));
        }
        if !(halfwidth_deg > 0.0) {
            return Err(IsacError::domain("mainlobe half-width must be positive"));
        }
        let floor = level * PATTERN_FLOOR;
        let angles = Self::grid();
        let gains = angles
            .iter()
            .map(|&theta| {
                let d = centers_deg
                    .iter()
                    .map(|c| (theta - c).abs())
                    .fold(f64::INFINITY, f64::min);
                if d <= halfwidth_deg {
                    level
                } else if d <= halfwidth_deg + PATTERN_EDGE_DEG {
                    let frac = (d - halfwidth_deg) / PATTERN_EDGE_DEG;
                    floor + (level - floor) * 0.5 * (1.0 + (std::f64::consts::PI * frac).cos())
                } else {
                    floor
                }
            })
            .collect();
        Ok(Self { angles_deg: angles, gains })
    }
}

/// Scaling applied to the desired pattern inside the matching error.
#[derive(Clone, Copy, Debug)]
pub enum AlphaMode {
    Fixed(f64),
    /// Least-squares scalar recomputed from the current covariance.
    Optimized,
}

/// Per-user SINR under Gaussian-signaling statistics: the radar streams and
/// the other users' precoders both count as interference.
pub fn user_sinr(p: &PrecoderSet, users: &[CommUser]) -> Result<Vec<f64>> {
    check_users(p, users)?;
    let cross = |w: &CMat, h: &CVec| -> Vec<Complex64> {
        (0..w.ncols()).map(|i| h.dotc(&w.column(i).clone_owned())).collect()
    };
    let mut out = Vec::with_capacity(users.len());
    for (u, user) in users.iter().enumerate() {
        let cc = cross(&p.w_comm, &user.channel);
        let cr = cross(&p.w_radar, &user.channel);
        let signal = cc[u].norm_sqr();
        let mut denom = user.noise_power;
        for (i, c) in cc.iter().enumerate() {
            if i != u {
                denom += c.norm_sqr();
            }
        }
        denom += cr.iter().map(|c| c.norm_sqr()).sum::<f64>();
        out.push(signal / denom);
    }
    Ok(out)
}

/// Sum rate in bits per channel use from linear SINRs.
pub fn sum_rate_from_sinrs(sinrs: &[f64]) -> f64 {
    sinrs.iter().map(|&g| (1.0 + g).log2()).sum()
}

pub fn sum_rate(p: &PrecoderSet, users: &[CommUser]) -> Result<f64> {
    Ok(sum_rate_from_sinrs(&user_sinr(p, users)?))
}

/// Total multi-user interference energy `||H X - S||_F^2` of a transmit
/// block `x` against the desired symbol block `symbols` (one row per user).
pub fn mui_energy(users: &[CommUser], x: &CMat, symbols: &CMat) -> Result<f64> {
    if users.is_empty() {
        return Err(IsacError::dimension("at least one user required"));
    }
    if symbols.nrows() != users.len() || symbols.ncols() != x.ncols() {
        return Err(IsacError::dimension(format!(
            "symbol block {}x{} does not match {} users and block length {}",
            symbols.nrows(),
            symbols.ncols(),
            users.len(),
            x.ncols()
        )));
    }
    let h = channel_matrix(users, x.nrows())?;
    Ok((h * x - symbols).norm_squared())
}

/// Transmit power gains `a^H(theta) R a(theta)` over an angle grid.
pub fn beampattern_gains(r: &CMat, array: &ArrayGeometry, angles_deg: &[f64]) -> Result<Vec<f64>> {
    check_covariance(r, array)?;
    angles_deg
        .iter()
        .map(|&theta| {
            let a = array.steering_vector(theta)?;
            Ok(crate::linalg::herm_quad(r, &a))
        })
        .collect()
}

/// Beampattern matching error `(1/M) sum |alpha P_i - a_i^H R a_i|^2`.
pub fn beampattern_mse(
    r: &CMat,
    desired: &DesiredBeampattern,
    array: &ArrayGeometry,
    alpha: AlphaMode,
) -> Result<f64> {
    let gains = beampattern_gains(r, array, &desired.angles_deg)?;
    let alpha = resolve_alpha(alpha, &desired.gains, &gains);
    let m = gains.len() as f64;
    Ok(desired
        .gains
        .iter()
        .zip(&gains)
        .map(|(&p, &g)| (alpha * p - g).powi(2))
        .sum::<f64>()
        / m)
}

pub(crate) fn resolve_alpha(mode: AlphaMode, desired: &[f64], actual: &[f64]) -> f64 {
    match mode {
        AlphaMode::Fixed(a) => a,
        AlphaMode::Optimized => {
            let num: f64 = desired.iter().zip(actual).map(|(&p, &g)| p * g).sum();
            let den: f64 = desired.iter().map(|&p| p * p).sum();
            if den > 0.0 { num / den } else { 1.0 }
        }
    }
}

/// Monostatic point-target observation model for angle estimation: the echo
/// is `alpha * b(theta) a^T(theta) X` plus white noise over `snapshots`
/// statistically independent transmit columns.
#[derive(Clone, Debug)]
pub struct CrlbModel {
    pub tx_array: ArrayGeometry,
    pub rx_array: ArrayGeometry,
    pub snapshots: usize,
    pub noise_power: f64,
    pub amplitude: Complex64,
}

impl CrlbModel {
    fn validate(&self) -> Result<()> {
        if self.snapshots == 0 {
            return Err(IsacError::domain("at least one snapshot required"));
        }
        if !(self.noise_power > 0.0) {
            return Err(IsacError::domain("noise power must be positive"));
        }
        if self.amplitude.norm() == 0.0 {
            return Err(IsacError::domain("target amplitude must be nonzero"));
        }
        Ok(())
    }
}

/// Matrices entering the angle Fisher information for a fixed look angle.
pub(crate) struct CrlbTerms {
    a1: CMat,
    a2: CMat,
    a3: CMat,
}

impl CrlbTerms {
    pub(crate) fn new(angle_deg: f64, model: &CrlbModel) -> Result<Self> {
        let a = model.tx_array.steering_vector(angle_deg)?;
        let ad = model.tx_array.steering_derivative(angle_deg)?;
        let b = model.rx_array.steering_vector(angle_deg)?;
        let bd = model.rx_array.steering_derivative(angle_deg)?;
        let big_b = &b * a.transpose();
        let big_bd = &bd * a.transpose() + &b * ad.transpose();
        Ok(Self {
            a1: big_bd.adjoint() * &big_bd,
            a2: big_bd.adjoint() * &big_b,
            a3: big_b.adjoint() * &big_b,
        })
    }

    /// Schur complement of the amplitude block in the scaled Fisher matrix.
    /// Returns `None` when no transmit power reaches the target.
    pub(crate) fn schur(&self, r: &CMat) -> Option<f64> {
        let t1 = (&self.a1 * r).trace().re;
        let t2 = (&self.a2 * r).trace();
        let t3 = (&self.a3 * r).trace().re;
        let scale = t1.abs().max(t3.abs()).max(1e-300);
        if t3 <= 1e-14 * scale {
            return None;
        }
        let g = t1 - t2.norm_sqr() / t3;
        if g <= 1e-14 * scale {
            return None;
        }
        Some(g)
    }

    /// Gradient of [`Self::schur`] with respect to the covariance, mapped to
    /// a per-column ascent direction `M w`.
    pub(crate) fn schur_grad(&self, r: &CMat) -> Option<CMat> {
        let t2 = (&self.a2 * r).trace();
        let t3 = (&self.a3 * r).trace().re;
        if t3 <= 0.0 {
            return None;
        }
        let m = &self.a1 - (&self.a2 * t2.conj() + self.a2.adjoint() * t2) / Complex64::from(t3)
            + (&self.a3).scale(t2.norm_sqr() / (t3 * t3));
        Some(m)
    }
}

/// CRLB on the target angle in rad^2 for transmit covariance `r`, with the
/// complex amplitude treated as a nuisance parameter. Degenerate geometry
/// (no power toward the target, or a derivative-free pattern) reports an
/// infinite bound rather than an error.
pub fn crlb_angle(r: &CMat, angle_deg: f64, model: &CrlbModel) -> Result<f64> {
    model.validate()?;
    if r.nrows() != model.tx_array.num_elements || !r.is_square() {
        return Err(IsacError::dimension(format!(
            "covariance is {}x{}, transmit array has {} elements",
            r.nrows(),
            r.ncols(),
            model.tx_array.num_elements
        )));
    }
    let terms = CrlbTerms::new(angle_deg, model)?;
    match terms.schur(r) {
        Some(g) => {
            let l = model.snapshots as f64;
            Ok(model.noise_power / (2.0 * l * model.amplitude.norm_sqr() * g))
        }
        None => Ok(f64::INFINITY),
    }
}

/// Zero-forcing precoder with a power allocation attached.
#[derive(Clone, Debug)]
pub struct ZfPrecoder {
    pub w_comm: CMat,
    /// Per-user allocated signal powers `p_u = |h_u^H w_u|^2`.
    pub powers: Vec<f64>,
    /// Resulting SINRs `p_u / sigma_u^2` (interference-free by construction).
    pub sinrs: Vec<f64>,
    pub power_used: f64,
}

/// Pseudo-inverse direction bank `F = H^H (H H^H)^{-1}`, so `h_u^H f_i = δ_ui`.
pub fn zf_directions(users: &[CommUser]) -> Result<CMat> {
    if users.is_empty() {
        return Err(IsacError::dimension("at least one user required"));
    }
    let n = users[0].channel.len();
    let h = channel_matrix(users, n)?;
    let gram = &h * h.adjoint();
    let inv = gram
        .lu()
        .try_inverse()
        .ok_or_else(|| IsacError::numerical("linearly dependent user channels"))?;
    Ok(h.adjoint() * inv)
}

/// Zero-forcing with water-filling power allocation: maximizes the sum rate
/// over interference-free directions under the total power budget.
pub fn zf_with_waterfilling(users: &[CommUser], power_budget: f64) -> Result<ZfPrecoder> {
    let f = zf_directions(users)?;
    let costs: Vec<f64> = (0..users.len()).map(|u| f.column(u).norm_squared()).collect();
    let noise: Vec<f64> = users.iter().map(|u| u.noise_power).collect();

    // Each unit of user power p_u costs c_u transmit power; the optimum is
    // p_u = max(0, 1/(nu c_u) - sigma_u^2) with the level nu set by budget.
    let usage = |nu: f64| -> f64 {
        costs
            .iter()
            .zip(&noise)
            .map(|(&c, &s)| c * ((1.0 / (nu * c) - s).max(0.0)))
            .sum()
    };
    let mut lo = 1e-12;
    while usage(lo) < power_budget {
        lo *= 0.5;
        if lo < 1e-300 {
            return Err(IsacError::numerical("water-filling bracket failed"));
        }
    }
    let mut hi = 1.0;
    while usage(hi) > power_budget {
        hi *= 2.0;
        if hi > 1e300 {
            return Err(IsacError::numerical("water-filling bracket failed"));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if usage(mid) > power_budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let nu = 0.5 * (lo + hi);
    let mut powers: Vec<f64> = costs
        .iter()
        .zip(&noise)
        .map(|(&c, &s)| (1.0 / (nu * c) - s).max(0.0))
        .collect();
    let used: f64 = powers.iter().zip(&costs).map(|(&p, &c)| p * c).sum();
    if used > 0.0 {
        let scale = power_budget / used;
        for p in &mut powers {
            *p *= scale;
        }
    }
    Ok(assemble_zf(&f, powers, &noise))
}

/// Zero-forcing meeting each user's configured SINR target exactly.
pub fn zf_at_targets(users: &[CommUser], power_budget: f64) -> Result<ZfPrecoder> {
    let f = zf_directions(users)?;
    let noise: Vec<f64> = users.iter().map(|u| u.noise_power).collect();
    let powers: Vec<f64> = users
        .iter()
        .map(|u| u.sinr_target_linear() * u.noise_power)
        .collect();
    let zf = assemble_zf(&f, powers, &noise);
    if zf.power_used > power_budget * (1.0 + POWER_SLACK) {
        return Err(IsacError::infeasible(format!(
            "SINR targets need {:.4} transmit power, budget is {power_budget:.4}",
            zf.power_used
        )));
    }
    Ok(zf)
}

fn assemble_zf(f: &CMat, powers: Vec<f64>, noise: &[f64]) -> ZfPrecoder {
    let mut w = f.clone();
    for (u, &p) in powers.iter().enumerate() {
        let col = f.column(u) * Complex64::from(p.sqrt());
        w.set_column(u, &col);
    }
    let power_used = w.norm_squared();
    let sinrs = powers.iter().zip(noise).map(|(&p, &s)| p / s).collect();
    ZfPrecoder { w_comm: w, powers, sinrs, power_used }
}

/// Sensing objective the tradeoff solver minimizes against the sum rate.
#[derive(Clone, Debug)]
pub enum SensingObjective {
    BeampatternMse { desired: DesiredBeampattern, alpha: AlphaMode },
    Crlb { angle_deg: f64, model: CrlbModel },
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub power_budget: f64,
    pub iterations: usize,
    /// Relative objective improvement below which the ascent stalls out.
    pub tolerance: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { power_budget: 1.0, iterations: 900, tolerance: 1e-8 }
    }
}

/// One solved operating point of the comm-sensing tradeoff.
#[derive(Clone, Debug)]
pub struct TradeoffSolution {
    pub precoder: PrecoderSet,
    pub sum_rate: f64,
    /// Beampattern MSE or CRLB depending on the objective; lower is better.
    pub sensing_value: f64,
    pub user_sinrs: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// A solved sweep point tagged with its priority weight.
#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub rho: f64,
    pub solution: TradeoffSolution,
}

/// Shared state for a tradeoff sweep: both single-objective endpoints are
/// solved once and reused as warm starts and normalizers for every weight.
pub struct TradeoffContext {
    tx_array: ArrayGeometry,
    objective: SensingObjective,
    options: SolveOptions,
    work: SolverWork,
    comm_end: TradeoffSolution,
    sensing_end: TradeoffSolution,
}

impl TradeoffContext {
    pub fn new(
        users: &[CommUser],
        tx_array: &ArrayGeometry,
        objective: SensingObjective,
        options: SolveOptions,
    ) -> Result<Self> {
        if users.is_empty() {
            return Err(IsacError::dimension("at least one user required"));
        }
        let n = tx_array.num_elements;
        for (i, u) in users.iter().enumerate() {
            if u.channel.len() != n {
                return Err(IsacError::dimension(format!(
                    "user {i} channel length {} vs {n} antennas",
                    u.channel.len()
                )));
            }
        }
        let work = SolverWork::new(users, tx_array, &objective, &options)?;
        let comm_end = solve_comm_endpoint(&work, users, &options)?;
        let sensing_end = solve_sensing_endpoint(&work, &options, &comm_end)?;
        Ok(Self {
            tx_array: tx_array.clone(),
            objective,
            options,
            work,
            comm_end,
            sensing_end,
        })
    }

    pub fn comm_endpoint(&self) -> &TradeoffSolution {
        &self.comm_end
    }

    pub fn sensing_endpoint(&self) -> &TradeoffSolution {
        &self.sensing_end
    }

    /// Solve one priority weight. Endpoints return the cached solutions.
    pub fn solve(&self, rho: f64) -> Result<TradeoffSolution> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(IsacError::domain(format!("rho {rho} outside [0, 1]")));
        }
        if rho >= 1.0 {
            return Ok(self.comm_end.clone());
        }
        if rho <= 0.0 {
            return Ok(self.sensing_end.clone());
        }
        Ok(self.solve_blend(rho, None))
    }

    fn solve_blend(&self, rho: f64, extra_start: Option<&CMat>) -> TradeoffSolution {
        let sr_star = self.comm_end.sum_rate.max(1e-12);
        let sv_star = self.sensing_end.sensing_value.max(1e-300);
        let value = |w: &CMat| -> f64 {
            let sr = self.work.sum_rate(w);
            match self.work.sensing_value(w) {
                Some(sv) => rho * sr / sr_star - (1.0 - rho) * sv / sv_star,
                None => f64::NEG_INFINITY,
            }
        };
        let grad = |w: &CMat| -> CMat {
            let mut g = self.work.sum_rate_grad(w).scale(rho / sr_star);
            if let Some(gs) = self.work.sensing_descent_grad(w) {
                g += gs.scale((1.0 - rho) / sv_star);
            }
            g
        };
        let mut starts: Vec<CMat> = vec![
            self.work.jitter(&full_state(&self.comm_end.precoder, self.work.n)),
            self.work.jitter(&full_state(&self.sensing_end.precoder, self.work.n)),
        ];
        if let Some(w) = extra_start {
            starts.push(w.clone());
        }
        let mut best: Option<(f64, Ascent)> = None;
        for start in starts {
            let run = ascend(
                start,
                self.options.power_budget,
                self.work.projection(),
                self.options.iterations,
                self.options.tolerance,
                &value,
                &grad,
                &|_| true,
            );
            let score = value(&run.state);
            if best.as_ref().map_or(true, |(s, _)| score > *s) {
                best = Some((score, run));
            }
        }
        let (_, run) = best.expect("at least one start");
        self.work.finish(run, self.options.power_budget)
    }

    /// Weighted sweep over `rhos`. Every weight selects from a shared pool
    /// of candidate solutions; a weighted-sum selection over one pool cannot
    /// produce a dominated point, so the front is monotone by construction.
    /// Candidates that out-rate the user-protecting communication endpoint
    /// are excluded so the sweep ends exactly on it.
    pub fn sweep(&self, rhos: &[f64]) -> Result<Vec<SweepPoint>> {
        let mut rhos = rhos.to_vec();
        rhos.sort_by(|a, b| a.total_cmp(b));
        for &rho in &rhos {
            if !(0.0..=1.0).contains(&rho) {
                return Err(IsacError::domain(format!("rho {rho} outside [0, 1]")));
            }
        }
        let mut pool: Vec<TradeoffSolution> = vec![self.sensing_end.clone(), self.comm_end.clone()];
        let mut prev: Option<CMat> = None;
        for &rho in &rhos {
            if rho <= 0.0 || rho >= 1.0 {
                continue;
            }
            let sol = self.solve_blend(rho, prev.as_ref());
            prev = Some(full_state(&sol.precoder, self.work.n));
            pool.push(sol);
        }
        let cap = self.comm_end.sum_rate * (1.0 + 1e-9);
        pool.retain(|s| s.sum_rate <= cap);
        let sr_star = self.comm_end.sum_rate.max(1e-12);
        let sv_star = self.sensing_end.sensing_value.max(1e-300);
        let points = rhos
            .iter()
            .map(|&rho| {
                let pick = pool
                    .iter()
                    .max_by(|a, b| {
                        let score = |s: &TradeoffSolution| {
                            rho * s.sum_rate / sr_star - (1.0 - rho) * s.sensing_value / sv_star
                        };
                        score(a)
                            .total_cmp(&score(b))
                            .then(b.sensing_value.total_cmp(&a.sensing_value))
                            .then(a.sum_rate.total_cmp(&b.sum_rate))
                    })
                    .expect("pool is nonempty");
                SweepPoint { rho, solution: pick.clone() }
            })
            .collect();
        Ok(points)
    }

    pub fn objective(&self) -> &SensingObjective {
        &self.objective
    }

    pub fn tx_array(&self) -> &ArrayGeometry {
        &self.tx_array
    }
}

/// One-shot solve of a single priority weight.
pub fn solve_tradeoff(
    users: &[CommUser],
    tx_array: &ArrayGeometry,
    rho: f64,
    objective: SensingObjective,
    options: SolveOptions,
) -> Result<TradeoffSolution> {
    TradeoffContext::new(users, tx_array, objective, options)?.solve(rho)
}

/// CRLB against SINR target, joint design versus the zero-forcing baseline.
#[derive(Clone, Debug)]
pub struct CrlbSinrPoint {
    pub sinr_target_db: f64,
    pub baseline_crlb: f64,
    pub joint_crlb: f64,
    pub joint_sinrs: Vec<f64>,
}

/// Trace the CRLB-vs-SINR frontier over a grid of per-user SINR targets.
///
/// The baseline zero-forces at the exact target and spends the leftover power
/// on a radar probe in the users' null space; the joint design starts from
/// that same feasible point and descends the CRLB while keeping every user at
/// or above the target, so it can never end up worse than the baseline.
pub fn crlb_sinr_frontier(
    users: &[CommUser],
    target_angle_deg: f64,
    model: &CrlbModel,
    sinr_grid_db: &[f64],
    options: &SolveOptions,
) -> Result<Vec<CrlbSinrPoint>> {
    let tx_array = model.tx_array.clone();
    let n = tx_array.num_elements;
    let objective = SensingObjective::Crlb { angle_deg: target_angle_deg, model: model.clone() };
    let mut out = Vec::with_capacity(sinr_grid_db.len());
    for &target_db in sinr_grid_db {
        let gamma = 10f64.powf(target_db / 10.0);
        let targeted: Vec<CommUser> = users
            .iter()
            .map(|u| CommUser { sinr_target_db: target_db, ..u.clone() })
            .collect();
        let zf = zf_at_targets(&targeted, options.power_budget)?;
        let leftover = (options.power_budget - zf.power_used).max(0.0);

        // Null-space radar probe keeps the baseline SINRs exactly on target.
        let mut w_radar = CMat::zeros(n, n);
        let steer = tx_array.steering_vector(target_angle_deg)?.conjugate();
        let h = channel_matrix(&targeted, n)?;
        let (q, rank) = crate::linalg::mgs_orthonormal(&h.adjoint(), 1e-12);
        let mut probe = steer.clone();
        if rank > 0 {
            probe -= &q * (q.adjoint() * &steer);
        }
        if probe.norm() > 1e-9 && leftover > 0.0 {
            let col = &probe * Complex64::from(leftover.sqrt() / probe.norm());
            w_radar.set_column(0, &col);
        }
        let baseline =
            PrecoderSet::new(zf.w_comm.clone(), w_radar, options.power_budget)?;
        let baseline_crlb = baseline.crlb_angle(target_angle_deg, model)?;

        let work = SolverWork::new(&targeted, &tx_array, &objective, options)?;
        let floors: Vec<f64> = targeted.iter().map(|_| gamma * (1.0 - 1e-8)).collect();
        let start = work.jitter_scaled(&full_state(&baseline, n), 1e-7);
        let value = |w: &CMat| work.sensing_value(w).map_or(f64::NEG_INFINITY, |v| -v);
        let grad = |w: &CMat| {
            work.sensing_descent_grad(w).unwrap_or_else(|| CMat::zeros(n, w.ncols()))
        };
        let feasible = |w: &CMat| {
            work.sinrs(w).iter().zip(&floors).all(|(&g, &f)| g >= f)
        };
        let run = ascend(
            start,
            options.power_budget,
            work.projection(),
            options.iterations,
            options.tolerance,
            &value,
            &grad,
            &feasible,
        );
        // The jittered start is feasible by construction; keep whichever of
        // the ascent result and the exact baseline bounds the CRLB better.
        let joint = work.finish(run, options.power_budget);
        let (joint_crlb, joint_sinrs) = if joint.sensing_value <= baseline_crlb {
            (joint.sensing_value, joint.user_sinrs.clone())
        } else {
            (baseline_crlb, zf.sinrs.clone())
        };
        out.push(CrlbSinrPoint {
            sinr_target_db: target_db,
            baseline_crlb,
            joint_crlb,
            joint_sinrs,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Solver internals
// ---------------------------------------------------------------------------

/// Precomputed evaluation state shared by all solves of one configuration.
struct SolverWork {
    n: usize,
    num_users: usize,
    /// Rows are `h_u^H`.
    h: CMat,
    noise: Vec<f64>,
    pattern: Option<PatternWork>,
    crlb: Option<CrlbWork>,
}

struct PatternWork {
    /// Rows are `a(theta_i)^H` over the desired grid.
    a: CMat,
    desired: Vec<f64>,
    alpha: AlphaMode,
}

struct CrlbWork {
    terms: CrlbTerms,
    model: CrlbModel,
}

impl SolverWork {
    fn new(
        users: &[CommUser],
        tx_array: &ArrayGeometry,
        objective: &SensingObjective,
        _options: &SolveOptions,
    ) -> Result<Self> {
        let n = tx_array.num_elements;
        let h = channel_matrix(users, n)?;
        let noise = users.iter().map(|u| u.noise_power).collect();
        let (pattern, crlb) = match objective {
            SensingObjective::BeampatternMse { desired, alpha } => {
                let mut a = CMat::zeros(desired.angles_deg.len(), n);
                for (i, &theta) in desired.angles_deg.iter().enumerate() {
                    let s = tx_array.steering_vector(theta)?;
                    for j in 0..n {
                        a[(i, j)] = s[j].conj();
                    }
                }
                (Some(PatternWork { a, desired: desired.gains.clone(), alpha: *alpha }), None)
            }
            SensingObjective::Crlb { angle_deg, model } => {
                model.validate()?;
                let terms = CrlbTerms::new(*angle_deg, model)?;
                (None, Some(CrlbWork { terms, model: model.clone() }))
            }
        };
        Ok(Self { n, num_users: users.len(), h, noise, pattern, crlb })
    }

    fn sinrs(&self, w: &CMat) -> Vec<f64> {
        let hw = &self.h * w;
        (0..self.num_users)
            .map(|u| {
                let signal = hw[(u, u)].norm_sqr();
                let mut denom = self.noise[u];
                for i in 0..w.ncols() {
                    if i != u {
                        denom += hw[(u, i)].norm_sqr();
                    }
                }
                signal / denom
            })
            .collect()
    }

    fn sum_rate(&self, w: &CMat) -> f64 {
        sum_rate_from_sinrs(&self.sinrs(w))
    }

    /// Wirtinger ascent gradient of the sum rate; `df = 2 Re tr(dW^H G)`.
    fn sum_rate_grad(&self, w: &CMat) -> CMat {
        let hw = &self.h * w;
        let ln2 = std::f64::consts::LN_2;
        let mut k = CMat::zeros(self.num_users, w.ncols());
        let mut coef_self = vec![0.0; self.num_users];
        let mut coef_int = vec![0.0; self.num_users];
        for u in 0..self.num_users {
            let signal = hw[(u, u)].norm_sqr();
            let mut denom = self.noise[u];
            for i in 0..w.ncols() {
                if i != u {
                    denom += hw[(u, i)].norm_sqr();
                }
            }
            let gamma = signal / denom;
            coef_self[u] = 1.0 / (ln2 * (1.0 + gamma) * denom);
            coef_int[u] = gamma / (ln2 * (1.0 + gamma) * denom);
        }
        for u in 0..self.num_users {
            for i in 0..w.ncols() {
                let c = hw[(u, i)];
                k[(u, i)] = if i == u {
                    c * Complex64::from(coef_self[u])
                } else {
                    -c * Complex64::from(coef_int[u])
                };
            }
        }
        self.h.adjoint() * k
    }

    /// Sensing metric value (beampattern MSE or CRLB); `None` when the CRLB
    /// geometry is degenerate at this iterate.
    fn sensing_value(&self, w: &CMat) -> Option<f64> {
        if let Some(p) = &self.pattern {
            let v = &p.a * w;
            let gains: Vec<f64> = (0..v.nrows()).map(|i| v.row(i).norm_squared()).collect();
            let alpha = resolve_alpha(p.alpha, &p.desired, &gains);
            let m = gains.len() as f64;
            Some(
                p.desired
                    .iter()
                    .zip(&gains)
                    .map(|(&d, &g)| (alpha * d - g).powi(2))
                    .sum::<f64>()
                    / m,
            )
        } else if let Some(c) = &self.crlb {
            let r = w * w.adjoint();
            let g = c.terms.schur(&r)?;
            let l = c.model.snapshots as f64;
            Some(c.model.noise_power / (2.0 * l * c.model.amplitude.norm_sqr() * g))
        } else {
            None
        }
    }

    /// Ascent gradient of the negated sensing metric (a descent on the
    /// metric itself), in the same Wirtinger convention as the sum rate.
    fn sensing_descent_grad(&self, w: &CMat) -> Option<CMat> {
        if let Some(p) = &self.pattern {
            let v = &p.a * w;
            let gains: Vec<f64> = (0..v.nrows()).map(|i| v.row(i).norm_squared()).collect();
            let alpha = resolve_alpha(p.alpha, &p.desired, &gains);
            let m = gains.len() as f64;
            let mut scaled = v.clone();
            for i in 0..scaled.nrows() {
                let e = alpha * p.desired[i] - gains[i];
                let f = Complex64::from(2.0 * e / m);
                for j in 0..scaled.ncols() {
                    scaled[(i, j)] *= f;
                }
            }
            Some(p.a.adjoint() * scaled)
        } else if let Some(c) = &self.crlb {
            let r = w * w.adjoint();
            let g = c.terms.schur(&r)?;
            let m = c.terms.schur_grad(&r)?;
            let l = c.model.snapshots as f64;
            let crlb = c.model.noise_power / (2.0 * l * c.model.amplitude.norm_sqr() * g);
            // d(-crlb) = (crlb / g) dg.
            Some((m * w).scale(crlb / g))
        } else {
            None
        }
    }

    /// Constraint geometry matching the configured objective: a fixed
    /// pattern scale makes interior power meaningful, everything else is
    /// scale-degenerate or power-monotone and lives on the sphere.
    fn projection(&self) -> Projection {
        match &self.pattern {
            Some(p) => match p.alpha {
                AlphaMode::Fixed(_) => Projection::Ball,
                AlphaMode::Optimized => Projection::Sphere,
            },
            None => Projection::Sphere,
        }
    }

    /// Deterministic jitter waking up zero columns, whose gradient is zero.
    fn jitter(&self, w: &CMat) -> CMat {
        self.jitter_scaled(w, 1e-3)
    }

    fn jitter_scaled(&self, w: &CMat, scale: f64) -> CMat {
        let mut out = w.clone();
        let eps = scale * (w.norm_squared().sqrt() / (w.ncols() as f64).sqrt()).max(1e-6);
        for j in 0..out.ncols() {
            if out.column(j).norm() < eps {
                out[(j % self.n, j)] += Complex64::from(eps);
            }
        }
        out
    }

    fn finish(&self, run: Ascent, budget: f64) -> TradeoffSolution {
        let w = run.state;
        let w_comm = w.columns(0, self.num_users).clone_owned();
        let w_radar = w.columns(self.num_users, w.ncols() - self.num_users).clone_owned();
        let precoder = PrecoderSet { w_comm, w_radar, power_budget: budget };
        let sinrs = self.sinrs(&w);
        let sensing = self.sensing_value(&w).unwrap_or(f64::INFINITY);
        TradeoffSolution {
            sum_rate: sum_rate_from_sinrs(&sinrs),
            sensing_value: sensing,
            user_sinrs: sinrs,
            precoder,
            iterations: run.iterations,
            converged: run.converged,
        }
    }
}

/// Stack comm and radar columns into one solver state of width `U + N`.
pub(crate) fn full_state(p: &PrecoderSet, n: usize) -> CMat {
    let u = p.w_comm.ncols();
    let r = p.w_radar.ncols();
    let mut w = CMat::zeros(n, u + n);
    for j in 0..u {
        w.set_column(j, &p.w_comm.column(j).clone_owned());
    }
    for j in 0..r.min(n) {
        w.set_column(u + j, &p.w_radar.column(j).clone_owned());
    }
    w
}

pub(crate) struct Ascent {
    pub(crate) state: CMat,
    pub(crate) iterations: usize,
    pub(crate) converged: bool,
}

/// Power-constraint geometry of a projected ascent.
#[derive(Clone, Copy, Debug)]
pub(crate) enum Projection {
    /// Scale down onto the budget ball; interior iterates stay put. For
    /// objectives whose optimum may use less than the full budget.
    Ball,
    /// Renormalize every nonzero iterate to the exact budget. Required when
    /// the objective is scale-degenerate (pattern error with a free scale
    /// shrinks quadratically with the state) or strictly power-monotone.
    Sphere,
}

/// Monotone projected gradient ascent with backtracking steps. Every iterate
/// satisfies the power budget; `feasible` rejections shrink the step, so a
/// feasible start stays feasible throughout.
pub(crate) fn ascend(
    start: CMat,
    budget: f64,
    proj: Projection,
    iterations: usize,
    tolerance: f64,
    value: &dyn Fn(&CMat) -> f64,
    grad: &dyn Fn(&CMat) -> CMat,
    feasible: &dyn Fn(&CMat) -> bool,
) -> Ascent {
    let project = |mut w: CMat| -> CMat {
        let p = w.norm_squared();
        let rescale = match proj {
            Projection::Ball => p > budget,
            Projection::Sphere => p > 0.0,
        };
        if rescale {
            w *= Complex64::from((budget / p).sqrt());
        }
        w
    };
    let mut w = project(start);
    let mut f = value(&w);
    let mut lr = 0.1;
    let mut iters = 0usize;
    // Stall detection over a window: single good steps between flat ones must
    // not mask a crawl, so the test is the mean improvement per iteration.
    let window = 40usize;
    let mut hist = vec![f];
    for it in 0..iterations {
        iters = it + 1;
        let g = grad(&w);
        let gn = g.norm_squared().sqrt();
        if gn == 0.0 {
            return Ascent { state: w, iterations: iters, converged: true };
        }
        let scale = w.norm_squared().sqrt().max(budget.sqrt());
        let mut accepted = false;
        let mut trial_lr = lr;
        for _ in 0..30 {
            let cand = project(&w + g.clone().scale(trial_lr * scale / gn));
            let fc = value(&cand);
            if fc > f && feasible(&cand) {
                w = cand;
                f = fc;
                lr = (trial_lr * 1.4).min(1.0);
                accepted = true;
                break;
            }
            trial_lr *= 0.5;
        }
        if !accepted {
            lr = (lr * 0.25).max(1e-14);
        }
        hist.push(f);
        if hist.len() > window && f.is_finite() {
            let past = hist[hist.len() - 1 - window];
            if f - past <= tolerance * window as f64 * (1.0 + f.abs()) {
                return Ascent { state: w, iterations: iters, converged: true };
            }
        }
    }
    Ascent { state: w, iterations: iters, converged: false }
}

/// Communication endpoint: ascend the sum rate from zero-forcing with
/// water-filling, never letting any single user drop below its baseline.
fn solve_comm_endpoint(
    work: &SolverWork,
    users: &[CommUser],
    options: &SolveOptions,
) -> Result<TradeoffSolution> {
    let zf = zf_with_waterfilling(users, options.power_budget)?;
    let floors: Vec<f64> = zf.sinrs.iter().map(|&s| s * (1.0 - 1e-3)).collect();
    let n = work.n;
    let base = PrecoderSet {
        w_comm: zf.w_comm.clone(),
        w_radar: CMat::zeros(n, 0),
        power_budget: options.power_budget,
    };
    let start = full_state(&base, n);
    let value = |w: &CMat| work.sum_rate(w);
    let grad = |w: &CMat| work.sum_rate_grad(w);
    let feasible = |w: &CMat| work.sinrs(w).iter().zip(&floors).all(|(&g, &f)| g >= f);
    let run = ascend(
        start,
        options.power_budget,
        work.projection(),
        options.iterations,
        options.tolerance,
        &value,
        &grad,
        &feasible,
    );
    Ok(work.finish(run, options.power_budget))
}

/// Sensing endpoint: minimize the sensing metric outright from structured
/// starts (spread covariance, steered covariance).
fn solve_sensing_endpoint(
    work: &SolverWork,
    options: &SolveOptions,
    comm_end: &TradeoffSolution,
) -> Result<TradeoffSolution> {
    let n = work.n;
    let u = work.num_users;
    let budget = options.power_budget;
    let mut starts: Vec<CMat> = Vec::new();

    // Spread start: identity covariance with a whisper of the comm solution.
    let mut spread = CMat::zeros(n, u + n);
    for j in 0..n {
        spread[(j, u + j)] = Complex64::from((budget / (n as f64)).sqrt() * 0.95);
    }
    for j in 0..u {
        let col = comm_end.precoder.w_comm.column(j) * Complex64::from(0.05f64.sqrt());
        spread.set_column(j, &col.clone_owned());
    }
    starts.push(spread);

    // Steered start from the comm endpoint itself.
    starts.push(work.jitter(&full_state(&comm_end.precoder, n)));

    let value = |w: &CMat| work.sensing_value(w).map_or(f64::NEG_INFINITY, |v| -v);
    let grad =
        |w: &CMat| work.sensing_descent_grad(w).unwrap_or_else(|| CMat::zeros(n, w.ncols()));
    let mut best: Option<Ascent> = None;
    let mut best_v = f64::NEG_INFINITY;
    for start in starts {
        let run = ascend(
            start,
            budget,
            work.projection(),
            options.iterations,
            options.tolerance,
            &value,
            &grad,
            &|_| true,
        );
        let v = value(&run.state);
        if v > best_v {
            best_v = v;
            best = Some(run);
        }
    }
    let run = best.ok_or_else(|| IsacError::numerical("sensing endpoint had no valid start"))?;
    Ok(work.finish(run, budget))
}

pub(crate) fn channel_matrix(users: &[CommUser], n: usize) -> Result<CMat> {
    for (i, u) in users.iter().enumerate() {
        if u.channel.len() != n {
            return Err(IsacError::dimension(format!(
                "user {i} channel length {} vs {n} antennas",
                u.channel.len()
            )));
        }
    }
    Ok(CMat::from_fn(users.len(), n, |u, j| users[u].channel[j].conj()))
}

fn check_users(p: &PrecoderSet, users: &[CommUser]) -> Result<()> {
    if users.len() != p.w_comm.ncols() {
        return Err(IsacError::dimension(format!(
            "{} users vs {} comm precoder columns",
            users.len(),
            p.w_comm.ncols()
        )));
    }
    let n = p.num_antennas();
    for (i, u) in users.iter().enumerate() {
        if u.channel.len() != n {
            return Err(IsacError::dimension(format!(
                "user {i} channel length {} vs {n} antennas",
                u.channel.len()
            )));
        }
    }
    Ok(())
}

fn check_covariance(r: &CMat, array: &ArrayGeometry) -> Result<()> {
    if !r.is_square() || r.nrows() != array.num_elements {
        return Err(IsacError::dimension(format!(
            "covariance is {}x{}, array has {} elements",
            r.nrows(),
            r.ncols(),
            array.num_elements
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix3;
    use crate::linalg::rank;
    use crate::rng;
    use crate::scenario::rayleigh_channel;
    use approx::assert_relative_eq;

    fn los_users(array: &ArrayGeometry, angles: &[f64], noise: f64) -> Vec<CommUser> {
        angles
            .iter()
            .map(|&a| CommUser::line_of_sight(array, a, 10.0, noise).unwrap())
            .collect()
    }

    fn random_precoder(rng: &mut rng::Stream, n: usize, u: usize, budget: f64) -> PrecoderSet {
        let mut w_comm = CMat::from_fn(n, u, |_, _| rng::complex_normal(rng));
        let mut w_radar = CMat::from_fn(n, n, |_, _| rng::complex_normal(rng));
        let total = w_comm.norm_squared() + w_radar.norm_squared();
        let s = Complex64::from((budget / total).sqrt() * 0.9);
        w_comm *= s;
        w_radar *= s;
        PrecoderSet::new(w_comm, w_radar, budget).unwrap()
    }

    #[test]
    fn test_covariance_identity_radar() {
        let p = PrecoderSet::new(CMat::zeros(4, 2), CMat::identity(4, 4), 8.0).unwrap();
        let r = p.transmit_covariance();
        assert!((r - CMat::identity(4, 4)).norm() < 1e-14);
    }

    #[test]
    fn test_covariance_hermitian_and_rank() {
        let mut rng = rng::stream(3, "blp-cov");
        let p = random_precoder(&mut rng, 6, 2, 4.0);
        let r = p.transmit_covariance();
        assert!((&r - r.adjoint()).norm() < 1e-12);

        let mut stacked = CMat::zeros(6, 2 + 6);
        for j in 0..2 {
            stacked.set_column(j, &p.w_comm.column(j).clone_owned());
        }
        for j in 0..6 {
            stacked.set_column(2 + j, &p.w_radar.column(j).clone_owned());
        }
        assert_eq!(rank(&r, 1e-10), rank(&stacked, 1e-10));

        // Thin precoders leave the covariance rank-deficient.
        let thin = PrecoderSet::new(p.w_comm.clone(), CMat::zeros(6, 0), 4.0).unwrap();
        assert_eq!(rank(&thin.transmit_covariance(), 1e-10), 2);
    }

    #[test]
    fn test_power_budget_enforced() {
        let w = CMat::identity(4, 4);
        assert!(PrecoderSet::new(w.clone(), CMat::zeros(4, 0), 3.9).is_err());
        assert!(PrecoderSet::new(w, CMat::zeros(4, 0), 4.0).is_ok());
    }

    #[test]
    fn test_mrt_single_user_sinr() {
        let array = ArrayGeometry::half_wavelength(8);
        let mut rng = rng::stream(4, "blp-mrt");
        let h = rayleigh_channel(&mut rng, 8);
        let p_tx = 2.0f64;
        let noise = 0.01;
        let w = &h * Complex64::from(p_tx.sqrt() / h.norm());
        let user = CommUser { channel: h.clone(), sinr_target_db: 0.0, noise_power: noise };
        let set = PrecoderSet::new(
            CMat::from_columns(&[w.column(0).clone_owned()]),
            CMat::zeros(8, 0),
            p_tx,
        )
        .unwrap();
        let sinr = user_sinr(&set, &[user]).unwrap();
        assert_relative_eq!(sinr[0], p_tx * h.norm_squared() / noise, max_relative = 1e-12);
        let _ = array;
    }

    #[test]
    fn test_zf_nulls_cross_terms() {
        let array = ArrayGeometry::half_wavelength(8);
        let users = los_users(&array, &[-40.0, 25.0], 0.01);
        let zf = zf_with_waterfilling(&users, 1.0).unwrap();
        for (u, user) in users.iter().enumerate() {
            for i in 0..2 {
                if i != u {
                    let cross = user.channel.dotc(&zf.w_comm.column(i).clone_owned());
                    assert!(cross.norm() < 1e-9, "cross term {}", cross.norm());
                }
            }
        }
        assert_relative_eq!(zf.power_used, 1.0, max_relative = 1e-9);
        let set =
            PrecoderSet::new(zf.w_comm.clone(), CMat::zeros(8, 0), 1.0 + 1e-9).unwrap();
        let sinrs = user_sinr(&set, &users).unwrap();
        for (a, b) in sinrs.iter().zip(&zf.sinrs) {
            assert_relative_eq!(a, b, max_relative = 1e-9);
        }
    }

    #[test]
    fn test_sinr_matches_formula_oracle() {
        let mut rng = rng::stream(5, "blp-sinr");
        let n = 6;
        let users: Vec<CommUser> = (0..3)
            .map(|_| CommUser {
                channel: rayleigh_channel(&mut rng, n),
                sinr_target_db: 0.0,
                noise_power: 0.05,
            })
            .collect();
        let p = random_precoder(&mut rng, n, 3, 2.0);
        let got = user_sinr(&p, &users).unwrap();
        for (u, user) in users.iter().enumerate() {
            let c = |w: &CVec| -> Complex64 { user.channel.dotc(w) };
            let sig = c(&p.w_comm.column(u).clone_owned()).norm_sqr();
            let mut den = user.noise_power;
            for i in 0..3 {
                if i != u {
                    den += c(&p.w_comm.column(i).clone_owned()).norm_sqr();
                }
            }
            for j in 0..n {
                den += c(&p.w_radar.column(j).clone_owned()).norm_sqr();
            }
            assert_relative_eq!(got[u], sig / den, max_relative = 1e-12);
        }
    }

    #[test]
    fn test_sum_rate_known_values() {
        assert_relative_eq!(sum_rate_from_sinrs(&[1.0, 1.0]), 2.0, max_relative = 1e-15);
        assert_relative_eq!(sum_rate_from_sinrs(&[3.0, 0.0]), 2.0, max_relative = 1e-15);
    }

    #[test]
    fn test_mui_energy_pseudo_inverse_and_zero() {
        let mut rng = rng::stream(6, "blp-mui");
        let n = 6;
        let users: Vec<CommUser> = (0..2)
            .map(|_| CommUser {
                channel: rayleigh_channel(&mut rng, n),
                sinr_target_db: 0.0,
                noise_power: 0.01,
            })
            .collect();
        let symbols = CMat::from_fn(2, 5, |_, _| rng::complex_normal(&mut rng));
        let f = zf_directions(&users).unwrap();
        let x = &f * &symbols;
        assert!(mui_energy(&users, &x, &symbols).unwrap() < 1e-18);
        let zero = CMat::zeros(n, 5);
        assert_relative_eq!(
            mui_energy(&users, &zero, &symbols).unwrap(),
            symbols.norm_squared(),
            max_relative = 1e-12
        );
        // Random block against the elementwise oracle.
        let x = CMat::from_fn(n, 5, |_, _| rng::complex_normal(&mut rng));
        let h = channel_matrix(&users, n).unwrap();
        let diff = &h * &x - &symbols;
        let oracle: f64 = diff.iter().map(|z| z.norm_sqr()).sum();
        assert_relative_eq!(mui_energy(&users, &x, &symbols).unwrap(), oracle, max_relative = 1e-12);
    }

    #[test]
    fn test_flat_pattern_matches_scaled_identity() {
        let array = ArrayGeometry::half_wavelength(8);
        let p_tx = 4.0;
        let r = CMat::identity(8, 8).scale(p_tx / 8.0);
        let desired = DesiredBeampattern::flat(p_tx);
        let mse = beampattern_mse(&r, &desired, &array, AlphaMode::Fixed(1.0)).unwrap();
        assert!(mse < 1e-20, "mse {mse}");
    }

    #[test]
    fn test_delta_pattern_mainlobe_gain() {
        let array = ArrayGeometry::half_wavelength(8);
        let p_tx = 2.0;
        let a0 = array.steering_vector(20.0).unwrap();
        let r = (&a0 * a0.adjoint()).scale(p_tx / 8.0);
        let gain = beampattern_gains(&r, &array, &[20.0]).unwrap()[0];
        assert_relative_eq!(gain, p_tx * 8.0, max_relative = 1e-12);
    }

    #[test]
    fn test_optimized_alpha_never_increases_mse() {
        let mut rng = rng::stream(7, "blp-alpha");
        let array = ArrayGeometry::half_wavelength(6);
        let desired = DesiredBeampattern::from_mainlobes(&[0.0], 10.0, 1.0).unwrap();
        for _ in 0..5 {
            let p = random_precoder(&mut rng, 6, 2, 1.0);
            let r = p.transmit_covariance();
            let fixed = beampattern_mse(&r, &desired, &array, AlphaMode::Fixed(1.0)).unwrap();
            let opt = beampattern_mse(&r, &desired, &array, AlphaMode::Optimized).unwrap();
            assert!(opt <= fixed + 1e-15);
        }
    }

    #[test]
    fn test_beampattern_invariant_under_unitary_column_mixing() {
        let mut rng = rng::stream(8, "blp-unitary");
        let array = ArrayGeometry::half_wavelength(6);
        let desired = DesiredBeampattern::from_mainlobes(&[-15.0], 8.0, 1.0).unwrap();
        let p = random_precoder(&mut rng, 6, 3, 1.0);
        let q = crate::linalg::random_unitary(&mut rng, 3);
        let mixed = PrecoderSet::new(&p.w_comm * &q, p.w_radar.clone(), p.power_budget).unwrap();
        let m1 = p.beampattern_mse(&desired, &array, AlphaMode::Optimized).unwrap();
        let m2 = mixed.beampattern_mse(&desired, &array, AlphaMode::Optimized).unwrap();
        assert_relative_eq!(m1, m2, max_relative = 1e-10);
    }

    fn test_model(n: usize) -> CrlbModel {
        CrlbModel {
            tx_array: ArrayGeometry::half_wavelength(n),
            rx_array: ArrayGeometry::half_wavelength(n),
            snapshots: 4,
            noise_power: 0.05,
            amplitude: Complex64::new(0.8, 0.3),
        }
    }

    #[test]
    fn test_crlb_halves_when_power_doubles() {
        let mut rng = rng::stream(9, "blp-crlb");
        let model = test_model(6);
        let p = random_precoder(&mut rng, 6, 2, 1.0);
        let r = p.transmit_covariance();
        let c1 = crlb_angle(&r, 12.0, &model).unwrap();
        let c2 = crlb_angle(&r.clone().scale(2.0), 12.0, &model).unwrap();
        assert_relative_eq!(c2, c1 / 2.0, max_relative = 1e-12);
    }

    #[test]
    fn test_crlb_orthogonal_beam_is_infinite() {
        let model = test_model(4);
        let v = model.tx_array.steering_vector(30.0).unwrap().conjugate();
        // Any direction orthogonal to conj(a(30)) carries no echo energy.
        let mut u = CVec::from_fn(4, |i, _| Complex64::new((i + 1) as f64, 0.3));
        u -= &v * (v.dotc(&u) / Complex64::from(v.norm_squared()));
        let r = (&u * u.adjoint()).scale(1.0 / u.norm_squared());
        assert!(crlb_angle(&r, 30.0, &model).unwrap().is_infinite());
    }

    #[test]
    fn test_crlb_matches_finite_difference_fisher_information() {
        // Oracle: the Fisher matrix over (theta, Re alpha, Im alpha) equals
        // minus the Hessian of the log-likelihood at the truth when the
        // observation is noiseless; invert it and compare the angle block.
        let mut rng = rng::stream(10, "blp-fim");
        let n = 5;
        let l = 3;
        let model = CrlbModel {
            tx_array: ArrayGeometry::half_wavelength(n),
            rx_array: ArrayGeometry::half_wavelength(n),
            snapshots: l,
            noise_power: 0.07,
            amplitude: Complex64::new(0.9, -0.4),
        };
        let x = CMat::from_fn(n, l, |_, _| rng::complex_normal(&mut rng));
        let r = (&x * x.adjoint()).scale(1.0 / l as f64);
        let theta0 = 17.0f64.to_radians();
        let mean = |theta: f64, alpha: Complex64| -> CMat {
            let a = model.tx_array.steering_vector(theta.to_degrees()).unwrap();
            let b = model.rx_array.steering_vector(theta.to_degrees()).unwrap();
            (&b * a.transpose() * &x) * alpha
        };
        let y0 = mean(theta0, model.amplitude);
        let ll = |p: &[f64; 3]| -> f64 {
            let m = mean(p[0], Complex64::new(p[1], p[2]));
            -(&y0 - m).norm_squared() / model.noise_power
        };
        let p0 = [theta0, model.amplitude.re, model.amplitude.im];
        let h = 1e-5;
        let mut fim = Matrix3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                let mut pp = p0;
                let val = if i == j {
                    pp[i] = p0[i] + h;
                    let f1 = ll(&pp);
                    pp[i] = p0[i] - h;
                    let f2 = ll(&pp);
                    (f1 - 2.0 * ll(&p0) + f2) / (h * h)
                } else {
                    let mut acc = 0.0;
                    for (si, sj, sgn) in
                        [(1.0, 1.0, 1.0), (1.0, -1.0, -1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 1.0)]
                    {
                        pp = p0;
                        pp[i] += si * h;
                        pp[j] += sj * h;
                        acc += sgn * ll(&pp);
                    }
                    acc / (4.0 * h * h)
                };
                fim[(i, j)] = -val;
            }
        }
        let inv = fim.try_inverse().expect("FIM invertible");
        let fd_crlb = inv[(0, 0)];
        let closed = crlb_angle(&r, theta0.to_degrees(), &model).unwrap();
        assert_relative_eq!(closed, fd_crlb, max_relative = 1e-4);
    }

    #[test]
    fn test_crlb_improves_with_power_on_target() {
        let model = test_model(6);
        let v = model.tx_array.steering_vector(-25.0).unwrap().conjugate();
        let probe = (&v * v.adjoint()).scale(1.0 / v.norm_squared());
        let base = CMat::identity(6, 6).scale(1.0 / 6.0);
        let mut last = f64::INFINITY;
        for frac in [0.0, 0.3, 0.6, 0.9] {
            let r = base.clone().scale(1.0 - frac) + probe.clone().scale(frac);
            let c = crlb_angle(&r, -25.0, &model).unwrap();
            assert!(c < last, "crlb not improving: {c} vs {last}");
            last = c;
        }
    }

    #[test]
    fn test_waterfilling_beats_equal_power_zf() {
        let array = ArrayGeometry::half_wavelength(8);
        let mut users = los_users(&array, &[-50.0, 10.0], 0.01);
        users[1].noise_power = 0.2;
        let budget = 1.0;
        let wf = zf_with_waterfilling(&users, budget).unwrap();
        let f = zf_directions(&users).unwrap();
        let c: Vec<f64> = (0..2).map(|u| f.column(u).norm_squared()).collect();
        // Equal transmit power split across the two directions.
        let eq: Vec<f64> = (0..2).map(|u| budget / (2.0 * c[u])).collect();
        let eq_rate = sum_rate_from_sinrs(&[eq[0] / 0.01, eq[1] / 0.2]);
        let wf_rate = sum_rate_from_sinrs(&wf.sinrs);
        assert!(wf_rate >= eq_rate - 1e-12, "{wf_rate} < {eq_rate}");
    }

    #[test]
    fn test_tradeoff_sweep_is_monotone_and_protects_users() {
        let array = ArrayGeometry::half_wavelength(8);
        let users = los_users(&array, &[-45.0, 30.0], 0.01);
        let desired = DesiredBeampattern::from_mainlobes(&[0.0], 10.0, 1.0).unwrap();
        let objective =
            SensingObjective::BeampatternMse { desired, alpha: AlphaMode::Optimized };
        let options = SolveOptions { iterations: 300, ..SolveOptions::default() };
        let ctx = TradeoffContext::new(&users, &array, objective, options).unwrap();
        let points = ctx.sweep(&[0.0, 0.25, 0.5, 0.75, 1.0]).unwrap();
        assert_eq!(points.len(), 5);
        for pair in points.windows(2) {
            assert!(pair[1].solution.sum_rate >= pair[0].solution.sum_rate - 1e-12);
            assert!(pair[1].solution.sensing_value >= pair[0].solution.sensing_value - 1e-15);
        }
        // Sensing endpoint must beat the comm endpoint's pattern decisively.
        let first = &points[0].solution;
        let last = &points[4].solution;
        assert!(first.sensing_value <= 0.1 * last.sensing_value);
        // Comm endpoint protects every user against the ZF baseline.
        let zf = zf_with_waterfilling(&users, 1.0).unwrap();
        for (got, base) in last.user_sinrs.iter().zip(&zf.sinrs) {
            let loss_db = 10.0 * (base / got).log10();
            assert!(loss_db <= 0.1, "user lost {loss_db} dB vs ZF");
        }
        // Every iterate respected the power budget.
        for p in &points {
            assert!(p.solution.precoder.total_power() <= 1.0 * (1.0 + POWER_SLACK));
        }
    }

    #[test]
    fn test_crlb_frontier_never_loses_to_baseline() {
        let array = ArrayGeometry::half_wavelength(8);
        let users = los_users(&array, &[-45.0, 30.0], 0.01);
        let model = CrlbModel {
            tx_array: array.clone(),
            rx_array: array.clone(),
            snapshots: 8,
            noise_power: 0.05,
            amplitude: Complex64::from(1.0),
        };
        let options = SolveOptions { iterations: 250, ..SolveOptions::default() };
        let points = crlb_sinr_frontier(&users, 5.0, &model, &[6.0, 10.0], &options).unwrap();
        for p in &points {
            assert!(p.baseline_crlb.is_finite());
            assert!(
                p.joint_crlb <= p.baseline_crlb * (1.0 + 1e-12),
                "joint {} vs baseline {}",
                p.joint_crlb,
                p.baseline_crlb
            );
            let gamma = 10f64.powf(p.sinr_target_db / 10.0);
            for &s in &p.joint_sinrs {
                assert!(s >= gamma * (1.0 - 1e-6), "sinr {s} below target {gamma}");
            }
        }
    }
}
