//! Symbol-level precoding: constructive-interference geometry for PSK
//! signaling and per-symbol transmit-vector optimization.
//!
//! Where block-level designs meet quality targets on average, the solves here
//! guarantee them for every transmitted symbol: each noiseless received point
//! is pushed into its symbol's constructive region, and whatever power or
//! radar objective is chosen is optimized subject to that geometry. The
//! destructive-region classifier supports designs that deliberately corrupt
//! an eavesdropper's constellation.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::blp::{resolve_alpha, AlphaMode, CrlbModel, CrlbTerms, DesiredBeampattern};
use crate::error::{IsacError, Result};
use crate::linalg::{CMat, CVec};
use crate::rng::{complex_normal, Stream};
use crate::scenario::{ArrayGeometry, CommUser};
use crate::solver::{min_norm_point, project_polyhedron_ball};

/// Absolute feasibility tolerance on constructive-interference margins.
pub const CI_TOLERANCE: f64 = 1e-8;

/// Destructive-zone constraints are enforced strictly inside the zone, at a
/// depth of this fraction of the user's CI threshold, so the resulting
/// classification is stable under solver-level rounding.
const DI_DEPTH_FRACTION: f64 = 1e-3;

/// Per-user constructive-interference constraint for one PSK symbol slot.
#[derive(Clone, Debug)]
pub struct CiConstraint {
    pub user_channel: CVec,
    /// Phase of the intended PSK symbol, radians.
    pub symbol_phase: f64,
    /// SNR target, linear scale.
    pub snr_target: f64,
    pub noise_power: f64,
    /// PSK order; must be a power of two.
    pub modulation_order: usize,
}

impl CiConstraint {
    pub fn new(
        user_channel: CVec,
        symbol_phase: f64,
        snr_target: f64,
        noise_power: f64,
        modulation_order: usize,
    ) -> Result<Self> {
        if modulation_order < 2 || !modulation_order.is_power_of_two() {
            return Err(IsacError::domain(format!(
                "modulation order {modulation_order} is not a power of two"
            )));
        }
        if !(snr_target > 0.0) {
            return Err(IsacError::domain("SNR target must be positive"));
        }
        if !(noise_power > 0.0) {
            return Err(IsacError::domain("noise power must be positive"));
        }
        if user_channel.norm() == 0.0 {
            return Err(IsacError::domain("user channel must be nonzero"));
        }
        Ok(Self { user_channel, symbol_phase, snr_target, noise_power, modulation_order })
    }

    /// Distance from the origin to the region apex, `sqrt(Gamma sigma^2)`.
    pub fn threshold(&self) -> f64 {
        (self.snr_target * self.noise_power).sqrt()
    }

    /// Noiseless received point rotated into the nominal-symbol frame.
    pub fn rotated_rx(&self, x: &CVec) -> Complex64 {
        self.user_channel.dotc(x) * Complex64::from_polar(1.0, -self.symbol_phase)
    }
}

/// Signed constructive-interference margin of the received point.
///
/// Positive iff the rotated point lies inside the closed decision sector at
/// depth past the SNR threshold: `(Re - thr) tan(pi/M) >= |Im|`. BPSK has no
/// imaginary boundary; its sector is the half-plane `Re >= thr`.
pub fn ci_margin(x: &CVec, c: &CiConstraint) -> f64 {
    let z = c.rotated_rx(x);
    let thr = c.threshold();
    if c.modulation_order == 2 {
        z.re - thr
    } else {
        let beta = std::f64::consts::PI / c.modulation_order as f64;
        (z.re - thr) * beta.tan() - z.im.abs()
    }
}

/// Destructive-interference classification of a received point relative to
/// one user's QPSK symbol. The three zones are the decision sectors other
/// than the nominal one; a point in the nominal sector is "not destructive"
/// even when it is too shallow to satisfy the CI condition.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiRegion {
    NotDi,
    /// Counter-clockwise neighbor sector.
    Zone1,
    /// Clockwise neighbor sector.
    Zone2,
    /// Antipodal sector, the deepest corruption.
    Zone3,
}

/// Classify the received point among the QPSK destructive zones.
pub fn di_region_test(x: &CVec, c: &CiConstraint) -> Result<DiRegion> {
    if c.modulation_order != 4 {
        return Err(IsacError::domain(format!(
            "destructive regions are defined for QPSK, got order {}",
            c.modulation_order
        )));
    }
    let z = c.rotated_rx(x);
    Ok(classify_qpsk(z))
}

fn classify_qpsk(z: Complex64) -> DiRegion {
    if z.re >= z.im.abs() {
        DiRegion::NotDi
    } else if -z.re >= z.im.abs() {
        DiRegion::Zone3
    } else if z.im > 0.0 {
        DiRegion::Zone1
    } else {
        DiRegion::Zone2
    }
}

/// Objective minimized by a symbol solve, subject to all CI constraints.
#[derive(Clone, Debug)]
pub enum SlpObjective {
    /// Plain transmit power `||x||^2`.
    MinPower,
    /// Instantaneous beampattern matching error under a power budget.
    BeamError { desired: DesiredBeampattern, array: ArrayGeometry, power_budget: f64 },
    /// Angle CRLB of a point target under a power budget.
    Crlb { angle_deg: f64, model: CrlbModel, power_budget: f64 },
}

/// Optional structural constraint layered onto a symbol solve.
#[derive(Clone, Debug)]
pub enum SlpExtra {
    None,
    /// Per-antenna constant modulus at total power `power` (best-effort).
    ConstantModulus { power: f64 },
    /// Force the eavesdropper's received point into a destructive zone for
    /// every user's symbol.
    DiOnEve { eve_channel: CVec },
}

/// Result of one per-symbol optimization.
#[derive(Clone, Debug)]
pub struct SymbolSolve {
    pub x: CVec,
    pub objective: f64,
    /// CI margins, one per user; feasible when all are above `-CI_TOLERANCE`.
    pub ci_residuals: Vec<f64>,
    pub converged: bool,
}

impl SymbolSolve {
    pub fn is_feasible(&self) -> bool {
        self.ci_residuals.iter().all(|&m| m >= -CI_TOLERANCE)
    }
}

/// Solve one symbol slot: minimize the objective subject to every user's CI
/// constraint and the optional extra structure.
pub fn solve_symbol(
    constraints: &[CiConstraint],
    objective: &SlpObjective,
    extra: &SlpExtra,
) -> Result<SymbolSolve> {
    if constraints.is_empty() {
        return Err(IsacError::dimension("at least one CI constraint required"));
    }
    let n = constraints[0].user_channel.len();
    for (i, c) in constraints.iter().enumerate() {
        if c.user_channel.len() != n {
            return Err(IsacError::dimension(format!(
                "constraint {i} channel length {} vs {n}",
                c.user_channel.len()
            )));
        }
    }
    match extra {
        SlpExtra::None => solve_plain(constraints, objective, n, &[]),
        SlpExtra::DiOnEve { eve_channel } => {
            if eve_channel.len() != n {
                return Err(IsacError::dimension("eavesdropper channel length mismatch"));
            }
            solve_with_di(constraints, objective, n, eve_channel)
        }
        SlpExtra::ConstantModulus { power } => {
            solve_constant_modulus(constraints, n, *power)
        }
    }
}

fn solve_plain(
    constraints: &[CiConstraint],
    objective: &SlpObjective,
    n: usize,
    extra_rows: &[(Vec<f64>, f64)],
) -> Result<SymbolSolve> {
    let (g, h) = stack_constraints(constraints, n, extra_rows);
    let v = min_norm_point(&g, &h).map_err(|e| match e {
        IsacError::Infeasible(m) => IsacError::infeasible(format!("CI constraint set: {m}")),
        other => other,
    })?;
    let x_min = to_complex(&v, n);
    match objective {
        SlpObjective::MinPower => Ok(finish_solve(x_min, constraints, true)),
        SlpObjective::BeamError { desired, array, power_budget } => {
            let work = PatternWork::new(desired, array, n)?;
            refine_radar(
                x_min,
                constraints,
                &g,
                &h,
                *power_budget,
                &|x| work.error(x),
                &|x| work.descent(x),
            )
        }
        SlpObjective::Crlb { angle_deg, model, power_budget } => {
            let terms = CrlbTerms::new(*angle_deg, model)?;
            let l = model.snapshots as f64;
            let scale = model.noise_power / (2.0 * l * model.amplitude.norm_sqr());
            let value = move |x: &CVec| -> f64 {
                let r = x * x.adjoint();
                terms.schur(&r).map_or(f64::INFINITY, |g| scale / g)
            };
            let terms2 = CrlbTerms::new(*angle_deg, model)?;
            let descent = move |x: &CVec| -> CVec {
                let r = x * x.adjoint();
                match (terms2.schur(&r), terms2.schur_grad(&r)) {
                    (Some(g), Some(m)) => (&m * x) * Complex64::from(scale / (g * g)),
                    _ => CVec::zeros(x.len()),
                }
            };
            refine_radar(x_min, constraints, &g, &h, *power_budget, &value, &descent)
        }
    }
}

/// Enumerate destructive-zone assignments (one zone per user view of the
/// eavesdropper's point) and keep the cheapest feasible solve.
fn solve_with_di(
    constraints: &[CiConstraint],
    objective: &SlpObjective,
    n: usize,
    eve_channel: &CVec,
) -> Result<SymbolSolve> {
    let zones = [DiRegion::Zone1, DiRegion::Zone2, DiRegion::Zone3];
    let u = constraints.len();
    let mut assignment = vec![0usize; u];
    let mut best: Option<SymbolSolve> = None;
    loop {
        let mut rows: Vec<(Vec<f64>, f64)> = Vec::with_capacity(2 * u);
        for (user, c) in constraints.iter().enumerate() {
            let (re_row, im_row) = real_rows(eve_channel, c.symbol_phase, n);
            let depth = DI_DEPTH_FRACTION * c.threshold();
            rows.extend(zone_rows(zones[assignment[user]], &re_row, &im_row, depth));
        }
        match solve_plain(constraints, objective, n, &rows) {
            Ok(sol) => {
                if best.as_ref().map_or(true, |b| sol.objective < b.objective) {
                    best = Some(sol);
                }
            }
            Err(IsacError::Infeasible(_)) => {}
            Err(other) => return Err(other),
        }
        // Advance the mixed-radix assignment counter.
        let mut k = 0;
        loop {
            if k == u {
                return best.ok_or_else(|| {
                    IsacError::infeasible(
                        "no destructive-zone assignment admits a feasible transmit vector",
                    )
                });
            }
            assignment[k] += 1;
            if assignment[k] < zones.len() {
                break;
            }
            assignment[k] = 0;
            k += 1;
        }
    }
}

/// Alternating projection between the CI polyhedron and the per-antenna
/// constant-modulus torus. Nonconvex; best-effort with residual reporting.
fn solve_constant_modulus(
    constraints: &[CiConstraint],
    n: usize,
    power: f64,
) -> Result<SymbolSolve> {
    if !(power > 0.0) {
        return Err(IsacError::domain("constant-modulus power must be positive"));
    }
    let (g, h) = stack_constraints(constraints, n, &[]);
    let modulus = (power / n as f64).sqrt();
    let onto_torus = |x: &CVec| -> CVec {
        CVec::from_fn(n, |k, _| {
            let z = x[k];
            if z.norm() > 1e-300 {
                z * Complex64::from(modulus / z.norm())
            } else {
                Complex64::from(modulus)
            }
        })
    };
    let mut x = onto_torus(&to_complex(&min_norm_point(&g, &h)?, n));
    let mut converged = false;
    for _ in 0..400 {
        let onto_poly = crate::solver::project_polyhedron(&to_real(&x), &g, &h)?;
        let y = to_complex(&onto_poly, n);
        let next = onto_torus(&y);
        let drift = (&next - &x).norm();
        x = next;
        let margins: Vec<f64> = constraints.iter().map(|c| ci_margin(&x, c)).collect();
        if margins.iter().all(|&m| m >= -CI_TOLERANCE) && drift < 1e-12 {
            converged = true;
            break;
        }
    }
    let mut sol = finish_solve(x, constraints, converged);
    sol.objective = power;
    Ok(sol)
}

/// Descend a radar objective from the min-power point, staying inside the
/// CI polyhedron intersected with the power ball.
fn refine_radar(
    x_min: CVec,
    constraints: &[CiConstraint],
    g: &DMatrix<f64>,
    h: &DVector<f64>,
    power_budget: f64,
    value: &dyn Fn(&CVec) -> f64,
    descent: &dyn Fn(&CVec) -> CVec,
) -> Result<SymbolSolve> {
    let min_power = x_min.norm_squared();
    if min_power > power_budget * (1.0 + 1e-9) {
        return Err(IsacError::infeasible(format!(
            "CI constraints need {min_power:.6} power, budget is {power_budget:.6}"
        )));
    }
    let radius = power_budget.sqrt();
    let mut x = x_min;
    let mut f = value(&x);
    let mut lr = 0.1f64;
    let mut converged = false;
    let mut stall = 0usize;
    for _ in 0..250 {
        let d = descent(&x);
        let dn = d.norm();
        if dn == 0.0 {
            converged = true;
            break;
        }
        let scale = x.norm().max(radius * 0.1);
        let mut accepted = false;
        let mut trial = lr;
        for _ in 0..25 {
            let cand_raw = &x + &d * Complex64::from(trial * scale / dn);
            let v = project_polyhedron_ball(&to_real(&cand_raw), g, h, radius)?;
            let cand = to_complex(&v, x.len());
            let fc = value(&cand);
            if fc < f - 1e-15 * (1.0 + f.abs()) {
                let rel = (f - fc) / (1.0 + f.abs());
                x = cand;
                f = fc;
                lr = (trial * 1.4).min(1.0);
                accepted = true;
                stall = if rel < 1e-10 { stall + 1 } else { 0 };
                break;
            }
            trial *= 0.5;
        }
        if !accepted {
            stall += 8;
            lr = (lr * 0.25).max(1e-13);
        }
        if stall >= 24 {
            converged = true;
            break;
        }
    }
    let mut sol = finish_solve(x, constraints, converged);
    sol.objective = f;
    Ok(sol)
}

fn finish_solve(x: CVec, constraints: &[CiConstraint], converged: bool) -> SymbolSolve {
    let ci_residuals = constraints.iter().map(|c| ci_margin(&x, c)).collect();
    SymbolSolve { objective: x.norm_squared(), x, ci_residuals, converged }
}

/// Precomputed steering grid for instantaneous beampattern objectives.
struct PatternWork {
    /// Rows are `a(theta_i)^H`.
    a: CMat,
    desired: Vec<f64>,
}

impl PatternWork {
    fn new(desired: &DesiredBeampattern, array: &ArrayGeometry, n: usize) -> Result<Self> {
        if array.num_elements != n {
            return Err(IsacError::dimension("array size does not match channel length"));
        }
        let mut a = CMat::zeros(desired.angles_deg.len(), n);
        for (i, &theta) in desired.angles_deg.iter().enumerate() {
            let s = array.steering_vector(theta)?;
            for j in 0..n {
                a[(i, j)] = s[j].conj();
            }
        }
        Ok(Self { a, desired: desired.gains.clone() })
    }

    fn error(&self, x: &CVec) -> f64 {
        let v = &self.a * x;
        let gains: Vec<f64> = v.iter().map(|z| z.norm_sqr()).collect();
        let alpha = resolve_alpha(AlphaMode::Optimized, &self.desired, &gains);
        let m = gains.len() as f64;
        self.desired
            .iter()
            .zip(&gains)
            .map(|(&d, &g)| (alpha * d - g).powi(2))
            .sum::<f64>()
            / m
    }

    /// Direction along which the error decreases; Wirtinger convention.
    fn descent(&self, x: &CVec) -> CVec {
        let v = &self.a * x;
        let gains: Vec<f64> = v.iter().map(|z| z.norm_sqr()).collect();
        let alpha = resolve_alpha(AlphaMode::Optimized, &self.desired, &gains);
        let m = gains.len() as f64;
        let scaled = CVec::from_fn(v.len(), |i, _| {
            v[i] * Complex64::from(2.0 * (alpha * self.desired[i] - gains[i]) / m)
        });
        self.a.adjoint() * scaled
    }
}

// ---------------------------------------------------------------------------
// Real-valued constraint stacking
// ---------------------------------------------------------------------------

/// Real coefficient rows of `Re(h^H x e^{-j phi})` and `Im(...)` over the
/// stacked variable `[Re x; Im x]`.
fn real_rows(channel: &CVec, phase: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let rot = Complex64::from_polar(1.0, -phase);
    let mut re_row = vec![0.0; 2 * n];
    let mut im_row = vec![0.0; 2 * n];
    for k in 0..n {
        let w = channel[k].conj() * rot;
        re_row[k] = w.re;
        re_row[n + k] = -w.im;
        im_row[k] = w.im;
        im_row[n + k] = w.re;
    }
    (re_row, im_row)
}

/// Half-plane pair confining a point to one QPSK destructive zone, pushed
/// `depth` past each boundary.
fn zone_rows(
    zone: DiRegion,
    re_row: &[f64],
    im_row: &[f64],
    depth: f64,
) -> Vec<(Vec<f64>, f64)> {
    let combine = |cr: f64, ci: f64| -> Vec<f64> {
        re_row.iter().zip(im_row).map(|(&r, &i)| cr * r + ci * i).collect()
    };
    match zone {
        // Im - Re >= depth and Im + Re >= depth.
        DiRegion::Zone1 => vec![(combine(-1.0, 1.0), depth), (combine(1.0, 1.0), depth)],
        // -Im - Re >= depth and -Im + Re >= depth.
        DiRegion::Zone2 => vec![(combine(-1.0, -1.0), depth), (combine(1.0, -1.0), depth)],
        // -Re - Im >= depth and -Re + Im >= depth.
        DiRegion::Zone3 => vec![(combine(-1.0, -1.0), depth), (combine(-1.0, 1.0), depth)],
        DiRegion::NotDi => Vec::new(),
    }
}

fn stack_constraints(
    constraints: &[CiConstraint],
    n: usize,
    extra_rows: &[(Vec<f64>, f64)],
) -> (DMatrix<f64>, DVector<f64>) {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut bounds: Vec<f64> = Vec::new();
    for c in constraints {
        let (re_row, im_row) = real_rows(&c.user_channel, c.symbol_phase, n);
        let thr = c.threshold();
        if c.modulation_order == 2 {
            rows.push(re_row);
            bounds.push(thr);
        } else {
            let t = (std::f64::consts::PI / c.modulation_order as f64).tan();
            let plus: Vec<f64> =
                re_row.iter().zip(&im_row).map(|(&r, &i)| t * r - i).collect();
            let minus: Vec<f64> =
                re_row.iter().zip(&im_row).map(|(&r, &i)| t * r + i).collect();
            rows.push(plus);
            rows.push(minus);
            bounds.push(t * thr);
            bounds.push(t * thr);
        }
    }
    for (row, b) in extra_rows {
        rows.push(row.clone());
        bounds.push(*b);
    }
    let g = DMatrix::from_fn(rows.len(), 2 * n, |i, j| rows[i][j]);
    (g, DVector::from_vec(bounds))
}

fn to_real(x: &CVec) -> DVector<f64> {
    let n = x.len();
    DVector::from_fn(2 * n, |i, _| if i < n { x[i].re } else { x[i - n].im })
}

fn to_complex(v: &DVector<f64>, n: usize) -> CVec {
    CVec::from_fn(n, |k, _| Complex64::new(v[k], v[n + k]))
}

// ---------------------------------------------------------------------------
// Block runs
// ---------------------------------------------------------------------------

/// One noiseless received point in the scatter export.
#[derive(Clone, Debug)]
pub struct ScatterRow {
    pub symbol_idx: usize,
    pub user: usize,
    pub re: f64,
    pub im: f64,
    pub inside_ci: bool,
}

/// CSV export of the received-constellation scatter.
pub fn scatter_to_csv(rows: &[ScatterRow]) -> String {
    let mut out = String::from("symbol_idx,user,re,im,inside_ci\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{:.17e},{:.17e},{}\n",
            r.symbol_idx,
            r.user,
            r.re,
            r.im,
            u8::from(r.inside_ci)
        ));
    }
    out
}

/// Aggregate outcome of a per-symbol precoded block.
#[derive(Clone, Debug)]
pub struct SlpBlockRun {
    pub solves: Vec<SymbolSolve>,
    /// Mean `||x||^2` over the block; 0 for an empty stream.
    pub avg_power: f64,
    /// Mean instantaneous beampattern error when that objective is active.
    pub avg_beam_error: Option<f64>,
    /// Empirical symbol error rate under AWGN at each user's design noise.
    pub ser: f64,
    pub scatter: Vec<ScatterRow>,
}

/// Solve every symbol slot of a PSK stream and aggregate the results.
///
/// `symbols` holds unit-modulus PSK symbols, one row per user. The symbol
/// error rate is measured by replaying each solved vector `noise_trials`
/// times through AWGN at each user's configured noise power.
pub fn slp_block_run(
    users: &[CommUser],
    symbols: &CMat,
    modulation_order: usize,
    objective: &SlpObjective,
    extra: &SlpExtra,
    noise_trials: usize,
    rng: &mut Stream,
) -> Result<SlpBlockRun> {
    if users.is_empty() {
        return Err(IsacError::dimension("at least one user required"));
    }
    if symbols.nrows() != users.len() {
        return Err(IsacError::dimension(format!(
            "{} symbol rows vs {} users",
            symbols.nrows(),
            users.len()
        )));
    }
    let l = symbols.ncols();
    let mut solves = Vec::with_capacity(l);
    let mut scatter = Vec::with_capacity(l * users.len());
    let mut beam_sum = 0.0;
    let mut power_sum = 0.0;
    let mut errors = 0usize;
    let mut decisions = 0usize;
    for slot in 0..l {
        let constraints: Vec<CiConstraint> = users
            .iter()
            .enumerate()
            .map(|(u, user)| {
                CiConstraint::new(
                    user.channel.clone(),
                    symbols[(u, slot)].arg(),
                    user.sinr_target_linear(),
                    user.noise_power,
                    modulation_order,
                )
            })
            .collect::<Result<_>>()?;
        let solve = solve_symbol(&constraints, objective, extra)?;
        power_sum += solve.x.norm_squared();
        if matches!(objective, SlpObjective::BeamError { .. }) {
            beam_sum += solve.objective;
        }
        for (u, user) in users.iter().enumerate() {
            let z = user.channel.dotc(&solve.x);
            scatter.push(ScatterRow {
                symbol_idx: slot,
                user: u,
                re: z.re,
                im: z.im,
                inside_ci: solve.ci_residuals[u] >= -CI_TOLERANCE,
            });
            for _ in 0..noise_trials {
                let noise = complex_normal(rng) * Complex64::from(user.noise_power.sqrt());
                let decided = nearest_psk_index(z + noise, modulation_order);
                let sent = nearest_psk_index(symbols[(u, slot)], modulation_order);
                if decided != sent {
                    errors += 1;
                }
                decisions += 1;
            }
        }
        solves.push(solve);
    }
    Ok(SlpBlockRun {
        solves,
        avg_power: if l > 0 { power_sum / l as f64 } else { 0.0 },
        avg_beam_error: if matches!(objective, SlpObjective::BeamError { .. }) && l > 0 {
            Some(beam_sum / l as f64)
        } else {
            None
        },
        ser: if decisions > 0 { errors as f64 / decisions as f64 } else { 0.0 },
        scatter,
    })
}

/// Index of the PSK decision region containing `z`.
pub fn nearest_psk_index(z: Complex64, modulation_order: usize) -> usize {
    let m = modulation_order as f64;
    let sector = (z.arg() * m / (2.0 * std::f64::consts::PI)).round();
    sector.rem_euclid(m) as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blp::{zf_at_targets, zf_directions};
    use crate::rng;
    use crate::scenario::rayleigh_channel;
    use approx::assert_relative_eq;
    use rand::RngExt;

    fn apex_vector(c: &CiConstraint) -> CVec {
        let h = &c.user_channel;
        h * Complex64::from_polar(
            c.threshold() / h.norm_squared(),
            c.symbol_phase,
        )
    }

    fn random_constraint(rng: &mut rng::Stream, n: usize, order: usize) -> CiConstraint {
        CiConstraint::new(
            rayleigh_channel(rng, n),
            2.0 * std::f64::consts::PI * rng.random::<f64>(),
            10.0,
            0.02,
            order,
        )
        .unwrap()
    }

    #[test]
    fn test_margin_zero_at_apex() {
        let mut r = rng::stream(20, "slp-apex");
        for order in [2usize, 4, 8] {
            let c = random_constraint(&mut r, 5, order);
            let x = apex_vector(&c);
            assert!(ci_margin(&x, &c).abs() < 1e-10, "order {order}");
        }
    }

    #[test]
    fn test_bpsk_margin_is_halfplane() {
        let mut r = rng::stream(21, "slp-bpsk");
        let c = random_constraint(&mut r, 4, 2);
        for _ in 0..200 {
            let x = rayleigh_channel(&mut r, 4);
            let z = c.rotated_rx(&x);
            let inside = z.re >= c.threshold();
            assert_eq!(ci_margin(&x, &c) >= 0.0, inside);
        }
    }

    #[test]
    fn test_margin_sign_matches_sector_inclusion_oracle() {
        let mut r = rng::stream(22, "slp-sector");
        for order in [4usize, 8] {
            let c = random_constraint(&mut r, 4, order);
            let beta = std::f64::consts::PI / order as f64;
            let mut inside_count = 0;
            for _ in 0..10_000 {
                let x = rayleigh_channel(&mut r, 4) * Complex64::from(0.5);
                let z = c.rotated_rx(&x);
                // Independent inclusion test: angle of the apex-relative
                // point against the sector half-angle.
                let w = z - Complex64::from(c.threshold());
                let inside = if w.norm() == 0.0 {
                    true
                } else {
                    w.im.abs().atan2(w.re) <= beta
                };
                let margin = ci_margin(&x, &c);
                if margin.abs() > 1e-12 {
                    assert_eq!(margin > 0.0, inside, "z {z} order {order}");
                }
                inside_count += usize::from(inside);
            }
            assert!(inside_count > 0);
        }
    }

    #[test]
    fn test_margin_scaling_along_nominal_never_decreases() {
        let mut r = rng::stream(23, "slp-scale");
        let c = random_constraint(&mut r, 4, 4);
        let x = apex_vector(&c);
        let mut last = ci_margin(&x, &c);
        for scale in [1.5, 2.0, 4.0] {
            let m = ci_margin(&(&x * Complex64::from(scale)), &c);
            assert!(m >= last - 1e-12);
            last = m;
        }
    }

    #[test]
    fn test_di_classification() {
        let mut r = rng::stream(24, "slp-di");
        let c = random_constraint(&mut r, 4, 4);
        let apex = apex_vector(&c);
        assert_eq!(di_region_test(&apex, &c).unwrap(), DiRegion::NotDi);
        assert_eq!(
            di_region_test(&(&apex * Complex64::from(-1.0)), &c).unwrap(),
            DiRegion::Zone3
        );
        let c8 = random_constraint(&mut r, 4, 8);
        assert!(di_region_test(&apex, &c8).is_err());
    }

    #[test]
    fn test_di_partition_is_exhaustive_and_disjoint() {
        let mut r = rng::stream(25, "slp-dipart");
        let c = random_constraint(&mut r, 3, 4);
        let quarter = std::f64::consts::FRAC_PI_4;
        for _ in 0..10_000 {
            let x = rayleigh_channel(&mut r, 3);
            let z = c.rotated_rx(&x);
            let got = di_region_test(&x, &c).unwrap();
            // Angle-range oracle with the same boundary closures.
            let expected = if z.re >= z.im.abs() {
                DiRegion::NotDi
            } else {
                let ang = z.im.atan2(z.re);
                if ang.abs() >= 3.0 * quarter {
                    DiRegion::Zone3
                } else if ang > 0.0 {
                    DiRegion::Zone1
                } else {
                    DiRegion::Zone2
                }
            };
            assert_eq!(got, expected, "z {z}");
        }
    }

    #[test]
    fn test_min_power_single_user_closed_form() {
        let mut r = rng::stream(26, "slp-single");
        let c = random_constraint(&mut r, 6, 4);
        let sol = solve_symbol(&[c.clone()], &SlpObjective::MinPower, &SlpExtra::None).unwrap();
        let analytic = apex_vector(&c);
        assert!((&sol.x - &analytic).norm() < 1e-6 * analytic.norm());
        assert!(sol.is_feasible());
    }

    #[test]
    fn test_min_power_orthogonal_users_decouple() {
        // DFT-orthogonal steering channels: per-user solutions just add.
        let array = ArrayGeometry::half_wavelength(8);
        let a1 = array.steering_vector(0.0).unwrap();
        let sin2 = 0.25f64;
        let a2 = array.steering_vector(sin2.asin().to_degrees()).unwrap();
        assert!(a1.dotc(&a2).norm() < 1e-12);
        let mk = |ch: &CVec, phase: f64| {
            CiConstraint::new(ch.clone(), phase, 8.0, 0.05, 4).unwrap()
        };
        let c1 = mk(&a1, 0.3);
        let c2 = mk(&a2, -1.2);
        let joint =
            solve_symbol(&[c1.clone(), c2.clone()], &SlpObjective::MinPower, &SlpExtra::None)
                .unwrap();
        let s1 = solve_symbol(&[c1], &SlpObjective::MinPower, &SlpExtra::None).unwrap();
        let s2 = solve_symbol(&[c2], &SlpObjective::MinPower, &SlpExtra::None).unwrap();
        assert_relative_eq!(
            joint.objective,
            s1.objective + s2.objective,
            max_relative = 1e-9
        );
        assert!((&joint.x - (&s1.x + &s2.x)).norm() < 1e-6);
    }

    #[test]
    fn test_min_power_never_exceeds_zero_forcing() {
        // The ZF symbol vector meets every CI constraint with equality, so
        // it is feasible for the min-power program; optimality does the rest.
        let mut r = rng::stream(27, "slp-vs-zf");
        let n = 8;
        for _ in 0..30 {
            let users: Vec<CommUser> = (0..2)
                .map(|_| CommUser {
                    channel: rayleigh_channel(&mut r, n),
                    sinr_target_db: 10.0,
                    noise_power: 0.02,
                })
                .collect();
            let zf = zf_at_targets(&users, 1e9).unwrap();
            let phases = [0.25f64, -2.0];
            let s = CVec::from_fn(2, |u, _| Complex64::from_polar(1.0, phases[u]));
            let x_zf = &zf.w_comm * &s;
            let constraints: Vec<CiConstraint> = users
                .iter()
                .zip(&phases)
                .map(|(user, &phi)| {
                    CiConstraint::new(
                        user.channel.clone(),
                        phi,
                        user.sinr_target_linear(),
                        user.noise_power,
                        4,
                    )
                    .unwrap()
                })
                .collect();
            for c in &constraints {
                assert!(ci_margin(&x_zf, c).abs() < 1e-9, "ZF point must sit at the apex");
            }
            let sol =
                solve_symbol(&constraints, &SlpObjective::MinPower, &SlpExtra::None).unwrap();
            assert!(sol.is_feasible());
            assert!(sol.objective <= x_zf.norm_squared() * (1.0 + 1e-9));
        }
    }

    #[test]
    fn test_beam_error_objective_improves_pattern_within_budget() {
        let mut r = rng::stream(28, "slp-beam");
        let array = ArrayGeometry::half_wavelength(8);
        let users: Vec<CommUser> = [(-40.0), 35.0]
            .iter()
            .map(|&a| CommUser::line_of_sight(&array, a, 8.0, 0.02).unwrap())
            .collect();
        let desired = DesiredBeampattern::from_mainlobes(&[0.0], 10.0, 1.0).unwrap();
        let constraints: Vec<CiConstraint> = users
            .iter()
            .map(|u| {
                CiConstraint::new(
                    u.channel.clone(),
                    std::f64::consts::FRAC_PI_4,
                    u.sinr_target_linear(),
                    u.noise_power,
                    4,
                )
                .unwrap()
            })
            .collect();
        let budget = 1.0;
        let min_sol =
            solve_symbol(&constraints, &SlpObjective::MinPower, &SlpExtra::None).unwrap();
        assert!(min_sol.objective < budget);
        let work = PatternWork::new(&desired, &array, 8).unwrap();
        let beam = solve_symbol(
            &constraints,
            &SlpObjective::BeamError {
                desired: desired.clone(),
                array: array.clone(),
                power_budget: budget,
            },
            &SlpExtra::None,
        )
        .unwrap();
        assert!(beam.is_feasible());
        assert!(beam.x.norm_squared() <= budget * (1.0 + 1e-6));
        assert!(beam.objective <= work.error(&min_sol.x) + 1e-15);
        let _ = r.random::<f64>();
    }

    #[test]
    fn test_di_on_eve_keeps_eve_out_of_ci() {
        let mut r = rng::stream(29, "slp-eve");
        for _ in 0..10 {
            let users: Vec<CommUser> = (0..2)
                .map(|_| CommUser {
                    channel: rayleigh_channel(&mut r, 8),
                    sinr_target_db: 8.0,
                    noise_power: 0.05,
                })
                .collect();
            let eve = rayleigh_channel(&mut r, 8);
            let phases = [0.0, std::f64::consts::FRAC_PI_2];
            let constraints: Vec<CiConstraint> = users
                .iter()
                .zip(&phases)
                .map(|(u, &phi)| {
                    CiConstraint::new(
                        u.channel.clone(),
                        phi,
                        u.sinr_target_linear(),
                        u.noise_power,
                        4,
                    )
                    .unwrap()
                })
                .collect();
            let sol = solve_symbol(
                &constraints,
                &SlpObjective::MinPower,
                &SlpExtra::DiOnEve { eve_channel: eve.clone() },
            )
            .unwrap();
            assert!(sol.is_feasible());
            for (c, _) in constraints.iter().zip(&users) {
                let eve_view = CiConstraint::new(
                    eve.clone(),
                    c.symbol_phase,
                    c.snr_target,
                    c.noise_power,
                    4,
                )
                .unwrap();
                let region = di_region_test(&sol.x, &eve_view).unwrap();
                assert_ne!(region, DiRegion::NotDi);
                assert!(ci_margin(&sol.x, &eve_view) < 0.0);
            }
        }
    }

    #[test]
    fn test_constant_modulus_projection() {
        let mut r = rng::stream(30, "slp-cm");
        let users: Vec<CommUser> = (0..2)
            .map(|_| CommUser {
                channel: rayleigh_channel(&mut r, 8),
                sinr_target_db: 6.0,
                noise_power: 0.05,
            })
            .collect();
        let constraints: Vec<CiConstraint> = users
            .iter()
            .map(|u| {
                CiConstraint::new(u.channel.clone(), 0.7, u.sinr_target_linear(), u.noise_power, 4)
                    .unwrap()
            })
            .collect();
        let power = 2.0;
        let sol = solve_symbol(
            &constraints,
            &SlpObjective::MinPower,
            &SlpExtra::ConstantModulus { power },
        )
        .unwrap();
        let modulus = (power / 8.0f64).sqrt();
        for k in 0..8 {
            assert_relative_eq!(sol.x[k].norm(), modulus, max_relative = 1e-9);
        }
        if sol.converged {
            assert!(sol.is_feasible());
        }
    }

    #[test]
    fn test_block_run_noiseless_replay_and_empty_stream() {
        let mut r = rng::stream(31, "slp-block");
        let array = ArrayGeometry::half_wavelength(8);
        let users: Vec<CommUser> = [(-30.0), 40.0]
            .iter()
            .map(|&a| CommUser::line_of_sight(&array, a, 10.0, 0.02).unwrap())
            .collect();
        let c = crate::constellation::Constellation::psk(4).unwrap();
        let symbols = CMat::from_fn(2, 16, |_, _| c.sample(&mut r));
        let run = slp_block_run(
            &users,
            &symbols,
            4,
            &SlpObjective::MinPower,
            &SlpExtra::None,
            0,
            &mut r,
        )
        .unwrap();
        assert_eq!(run.solves.len(), 16);
        assert!(run.scatter.iter().all(|row| row.inside_ci));
        assert!(run.avg_power > 0.0);
        assert_eq!(run.ser, 0.0);

        let empty = slp_block_run(
            &users,
            &CMat::zeros(2, 0),
            4,
            &SlpObjective::MinPower,
            &SlpExtra::None,
            10,
            &mut r,
        )
        .unwrap();
        assert!(empty.solves.is_empty());
        assert_eq!(empty.avg_power, 0.0);
        assert_eq!(empty.ser, 0.0);
    }

    #[test]
    fn test_block_run_ser_no_worse_than_zero_forcing() {
        let mut r = rng::stream(32, "slp-ser");
        let array = ArrayGeometry::half_wavelength(8);
        let users: Vec<CommUser> = [(-30.0), 40.0]
            .iter()
            .map(|&a| CommUser::line_of_sight(&array, a, 4.0, 0.12).unwrap())
            .collect();
        let c = crate::constellation::Constellation::psk(4).unwrap();
        let symbols = CMat::from_fn(2, 40, |_, _| c.sample(&mut r));
        let mut slp_rng = rng::stream(99, "slp-ser-noise");
        let run = slp_block_run(
            &users,
            &symbols,
            4,
            &SlpObjective::MinPower,
            &SlpExtra::None,
            50,
            &mut slp_rng,
        )
        .unwrap();
        // Zero-forcing replay with the identical noise stream.
        let zf = zf_at_targets(&users, 1e9).unwrap();
        let mut zf_rng = rng::stream(99, "slp-ser-noise");
        let mut errors = 0usize;
        let mut total = 0usize;
        for slot in 0..40 {
            let s = CVec::from_fn(2, |u, _| symbols[(u, slot)]);
            let x = &zf.w_comm * &s;
            for (u, user) in users.iter().enumerate() {
                let z = user.channel.dotc(&x);
                for _ in 0..50 {
                    let noise =
                        complex_normal(&mut zf_rng) * Complex64::from(user.noise_power.sqrt());
                    if nearest_psk_index(z + noise, 4) != nearest_psk_index(symbols[(u, slot)], 4)
                    {
                        errors += 1;
                    }
                    total += 1;
                }
            }
        }
        let zf_ser = errors as f64 / total as f64;
        assert!(zf_ser > 0.0, "noise level should produce ZF errors");
        assert!(
            run.ser <= zf_ser + 3.0 / total as f64,
            "slp {} vs zf {zf_ser}",
            run.ser
        );
        let f = zf_directions(&users).unwrap();
        let _ = f;
    }

    #[test]
    fn test_scatter_csv_shape() {
        let rows = vec![ScatterRow { symbol_idx: 3, user: 1, re: 0.5, im: -0.25, inside_ci: true }];
        let csv = scatter_to_csv(&rows);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "symbol_idx,user,re,im,inside_ci");
        let data = lines.next().unwrap();
        assert!(data.starts_with("3,1,") && data.ends_with(",1"));
    }
}
