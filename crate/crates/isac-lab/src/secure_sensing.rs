//! Sensing security through ambiguity-function engineering.
//!
//! Subcarrier power allocation shapes the zero-Doppler autocorrelation of an
//! OFDM frame into a comb: full mainlobe plus periodic artificial peaks. A
//! passive eavesdropper running a matched filter sees ghost targets at every
//! comb offset, while the legitimate receiver's reciprocal filter divides the
//! modulation out and stays ghost-free, paying only a noise-amplification
//! cost. The three-way tradeoff (legitimate SNR loss, communication rate,
//! eavesdropper confusion) is explored by exhaustive grid search over the
//! comb parameters.

use num_complex::Complex64;

use crate::constellation::Constellation;
use crate::dft::Dft;
use crate::error::{IsacError, Result};
use crate::io::TradeoffPoint;
use crate::ofdm::{matched_filter, reciprocal_filter, synthesize_echo, OfdmFrame, RangeProfile, SensingSnapshot};
use crate::rng;
use crate::scenario::Target;

/// Relative power floor applied before taking logarithms, so degenerate
/// noiseless ensembles still produce finite sidelobe reports.
const SIDELOBE_FLOOR: f64 = 1e-30;

/// Parameters of the comb-shaped autocorrelation target.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AcfSpec {
    pub n_subcarriers: usize,
    /// Period of the artificial peaks in delay bins; must divide the
    /// subcarrier count.
    pub lambda_period: usize,
    /// Amplitude of each artificial peak; at most the subcarrier count.
    pub peak_amplitude: f64,
}

impl AcfSpec {
    pub fn new(n_subcarriers: usize, lambda_period: usize, peak_amplitude: f64) -> Result<Self> {
        if n_subcarriers == 0 {
            return Err(IsacError::domain("subcarrier count must be positive"));
        }
        if lambda_period == 0 || n_subcarriers % lambda_period != 0 {
            return Err(IsacError::domain(format!(
                "peak period {lambda_period} must divide the subcarrier count {n_subcarriers}"
            )));
        }
        if !(peak_amplitude >= 0.0) || !peak_amplitude.is_finite() {
            return Err(IsacError::domain("peak amplitude must be finite and nonnegative"));
        }
        if peak_amplitude > n_subcarriers as f64 {
            return Err(IsacError::infeasible(format!(
                "peak amplitude {peak_amplitude} needs negative subcarrier power \
                 (limit {n_subcarriers})"
            )));
        }
        Ok(Self { n_subcarriers, lambda_period, peak_amplitude })
    }

    /// Number of artificial peaks `N_s / lambda - 1`.
    pub fn num_ghosts(&self) -> usize {
        self.n_subcarriers / self.lambda_period - 1
    }

    /// Amplitude of each ghost relative to the mainlobe.
    pub fn ghost_ratio(&self) -> f64 {
        self.peak_amplitude / self.n_subcarriers as f64
    }
}

/// Frequency-domain autocorrelation of a frame: the unnormalized inverse DFT
/// of the per-subcarrier power sequence `p_n |s_n|^2`.
pub fn acf(frame: &OfdmFrame) -> Vec<Complex64> {
    let seq: Vec<Complex64> = frame
        .powers()
        .iter()
        .zip(frame.symbols())
        .map(|(&p, s)| Complex64::from(p * s.norm_sqr()))
        .collect();
    Dft::new(seq.len()).inverse(&seq)
}

/// Closed-form subcarrier power allocation whose autocorrelation (under
/// unit-modulus symbols) is exactly the comb: the full mainlobe at bin 0 and
/// amplitude `alpha` at every multiple of the period. Total power is the
/// subcarrier count, matching the flat allocation.
pub fn comb_allocation(spec: &AcfSpec) -> Vec<f64> {
    let n = spec.n_subcarriers;
    let stride = n / spec.lambda_period;
    let ratio = spec.peak_amplitude / n as f64;
    (0..n)
        .map(|i| {
            let on_peak = i % stride == 0;
            1.0 + ratio * (if on_peak { stride as f64 } else { 0.0 } - 1.0)
        })
        .collect()
}

/// Normalized reciprocal-filter SNR loss of an allocation, in dB: the noise
/// amplification `mean(1/q_n)` relative to the flat allocation's value of 1.
/// Infinite when any subcarrier is unpowered.
pub fn snr_loss_db(powers: &[f64]) -> f64 {
    let n = powers.len() as f64;
    let amp: f64 = powers.iter().map(|&q| 1.0 / q).sum::<f64>() / n;
    10.0 * amp.log10()
}

/// Per-subcarrier average communication rate under the allocation,
/// `mean(log2(1 + q_n * snr0))` in bits/s/Hz.
pub fn comm_rate(powers: &[f64], snr0: f64) -> f64 {
    let n = powers.len() as f64;
    powers.iter().map(|&q| (1.0 + q * snr0).log2()).sum::<f64>() / n
}

/// Security outcome of one comb configuration.
#[derive(Clone, Copy, Debug)]
pub struct SecurityReport {
    /// Legitimate receiver's reciprocal-filter SNR loss, dB.
    pub legit_snr_loss_db: f64,
    /// Communication rate under the allocation, bits/s/Hz.
    pub comm_rate: f64,
    /// Eavesdropper's integrated-sidelobe increase over the flat baseline, dB.
    pub eve_isl_margin_db: f64,
    /// Eavesdropper's peak-sidelobe increase over the flat baseline, dB.
    pub eve_psl_margin_db: f64,
}

/// Scenario knobs for the eavesdropper-vs-legitimate comparison.
#[derive(Clone, Debug)]
pub struct EveLegitConfig {
    pub target: Target,
    pub noise_power: f64,
    /// Subcarrier SNR entering the communication-rate metric.
    pub comm_snr: f64,
    /// Ensemble size for the sidelobe statistics.
    pub trials: usize,
    pub seed: u64,
}

/// Comparison outcome: the report plus one representative profile pair from
/// the first ensemble member.
#[derive(Clone, Debug)]
pub struct EveLegitOutcome {
    pub report: SecurityReport,
    /// Matched-filter profile the eavesdropper computes on the comb frame.
    pub eve_profile: RangeProfile,
    /// Reciprocal-filter profile at the legitimate receiver, same frame.
    pub legit_profile: RangeProfile,
}

/// Run the receiver-asymmetry experiment: the eavesdropper matched-filters
/// the comb-allocated frame and absorbs its ghost peaks; the legitimate
/// receiver divides the modulation out and stays ghost-free. Sidelobe
/// margins compare the eavesdropper's view against a flat-allocation
/// baseline on an identical symbol-and-noise ensemble.
pub fn eve_vs_legit(
    spec: &AcfSpec,
    constellation: &Constellation,
    cfg: &EveLegitConfig,
) -> Result<EveLegitOutcome> {
    let n = spec.n_subcarriers;
    if spec.peak_amplitude >= n as f64 {
        return Err(IsacError::domain(
            "legitimate reciprocal filtering needs every subcarrier powered; \
             the peak amplitude must stay below the subcarrier count",
        ));
    }
    if cfg.trials == 0 {
        return Err(IsacError::dimension("at least one ensemble trial required"));
    }
    if cfg.target.delay_bin >= n {
        return Err(IsacError::domain("target delay bin out of range"));
    }
    let comb = comb_allocation(spec);
    let flat = vec![1.0; n];
    let mut isl_comb = 0.0;
    let mut psl_comb = 0.0;
    let mut isl_flat = 0.0;
    let mut psl_flat = 0.0;
    let mut first_pair: Option<(RangeProfile, RangeProfile)> = None;
    for t in 0..cfg.trials {
        let mut draw = rng::stream_indexed(cfg.seed, "af-ensemble", t as u64);
        let symbols: Vec<Complex64> = (0..n).map(|_| constellation.sample(&mut draw)).collect();
        let noise: Vec<Complex64> = (0..n)
            .map(|_| rng::complex_normal(&mut draw) * cfg.noise_power.sqrt())
            .collect();
        let mut eve_first = None;
        for (alloc, isl_acc, psl_acc) in [
            (&comb, &mut isl_comb, &mut psl_comb),
            (&flat, &mut isl_flat, &mut psl_flat),
        ] {
            let frame = OfdmFrame::new(symbols.clone(), alloc.clone())?;
            let clean = synthesize_echo(&frame, &[cfg.target.clone()], 0.0, &mut draw)?;
            let snapshot = SensingSnapshot {
                received: clean
                    .received
                    .iter()
                    .zip(&noise)
                    .map(|(y, w)| y + w)
                    .collect(),
                truth: clean.truth,
                noise_power: cfg.noise_power,
            };
            let profile = matched_filter(&snapshot, &frame)?;
            let (isl, psl) = sidelobe_stats(&profile, cfg.target.delay_bin);
            *isl_acc += isl / cfg.trials as f64;
            *psl_acc += psl / cfg.trials as f64;
            if t == 0 && eve_first.is_none() {
                let legit = reciprocal_filter(&snapshot, &frame)?;
                eve_first = Some((profile, legit));
            }
        }
        if t == 0 {
            first_pair = eve_first;
        }
    }
    let (eve_profile, legit_profile) = first_pair.expect("trials >= 1");
    let db = |x: f64| 10.0 * x.max(SIDELOBE_FLOOR).log10();
    let report = SecurityReport {
        legit_snr_loss_db: snr_loss_db(&comb),
        comm_rate: comm_rate(&comb, cfg.comm_snr),
        eve_isl_margin_db: db(isl_comb) - db(isl_flat),
        eve_psl_margin_db: db(psl_comb) - db(psl_flat),
    };
    Ok(EveLegitOutcome { report, eve_profile, legit_profile })
}

/// Integrated and peak sidelobe power of a profile relative to the bin at
/// `mainlobe`, as linear power ratios.
fn sidelobe_stats(profile: &RangeProfile, mainlobe: usize) -> (f64, f64) {
    let main = profile.bins[mainlobe].norm_sqr().max(SIDELOBE_FLOOR);
    let mut integrated = 0.0;
    let mut peak = 0.0_f64;
    for (i, b) in profile.bins.iter().enumerate() {
        if i != mainlobe {
            let p = b.norm_sqr();
            integrated += p;
            peak = peak.max(p);
        }
    }
    (integrated / main, peak / main)
}

/// One evaluated cell of the comb-parameter grid.
#[derive(Clone, Debug)]
pub struct GridCell {
    pub peak_amplitude: f64,
    pub lambda_period: usize,
    pub report: SecurityReport,
    pub feasible: bool,
}

/// Grid-search outcome: one selected point per priority weight plus the full
/// per-cell diagnostics.
#[derive(Clone, Debug)]
pub struct SecuritySweep {
    pub points: Vec<TradeoffPoint>,
    pub grid: Vec<GridCell>,
}

/// Sweep configuration: the scenario shared by every cell and the sidelobe
/// thresholds that define feasibility.
#[derive(Clone, Debug)]
pub struct SecuritySweepConfig {
    pub n_subcarriers: usize,
    pub target: Target,
    pub noise_power: f64,
    pub comm_snr: f64,
    pub trials: usize,
    /// Required eavesdropper integrated-sidelobe margin, dB.
    pub isl_threshold_db: f64,
    /// Required eavesdropper peak-sidelobe margin, dB.
    pub psl_threshold_db: f64,
    pub seed: u64,
}

/// For each priority weight `rho`, pick the comb parameters maximizing
/// `rho * rate - (1 - rho) * snr_loss` among cells whose eavesdropper
/// sidelobe margins meet both thresholds. Weights with an empty feasible set
/// produce a row flagged unconverged with NaN metrics.
pub fn sweep_security_tradeoff(
    cfg: &SecuritySweepConfig,
    constellation: &Constellation,
    rho_grid: &[f64],
    alpha_grid: &[f64],
    lambda_grid: &[usize],
) -> Result<SecuritySweep> {
    if rho_grid.is_empty() || alpha_grid.is_empty() || lambda_grid.is_empty() {
        return Err(IsacError::dimension("all sweep grids must be nonempty"));
    }
    let mut grid = Vec::with_capacity(alpha_grid.len() * lambda_grid.len());
    for (idx, (&alpha, &lambda)) in alpha_grid
        .iter()
        .flat_map(|a| lambda_grid.iter().map(move |l| (a, l)))
        .enumerate()
    {
        let spec = AcfSpec::new(cfg.n_subcarriers, lambda, alpha)?;
        let outcome = eve_vs_legit(
            &spec,
            constellation,
            &EveLegitConfig {
                target: cfg.target.clone(),
                noise_power: cfg.noise_power,
                comm_snr: cfg.comm_snr,
                trials: cfg.trials,
                seed: cfg.seed.wrapping_add(idx as u64),
            },
        )?;
        let feasible = outcome.report.eve_isl_margin_db >= cfg.isl_threshold_db
            && outcome.report.eve_psl_margin_db >= cfg.psl_threshold_db;
        grid.push(GridCell {
            peak_amplitude: alpha,
            lambda_period: lambda,
            report: outcome.report,
            feasible,
        });
    }
    let mut points = Vec::with_capacity(rho_grid.len());
    for &rho in rho_grid {
        if !(0.0..=1.0).contains(&rho) {
            return Err(IsacError::domain(format!("priority weight {rho} outside [0, 1]")));
        }
        let best = grid
            .iter()
            .filter(|c| c.feasible)
            .max_by(|a, b| {
                let score = |c: &GridCell| {
                    rho * c.report.comm_rate - (1.0 - rho) * c.report.legit_snr_loss_db
                };
                score(a)
                    .total_cmp(&score(b))
                    // Deterministic tie-breaks: cheaper loss, then smaller peak.
                    .then(b.report.legit_snr_loss_db.total_cmp(&a.report.legit_snr_loss_db))
                    .then(b.peak_amplitude.total_cmp(&a.peak_amplitude))
            });
        points.push(match best {
            Some(c) => TradeoffPoint {
                rho,
                comm_metric: c.report.comm_rate,
                sensing_metric: c.report.legit_snr_loss_db,
                security_metric: Some(c.report.eve_psl_margin_db),
                iterations: grid.len(),
                converged: true,
            },
            None => TradeoffPoint {
                rho,
                comm_metric: f64::NAN,
                sensing_metric: f64::NAN,
                security_metric: None,
                iterations: grid.len(),
                converged: false,
            },
        });
    }
    Ok(SecuritySweep { points, grid })
}
