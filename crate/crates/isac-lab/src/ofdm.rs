//! OFDM sensing frames, echo synthesis, and range processing.
//!
//! The sensing link is modeled per subcarrier: a frame of data symbols
//! `x_n = sqrt(p_n) s_n` illuminates targets at integer range bins, and the
//! received frequency-domain snapshot is
//!
//! `y_n = sum_k alpha_k exp(-j 2 pi n d_k / N) x_n + z_n`.
//!
//! Range profiles are unnormalized inverse DFTs, so a unit target under a
//! unit-modulus frame peaks at exactly `N * alpha`. Three receivers are
//! provided: the matched filter (multiply by `conj(x)`), whose data-dependent
//! sidelobe floor is set by the constellation fourth moment; the reciprocal
//! filter (divide by `x`), whose noise amplification is set by the inverse
//! second moment; and a per-subcarrier LMMSE weight that interpolates
//! between the two as the assumed prior signal power sweeps 0 to infinity.

use num_complex::Complex64;
use rand::Rng;

use crate::constellation::Constellation;
use crate::dft::Dft;
use crate::error::{IsacError, Result};
use crate::rng;
use crate::scenario::Target;

/// One OFDM symbol block: data symbols plus a per-subcarrier power allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct OfdmFrame {
    symbols: Vec<Complex64>,
    powers: Vec<f64>,
}

impl OfdmFrame {
    /// Frame with an explicit power allocation; `mean(powers)` must be 1.
    pub fn new(symbols: Vec<Complex64>, powers: Vec<f64>) -> Result<Self> {
        if symbols.is_empty() {
            return Err(IsacError::domain("frame must carry at least one subcarrier"));
        }
        if symbols.len() != powers.len() {
            return Err(IsacError::dimension(format!(
                "{} symbols vs {} power entries",
                symbols.len(),
                powers.len()
            )));
        }
        if powers.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(IsacError::domain("subcarrier powers must be finite and nonnegative"));
        }
        let mean: f64 = powers.iter().sum::<f64>() / powers.len() as f64;
        if (mean - 1.0).abs() > 1e-9 {
            return Err(IsacError::domain(format!(
                "power allocation must average to 1, got {mean}"
            )));
        }
        Ok(OfdmFrame { symbols, powers })
    }

    /// Frame with the flat (all-ones) allocation.
    pub fn flat(symbols: Vec<Complex64>) -> Result<Self> {
        let n = symbols.len();
        OfdmFrame::new(symbols, vec![1.0; n])
    }

    /// Draw `n` i.i.d. symbols from `c` under the flat allocation.
    pub fn random(c: &Constellation, n: usize, rng: &mut impl Rng) -> Result<Self> {
        OfdmFrame::flat((0..n).map(|_| c.sample(rng)).collect())
    }

    /// Draw `n` i.i.d. symbols from `c` under an explicit allocation.
    pub fn random_with_powers(c: &Constellation, powers: Vec<f64>, rng: &mut impl Rng) -> Result<Self> {
        let symbols = (0..powers.len()).map(|_| c.sample(rng)).collect();
        OfdmFrame::new(symbols, powers)
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[Complex64] {
        &self.symbols
    }

    pub fn powers(&self) -> &[f64] {
        &self.powers
    }

    /// Transmitted subcarrier samples `x_n = sqrt(p_n) s_n`.
    pub fn samples(&self) -> Vec<Complex64> {
        self.symbols
            .iter()
            .zip(&self.powers)
            .map(|(s, p)| s * p.sqrt())
            .collect()
    }
}

/// Received frequency-domain snapshot with the ground truth that produced it.
#[derive(Debug, Clone)]
pub struct SensingSnapshot {
    pub received: Vec<Complex64>,
    pub truth: Vec<Target>,
    pub noise_power: f64,
}

/// Simulate the echo of `frame` from `targets` plus CN(0, noise_power) noise.
pub fn synthesize_echo(
    frame: &OfdmFrame,
    targets: &[Target],
    noise_power: f64,
    rng: &mut impl Rng,
) -> Result<SensingSnapshot> {
    if !(noise_power >= 0.0) || !noise_power.is_finite() {
        return Err(IsacError::domain("noise power must be finite and nonnegative"));
    }
    let n = frame.len();
    for (k, t) in targets.iter().enumerate() {
        if t.delay_bin >= n {
            return Err(IsacError::domain(format!(
                "target {k} delay bin {} out of range for {n} subcarriers",
                t.delay_bin
            )));
        }
    }
    let x = frame.samples();
    let mut received = vec![Complex64::new(0.0, 0.0); n];
    for t in targets {
        let amp = t.amplitude();
        let step = -std::f64::consts::TAU * t.delay_bin as f64 / n as f64;
        for (i, y) in received.iter_mut().enumerate() {
            *y += amp * Complex64::from_polar(1.0, step * i as f64) * x[i];
        }
    }
    if noise_power > 0.0 {
        let scale = noise_power.sqrt();
        for y in received.iter_mut() {
            *y += rng::complex_normal(rng) * scale;
        }
    }
    Ok(SensingSnapshot {
        received,
        truth: targets.to_vec(),
        noise_power,
    })
}

/// Complex range profile over the bin axis.
#[derive(Debug, Clone)]
pub struct RangeProfile {
    pub bins: Vec<Complex64>,
}

impl RangeProfile {
    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    /// Bin index with the largest magnitude.
    pub fn peak_bin(&self) -> usize {
        let mut best = 0;
        let mut best_mag = -1.0;
        for (i, b) in self.bins.iter().enumerate() {
            let mag = b.norm();
            if mag > best_mag {
                best_mag = mag;
                best = i;
            }
        }
        best
    }

    /// Largest magnitude outside `exclude`, relative to the peak, in dB.
    pub fn peak_sidelobe_db(&self, exclude: &[usize]) -> f64 {
        let peak = self.bins[self.peak_bin()].norm();
        let mut worst: f64 = 0.0;
        for (i, b) in self.bins.iter().enumerate() {
            if !exclude.contains(&i) {
                worst = worst.max(b.norm());
            }
        }
        20.0 * (worst / peak).log10()
    }

    /// CSV with header `bin,re,im,abs_db`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin,re,im,abs_db\n");
        for (i, b) in self.bins.iter().enumerate() {
            let abs_db = 20.0 * b.norm().log10();
            out.push_str(&format!("{i},{:.17e},{:.17e},{:.6}\n", b.re, b.im, abs_db));
        }
        out
    }
}

fn check_lengths(snapshot: &SensingSnapshot, frame: &OfdmFrame) -> Result<usize> {
    if snapshot.received.len() != frame.len() {
        return Err(IsacError::dimension(format!(
            "snapshot has {} subcarriers, frame has {}",
            snapshot.received.len(),
            frame.len()
        )));
    }
    Ok(frame.len())
}

/// Matched-filter range profile: inverse DFT of `y .* conj(x)`.
pub fn matched_filter(snapshot: &SensingSnapshot, frame: &OfdmFrame) -> Result<RangeProfile> {
    let n = check_lengths(snapshot, frame)?;
    let x = frame.samples();
    let prod: Vec<Complex64> = snapshot
        .received
        .iter()
        .zip(&x)
        .map(|(y, xn)| y * xn.conj())
        .collect();
    Ok(RangeProfile {
        bins: Dft::new(n).inverse(&prod),
    })
}

/// Reciprocal-filter range profile: inverse DFT of `y ./ x`.
///
/// Exactly data-independent (the signal part of every bin is free of symbol
/// modulation) at the price of noise amplification `E|s|^-2`.
pub fn reciprocal_filter(snapshot: &SensingSnapshot, frame: &OfdmFrame) -> Result<RangeProfile> {
    let n = check_lengths(snapshot, frame)?;
    let x = frame.samples();
    if x.iter().any(|xn| xn.norm_sqr() == 0.0) {
        return Err(IsacError::domain(
            "reciprocal filter undefined: frame contains a zero subcarrier sample",
        ));
    }
    let quot: Vec<Complex64> = snapshot
        .received
        .iter()
        .zip(&x)
        .map(|(y, xn)| y / xn)
        .collect();
    Ok(RangeProfile {
        bins: Dft::new(n).inverse(&quot),
    })
}

/// LMMSE range profile with per-subcarrier weight
/// `conj(x_n) / (|x_n|^2 + noise_power / prior_signal_power)`.
///
/// `prior_signal_power -> 0` recovers the matched filter up to scale;
/// `prior_signal_power = inf` recovers the reciprocal filter exactly.
pub fn lmmse_filter(
    snapshot: &SensingSnapshot,
    frame: &OfdmFrame,
    prior_signal_power: f64,
) -> Result<RangeProfile> {
    let n = check_lengths(snapshot, frame)?;
    if !(prior_signal_power > 0.0) {
        return Err(IsacError::domain(format!(
            "prior signal power must be positive, got {prior_signal_power}"
        )));
    }
    let sigma_eff = if prior_signal_power.is_infinite() {
        0.0
    } else {
        snapshot.noise_power / prior_signal_power
    };
    let x = frame.samples();
    if sigma_eff == 0.0 && x.iter().any(|xn| xn.norm_sqr() == 0.0) {
        return Err(IsacError::domain(
            "LMMSE at infinite prior reduces to the reciprocal filter, undefined on zero samples",
        ));
    }
    let weighted: Vec<Complex64> = snapshot
        .received
        .iter()
        .zip(&x)
        .map(|(y, xn)| y * xn.conj() / (xn.norm_sqr() + sigma_eff))
        .collect();
    Ok(RangeProfile {
        bins: Dft::new(n).inverse(&weighted),
    })
}

/// Closed-form matched-filter output SINR for target `k` among `targets`,
/// under i.i.d. unit-power symbols on `n` subcarriers:
/// `n |a_k|^2 / ((mu4 - 1) sum_{j != k} |a_j|^2 + noise_power)`.
pub fn predict_mf_sinr(
    c: &Constellation,
    targets: &[Target],
    k: usize,
    noise_power: f64,
    n: usize,
) -> Result<f64> {
    if k >= targets.len() {
        return Err(IsacError::domain(format!("target index {k} out of range")));
    }
    let mu4 = c.kurtosis();
    let own = targets[k].amplitude().norm_sqr();
    let others: f64 = targets
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != k)
        .map(|(_, t)| t.amplitude().norm_sqr())
        .sum();
    Ok(n as f64 * own / ((mu4 - 1.0) * others + noise_power))
}

/// Closed-form reciprocal-filter output SNR for a target of amplitude
/// `amplitude` under i.i.d. unit-power symbols:
/// `n |a|^2 / (nu * noise_power)` with `nu = E|s|^-2`.
pub fn predict_rf_snr(c: &Constellation, amplitude: Complex64, noise_power: f64, n: usize) -> Result<f64> {
    let nu = c.inverse_second_moment()?;
    Ok(n as f64 * amplitude.norm_sqr() / (nu * noise_power))
}

/// Which range receiver a Monte Carlo measurement exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReceiverKind {
    Matched,
    Reciprocal,
}

/// Measured vs predicted output SINR at a target's true bin.
#[derive(Debug, Clone)]
pub struct SinrMeasurement {
    pub receiver: ReceiverKind,
    pub measured_db: f64,
    pub predicted_db: f64,
    pub frames: usize,
}

/// Monte Carlo estimate of the output SINR at target `k`'s true bin.
///
/// The deterministic signal component is removed exactly per frame (the
/// simulator knows the drawn symbols), so the residual power estimates the
/// interference-plus-noise term of the closed-form prediction.
pub fn measure_output_sinr(
    receiver: ReceiverKind,
    c: &Constellation,
    targets: &[Target],
    k: usize,
    noise_power: f64,
    n: usize,
    frames: usize,
    rng: &mut impl Rng,
) -> Result<SinrMeasurement> {
    if k >= targets.len() {
        return Err(IsacError::domain(format!("target index {k} out of range")));
    }
    if frames == 0 {
        return Err(IsacError::domain("need at least one frame"));
    }
    let amp_k = targets[k].amplitude();
    let bin = targets[k].delay_bin;
    let mut residual_power = 0.0;
    for _ in 0..frames {
        let frame = OfdmFrame::random(c, n, rng)?;
        let snapshot = synthesize_echo(&frame, targets, noise_power, rng)?;
        let (profile, signal_term) = match receiver {
            ReceiverKind::Matched => {
                let profile = matched_filter(&snapshot, &frame)?;
                // Self term at the true bin is alpha_k * sum |x_n|^2.
                let energy: f64 = frame.samples().iter().map(|x| x.norm_sqr()).sum();
                (profile, amp_k * energy)
            }
            ReceiverKind::Reciprocal => {
                let profile = reciprocal_filter(&snapshot, &frame)?;
                (profile, amp_k * n as f64)
            }
        };
        residual_power += (profile.bins[bin] - signal_term).norm_sqr();
    }
    residual_power /= frames as f64;
    let signal_power = (n as f64 * amp_k.norm()).powi(2);
    let measured = signal_power / residual_power;
    let predicted = match receiver {
        ReceiverKind::Matched => predict_mf_sinr(c, targets, k, noise_power, n)?,
        ReceiverKind::Reciprocal => predict_rf_snr(c, amp_k, noise_power, n)?,
    };
    Ok(SinrMeasurement {
        receiver,
        measured_db: 10.0 * measured.log10(),
        predicted_db: 10.0 * predicted.log10(),
        frames,
    })
}

/// SEFDM modulator: `X_k = (1/sqrt(Q)) sum_n s_n exp(j 2 pi n k alpha / Q)`
/// for `k = 0..Q-1`, `Q = kappa * N`. `alpha = 1` reduces to (oversampled)
/// OFDM; `alpha < 1` packs subcarriers closer than orthogonal spacing.
pub fn generate_sefdm(symbols: &[Complex64], alpha: f64, kappa: usize) -> Result<Vec<Complex64>> {
    if symbols.is_empty() {
        return Err(IsacError::domain("SEFDM needs at least one symbol"));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(IsacError::domain(format!(
            "compression factor must lie in (0, 1], got {alpha}"
        )));
    }
    if kappa == 0 {
        return Err(IsacError::domain("oversampling factor must be at least 1"));
    }
    let n = symbols.len();
    let q = kappa * n;
    let scale = 1.0 / (q as f64).sqrt();
    Ok((0..q)
        .map(|k| {
            symbols
                .iter()
                .enumerate()
                .map(|(m, s)| {
                    s * Complex64::from_polar(
                        1.0,
                        std::f64::consts::TAU * (m as f64) * (k as f64) * alpha / q as f64,
                    )
                })
                .sum::<Complex64>()
                * scale
        })
        .collect())
}

/// Matched SEFDM demodulator: least-squares inversion of the SEFDM basis.
///
/// Exact on noiseless input for any `alpha` in (0, 1] because the compressed
/// basis keeps full column rank.
pub fn demodulate_sefdm(samples: &[Complex64], n_symbols: usize, alpha: f64, kappa: usize) -> Result<Vec<Complex64>> {
    use crate::linalg::{solve, CMat, CVec};
    let q = kappa * n_symbols;
    if samples.len() != q {
        return Err(IsacError::dimension(format!(
            "expected {q} samples for {n_symbols} symbols at oversampling {kappa}, got {}",
            samples.len()
        )));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(IsacError::domain(format!(
            "compression factor must lie in (0, 1], got {alpha}"
        )));
    }
    let scale = 1.0 / (q as f64).sqrt();
    let basis = CMat::from_fn(q, n_symbols, |k, m| {
        Complex64::from_polar(
            scale,
            std::f64::consts::TAU * (m as f64) * (k as f64) * alpha / q as f64,
        )
    });
    let y = CVec::from_column_slice(samples);
    // Normal equations are well conditioned at desk scale (N <= a few hundred).
    let gram = basis.adjoint() * &basis;
    let rhs = basis.adjoint() * y;
    let sol = solve(&gram, &rhs)?;
    Ok(sol.iter().copied().collect())
}

/// Orthogonal-grid demodulator applied regardless of the true compression:
/// correlates against the `alpha = 1` basis. Exact only at `alpha = 1`; for
/// `alpha < 1` the inter-carrier interference shows up as EVM.
pub fn demodulate_ofdm_naive(samples: &[Complex64], n_symbols: usize, kappa: usize) -> Result<Vec<Complex64>> {
    let q = kappa * n_symbols;
    if samples.len() != q {
        return Err(IsacError::dimension(format!(
            "expected {q} samples for {n_symbols} symbols at oversampling {kappa}, got {}",
            samples.len()
        )));
    }
    let scale = 1.0 / (q as f64).sqrt();
    Ok((0..n_symbols)
        .map(|m| {
            samples
                .iter()
                .enumerate()
                .map(|(k, x)| {
                    x * Complex64::from_polar(
                        scale,
                        -std::f64::consts::TAU * (m as f64) * (k as f64) / q as f64,
                    )
                })
                .sum::<Complex64>()
        })
        .collect())
}

/// Error vector magnitude of `estimate` against `reference`, as a power ratio.
pub fn evm(estimate: &[Complex64], reference: &[Complex64]) -> Result<f64> {
    if estimate.len() != reference.len() {
        return Err(IsacError::dimension(format!(
            "EVM over {} estimates vs {} references",
            estimate.len(),
            reference.len()
        )));
    }
    let err: f64 = estimate
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum();
    let total: f64 = reference.iter().map(|b| b.norm_sqr()).sum();
    Ok((err / total).sqrt())
}
