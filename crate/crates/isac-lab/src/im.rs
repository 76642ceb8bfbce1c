//! Radar-centric index modulation by antenna selection.
//!
//! Each pulse activates a subset of the transmit array; the identity of the
//! subset carries `log2(count)` bits on top of an optional phase symbol.
//! The communication receiver estimates the active steering vector by an
//! exhaustive scan over the dictionary. Index detection projects the
//! received vector on each candidate, which makes it invariant to the
//! unknown phase symbol; the phase is then re-estimated by least squares on
//! the winning candidate (two-stage). A joint search over index and symbol
//! serves as the maximum-likelihood reference.

use num_complex::Complex64;
use rand::RngExt;

use crate::constellation::Constellation;
use crate::error::{IsacError, Result};
use crate::linalg::CVec;
use crate::rng;

/// Antenna-selection dictionary: distinct binary masks with a common number
/// of active elements.
#[derive(Clone, Debug)]
pub struct ImDictionary {
    selection_masks: Vec<Vec<bool>>,
    /// Bits conveyed by the subset choice, `floor(log2(count))`; the mask
    /// count is kept at exactly `2^bits_per_index`.
    pub bits_per_index: usize,
}

impl ImDictionary {
    pub fn new(selection_masks: Vec<Vec<bool>>) -> Result<Self> {
        if selection_masks.len() < 2 {
            return Err(IsacError::domain("dictionary needs at least two masks"));
        }
        let n = selection_masks[0].len();
        let active = selection_masks[0].iter().filter(|&&b| b).count();
        if active == 0 {
            return Err(IsacError::domain("masks must activate at least one antenna"));
        }
        for (i, m) in selection_masks.iter().enumerate() {
            if m.len() != n {
                return Err(IsacError::dimension(format!("mask {i} has length {}", m.len())));
            }
            if m.iter().filter(|&&b| b).count() != active {
                return Err(IsacError::domain(format!(
                    "mask {i} does not activate exactly {active} antennas"
                )));
            }
        }
        let mut sorted = selection_masks.clone();
        sorted.sort();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(IsacError::domain("dictionary masks must be distinct"));
        }
        let bits = selection_masks.len().ilog2() as usize;
        if selection_masks.len() != 1 << bits {
            return Err(IsacError::domain(format!(
                "mask count {} is not a power of two",
                selection_masks.len()
            )));
        }
        Ok(ImDictionary { selection_masks, bits_per_index: bits })
    }

    /// The lexicographically first masks choosing `n_active` of `n_tx`
    /// antennas, truncated to the largest power of two the binomial count
    /// allows.
    pub fn lexicographic(n_tx: usize, n_active: usize) -> Result<Self> {
        if n_active == 0 || n_active > n_tx {
            return Err(IsacError::domain(format!(
                "cannot activate {n_active} of {n_tx} antennas"
            )));
        }
        let total = binomial(n_tx, n_active);
        if total < 2 {
            return Err(IsacError::domain(
                "selection admits fewer than two masks; no index bits available",
            ));
        }
        let keep = 1usize << total.ilog2();
        let mut masks = Vec::with_capacity(keep);
        let mut choice: Vec<usize> = (0..n_active).collect();
        loop {
            let mut mask = vec![false; n_tx];
            for &c in &choice {
                mask[c] = true;
            }
            masks.push(mask);
            if masks.len() == keep {
                break;
            }
            // Advance to the next combination in lexicographic order.
            let mut i = n_active;
            loop {
                i -= 1;
                if choice[i] != i + n_tx - n_active {
                    break;
                }
            }
            choice[i] += 1;
            for j in i + 1..n_active {
                choice[j] = choice[j - 1] + 1;
            }
        }
        ImDictionary::new(masks)
    }

    pub fn len(&self) -> usize {
        self.selection_masks.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn num_antennas(&self) -> usize {
        self.selection_masks[0].len()
    }

    pub fn num_active(&self) -> usize {
        self.selection_masks[0].iter().filter(|&&b| b).count()
    }

    pub fn mask(&self, index: usize) -> Result<&[bool]> {
        self.selection_masks
            .get(index)
            .map(Vec::as_slice)
            .ok_or_else(|| IsacError::domain(format!("index {index} outside dictionary")))
    }

    /// Masked steering vector `Phi_i a(theta)`.
    pub fn masked_steering(&self, index: usize, steering: &CVec) -> Result<CVec> {
        let mask = self.mask(index)?;
        if steering.len() != mask.len() {
            return Err(IsacError::dimension(format!(
                "steering length {} vs mask length {}",
                steering.len(),
                mask.len()
            )));
        }
        Ok(CVec::from_fn(mask.len(), |i, _| {
            if mask[i] { steering[i] } else { Complex64::new(0.0, 0.0) }
        }))
    }
}

fn binomial(n: usize, k: usize) -> usize {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc.min(usize::MAX as u128) as usize
}

/// Transmit vector for one pulse: the masked steering vector scaled by the
/// phase symbol.
pub fn im_transmit(
    dict: &ImDictionary,
    index: usize,
    phase_symbol: Complex64,
    steering: &CVec,
) -> Result<CVec> {
    Ok(dict.masked_steering(index, steering)? * phase_symbol)
}

/// Two-stage detection: pick the dictionary entry whose span best explains
/// the scaled observation, then least-squares the phase symbol on the
/// winner. The index decision maximizes `|a_i^H y|^2 / ||a_i||^2`, the
/// residual-minimizing choice for an unknown symbol.
pub fn im_detect(
    y: &CVec,
    dict: &ImDictionary,
    steering: &CVec,
    alpha: Complex64,
) -> Result<(usize, Complex64)> {
    if alpha.norm_sqr() == 0.0 {
        return Err(IsacError::domain("scaling factor must be nonzero"));
    }
    let z = y / alpha;
    let mut best = 0;
    let mut best_metric = f64::NEG_INFINITY;
    for i in 0..dict.len() {
        let a = dict.masked_steering(i, steering)?;
        let metric = a.dotc(&z).norm_sqr() / a.norm_squared();
        if metric > best_metric {
            best_metric = metric;
            best = i;
        }
    }
    let a = dict.masked_steering(best, steering)?;
    let phase = a.dotc(&z) / Complex64::from(a.norm_squared());
    Ok((best, phase))
}

/// Joint maximum-likelihood search over (index, constellation symbol):
/// minimizes `||y/alpha - a_i s_m||` by brute force. Reference oracle for
/// measuring the two-stage detector's loss.
pub fn joint_ml_detect(
    y: &CVec,
    dict: &ImDictionary,
    steering: &CVec,
    alpha: Complex64,
    c: &Constellation,
) -> Result<(usize, usize)> {
    if alpha.norm_sqr() == 0.0 {
        return Err(IsacError::domain("scaling factor must be nonzero"));
    }
    let z = y / alpha;
    let mut best = (0, 0);
    let mut best_cost = f64::INFINITY;
    for i in 0..dict.len() {
        let a = dict.masked_steering(i, steering)?;
        for (m, &s) in c.points().iter().enumerate() {
            let cost = (&z - &a * s).norm_squared();
            if cost < best_cost {
                best_cost = cost;
                best = (i, m);
            }
        }
    }
    Ok(best)
}

/// Which receiver runs in the error-rate harness.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ImDetector {
    TwoStage,
    JointMl,
}

/// One row of the error-rate curve.
#[derive(Clone, Copy, Debug)]
pub struct ImBerPoint {
    pub snr_db: f64,
    pub index_error_rate: f64,
    pub symbol_error_rate: f64,
}

/// Monte-Carlo error rates over an SNR grid. SNR is total received signal
/// energy over total noise energy, `|alpha|^2 N_a / (N_t sigma^2)` for
/// unit-power symbols. One set of message and noise draws is shared across
/// the whole grid (and across detector choices at equal seed), so curves
/// are paired and the two-stage loss is measured on common randomness.
pub fn im_ber_curve(
    dict: &ImDictionary,
    steering: &CVec,
    c: &Constellation,
    alpha: Complex64,
    snr_db_grid: &[f64],
    trials: usize,
    detector: ImDetector,
    seed: u64,
) -> Result<Vec<ImBerPoint>> {
    if trials == 0 {
        return Err(IsacError::domain("at least one trial required"));
    }
    if alpha.norm_sqr() == 0.0 {
        return Err(IsacError::domain("scaling factor must be nonzero"));
    }
    let n_tx = dict.num_antennas();
    let signal_energy = alpha.norm_sqr() * dict.num_active() as f64;
    let mut draws = Vec::with_capacity(trials);
    for t in 0..trials {
        let mut r = rng::stream_indexed(seed, "im-trial", t as u64);
        let index = r.random_range(0..dict.len());
        let symbol = c.sample_index(&mut r);
        let noise: Vec<Complex64> = (0..n_tx).map(|_| rng::complex_normal(&mut r)).collect();
        draws.push((index, symbol, noise));
    }
    let mut out = Vec::with_capacity(snr_db_grid.len());
    for &snr_db in snr_db_grid {
        let sigma = if snr_db == f64::INFINITY {
            0.0
        } else {
            (signal_energy / (n_tx as f64 * 10.0_f64.powf(snr_db / 10.0))).sqrt()
        };
        let mut index_errors = 0usize;
        let mut symbol_errors = 0usize;
        for (index, symbol, noise) in &draws {
            let x = im_transmit(dict, *index, c.points()[*symbol], steering)?;
            let y = CVec::from_fn(n_tx, |i, _| alpha * x[i] + sigma * noise[i]);
            let (i_hat, m_hat) = match detector {
                ImDetector::TwoStage => {
                    let (i_hat, phase) = im_detect(&y, dict, steering, alpha)?;
                    (i_hat, c.nearest(phase))
                }
                ImDetector::JointMl => joint_ml_detect(&y, dict, steering, alpha, c)?,
            };
            if i_hat != *index {
                index_errors += 1;
            }
            if m_hat != *symbol {
                symbol_errors += 1;
            }
        }
        out.push(ImBerPoint {
            snr_db,
            index_error_rate: index_errors as f64 / trials as f64,
            symbol_error_rate: symbol_errors as f64 / trials as f64,
        });
    }
    Ok(out)
}

/// Render the curve as `snr_db,index_error_rate,symbol_error_rate`.
pub fn im_ber_to_csv(points: &[ImBerPoint]) -> String {
    let mut out = String::from("snr_db,index_error_rate,symbol_error_rate\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{}\n",
            p.snr_db, p.index_error_rate, p.symbol_error_rate
        ));
    }
    out
}

/// SNR (dB) at which the index error rate crosses `target`, by log-linear
/// interpolation between the bracketing grid points. None when the curve
/// never crosses.
pub fn snr_at_ier(points: &[ImBerPoint], target: f64) -> Option<f64> {
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a.index_error_rate >= target && b.index_error_rate <= target {
            if a.index_error_rate == b.index_error_rate {
                return Some(a.snr_db);
            }
            let (la, lb) = (a.index_error_rate.max(1e-12).log10(), b.index_error_rate.max(1e-12).log10());
            let f = (target.log10() - la) / (lb - la);
            return Some(a.snr_db + f * (b.snr_db - a.snr_db));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::scenario::ArrayGeometry;
    use approx::assert_relative_eq;

    fn steering(n: usize, angle: f64) -> CVec {
        ArrayGeometry::half_wavelength(n).steering_vector(angle).unwrap()
    }

    #[test]
    fn test_lexicographic_dictionary_shape() {
        // 8 choose 4 = 70 masks, truncated to 64 = 2^6.
        let dict = ImDictionary::lexicographic(8, 4).unwrap();
        assert_eq!(dict.len(), 64);
        assert_eq!(dict.bits_per_index, 6);
        assert_eq!(dict.num_active(), 4);
        assert_eq!(dict.mask(0).unwrap(), &[true, true, true, true, false, false, false, false]);
        assert_eq!(dict.mask(1).unwrap(), &[true, true, true, false, true, false, false, false]);
        // 4 choose 2 = 6 masks, truncated to 4.
        let small = ImDictionary::lexicographic(4, 2).unwrap();
        assert_eq!(small.len(), 4);
        assert_eq!(small.bits_per_index, 2);
        assert!(ImDictionary::lexicographic(3, 3).is_err());
        assert!(ImDictionary::lexicographic(4, 0).is_err());
    }

    #[test]
    fn test_transmit_energy_and_injectivity() {
        let dict = ImDictionary::lexicographic(6, 3).unwrap();
        let a = steering(6, 25.0);
        let s = Complex64::from_polar(1.0, 1.1);
        let mut seen = Vec::new();
        for i in 0..dict.len() {
            let x = im_transmit(&dict, i, s, &a).unwrap();
            assert_relative_eq!(x.norm_squared(), 3.0 * s.norm_sqr(), max_relative = 1e-12);
            for prev in &seen {
                let d: &CVec = prev;
                assert!((d - &x).norm() > 1e-9, "transmit vectors collide");
            }
            seen.push(x);
        }
        assert!(im_transmit(&dict, dict.len(), s, &a).is_err());

        // All-ones mask reproduces the plain steering vector.
        let full = ImDictionary::new(vec![vec![true; 4], vec![true, true, true, false]]);
        assert!(full.is_err(), "unequal active counts must be rejected");
    }

    #[test]
    fn test_noiseless_detection_exact_any_phase() {
        let dict = ImDictionary::lexicographic(8, 4).unwrap();
        let a = steering(8, -15.0);
        let c = Constellation::psk(4).unwrap();
        let alpha = Complex64::new(0.4, -0.2);
        for index in [0, 13, 37, 63] {
            for (m, &s) in c.points().iter().enumerate() {
                let y = im_transmit(&dict, index, s, &a).unwrap() * alpha;
                let (i_hat, phase) = im_detect(&y, &dict, &a, alpha).unwrap();
                assert_eq!(i_hat, index);
                assert!((phase - s).norm() < 1e-10);
                assert_eq!(c.nearest(phase), m);
                let (ji, jm) = joint_ml_detect(&y, &dict, &a, alpha, &c).unwrap();
                assert_eq!((ji, jm), (index, m));
            }
        }
    }

    #[test]
    fn test_detector_matches_brute_force_scan() {
        // The projection metric must agree with an independent per-candidate
        // least-squares residual scan, including under noise.
        let dict = ImDictionary::lexicographic(6, 2).unwrap();
        let a = steering(6, 40.0);
        let alpha = Complex64::new(1.0, 0.3);
        let mut r = rng::stream(91, "im-scan");
        for _ in 0..50 {
            let y = CVec::from_fn(6, |_, _| rng::complex_normal(&mut r));
            let (i_hat, _) = im_detect(&y, &dict, &a, alpha).unwrap();
            let z = &y / alpha;
            let mut best = 0;
            let mut best_res = f64::INFINITY;
            for i in 0..dict.len() {
                let ai = dict.masked_steering(i, &a).unwrap();
                let s_ls = ai.dotc(&z) / Complex64::from(ai.norm_squared());
                let res = (&z - ai * s_ls).norm_squared();
                if res < best_res {
                    best_res = res;
                    best = i;
                }
            }
            assert_eq!(i_hat, best);
        }
    }

    #[test]
    fn test_detection_scale_invariant_in_alpha() {
        let dict = ImDictionary::lexicographic(8, 4).unwrap();
        let a = steering(8, 5.0);
        let c = Constellation::psk(8).unwrap();
        let mut r = rng::stream(92, "im-scale");
        for _ in 0..20 {
            let noise = CVec::from_fn(8, |_, _| rng::complex_normal(&mut r) * 0.3);
            let x = im_transmit(&dict, 21, c.points()[3], &a).unwrap();
            for alpha in [Complex64::new(1.0, 0.0), Complex64::new(-2.5, 4.0)] {
                let y = x.clone() * alpha + &noise * alpha;
                let (i_hat, phase) = im_detect(&y, &dict, &a, alpha).unwrap();
                let y1 = x.clone() + noise.clone();
                let (i_ref, phase_ref) =
                    im_detect(&y1, &dict, &a, Complex64::from(1.0)).unwrap();
                assert_eq!(i_hat, i_ref);
                assert!((phase - phase_ref).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn test_ber_curve_monotone_and_two_stage_near_ml() {
        let dict = ImDictionary::lexicographic(8, 4).unwrap();
        let a = steering(8, 0.0);
        let c = Constellation::psk(4).unwrap();
        let alpha = Complex64::from(1.0);
        let grid: Vec<f64> = (0..=10).map(|i| i as f64 * 2.0).collect();
        let two = im_ber_curve(&dict, &a, &c, alpha, &grid, 4000, ImDetector::TwoStage, 5)
            .unwrap();
        for w in two.windows(2) {
            assert!(
                w[1].index_error_rate <= w[0].index_error_rate,
                "IER rose from {} to {} at {} dB",
                w[0].index_error_rate,
                w[1].index_error_rate,
                w[1].snr_db
            );
        }
        let ml = im_ber_curve(&dict, &a, &c, alpha, &grid, 4000, ImDetector::JointMl, 5)
            .unwrap();
        let s_two = snr_at_ier(&two, 1e-1).expect("curve crosses 1e-1");
        let s_ml = snr_at_ier(&ml, 1e-1).expect("curve crosses 1e-1");
        assert!(s_two >= s_ml - 0.2, "two-stage cannot beat ML by {}", s_ml - s_two);
        assert!(s_two - s_ml <= 0.5, "two-stage loses {} dB", s_two - s_ml);

        // Determinism: same seed reproduces the curve exactly.
        let again = im_ber_curve(&dict, &a, &c, alpha, &grid, 4000, ImDetector::TwoStage, 5)
            .unwrap();
        for (x, y) in two.iter().zip(&again) {
            assert_eq!(x.index_error_rate, y.index_error_rate);
            assert_eq!(x.symbol_error_rate, y.symbol_error_rate);
        }
        let csv = im_ber_to_csv(&two);
        assert!(csv.starts_with("snr_db,index_error_rate,symbol_error_rate\n"));
        assert_eq!(csv.lines().count(), grid.len() + 1);
    }

    #[test]
    fn test_snr_at_ier_interpolation() {
        let points = vec![
            ImBerPoint { snr_db: 0.0, index_error_rate: 1e-1, symbol_error_rate: 0.0 },
            ImBerPoint { snr_db: 10.0, index_error_rate: 1e-3, symbol_error_rate: 0.0 },
        ];
        // Log-linear: 1e-2 sits exactly halfway.
        assert_relative_eq!(snr_at_ier(&points, 1e-2).unwrap(), 5.0, epsilon = 1e-12);
        assert!(snr_at_ier(&points, 1e-5).is_none());
    }
}
