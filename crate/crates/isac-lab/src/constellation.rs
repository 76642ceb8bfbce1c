//! Constellations and the moments that drive sensing performance.
//!
//! Two scalar statistics of a unit-power constellation control how well its
//! symbols double as a radar probing sequence: the fourth moment
//! `mu4 = E|s|^4` sets the matched-filter sidelobe floor, and the inverse
//! second moment `nu = E|s|^-2` sets the reciprocal-filter noise
//! amplification. Both are 1 exactly for constant-modulus alphabets and grow
//! as amplitude spread increases.
//!
//! [`shape_constellation`] trades those moments against minimum Euclidean
//! distance: it minimizes `(1 - rho) * mu4 - rho * d_min` over zero-mean,
//! unit-power point sets, so `rho = 0` recovers a constant-modulus ring and
//! `rho = 1` recovers a max-distance packing.

use std::f64::consts::TAU;
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use rand::RngExt;
use serde::Deserialize;

use crate::error::{IsacError, Result};
use crate::rng;

/// Finite complex alphabet with symbol probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    points: Vec<Complex64>,
    probs: Vec<f64>,
}

impl Constellation {
    /// Build from explicit points and probabilities.
    pub fn new(points: Vec<Complex64>, probs: Vec<f64>) -> Result<Self> {
        let c = Constellation { points, probs };
        c.validate()?;
        Ok(c)
    }

    /// Uniform-probability constellation from points alone.
    pub fn uniform(points: Vec<Complex64>) -> Result<Self> {
        let m = points.len();
        Constellation::new(points, vec![1.0 / m as f64; m])
    }

    /// M-ary PSK on the unit circle, first point at angle zero.
    pub fn psk(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(IsacError::domain("PSK needs at least 2 points"));
        }
        Constellation::uniform(
            (0..m)
                .map(|k| Complex64::from_polar(1.0, TAU * k as f64 / m as f64))
                .collect(),
        )
    }

    /// Square M-QAM (M in {4, 16, 64, 256}), normalized to unit average power.
    pub fn qam(m: usize) -> Result<Self> {
        let side = (m as f64).sqrt().round() as usize;
        if side * side != m || !side.is_power_of_two() || m < 4 {
            return Err(IsacError::domain(format!("square QAM size required, got {m}")));
        }
        let mut points = Vec::with_capacity(m);
        for i in 0..side {
            for q in 0..side {
                let re = (2 * i) as f64 - (side - 1) as f64;
                let im = (2 * q) as f64 - (side - 1) as f64;
                points.push(Complex64::new(re, im));
            }
        }
        Constellation::uniform(points).map(|c| c.power_normalized())
    }

    /// 16APSK (4 + 12 rings) with the shipped ring geometry.
    pub fn apsk16() -> Result<Self> {
        ring_table().apsk16.build()
    }

    /// 32APSK (4 + 12 + 16 rings) with the shipped ring geometry.
    pub fn apsk32() -> Result<Self> {
        ring_table().apsk32.build()
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Mean symbol power `E|s|^2`.
    pub fn average_power(&self) -> f64 {
        self.points
            .iter()
            .zip(&self.probs)
            .map(|(s, p)| p * s.norm_sqr())
            .sum()
    }

    /// Copy scaled to unit average power.
    pub fn power_normalized(&self) -> Constellation {
        let scale = 1.0 / self.average_power().sqrt();
        Constellation {
            points: self.points.iter().map(|s| s * scale).collect(),
            probs: self.probs.clone(),
        }
    }

    /// Normalized fourth moment `E|s|^4 / (E|s|^2)^2`.
    ///
    /// Always >= 1, with equality iff the constellation is constant modulus.
    pub fn kurtosis(&self) -> f64 {
        let p2 = self.average_power();
        let p4: f64 = self
            .points
            .iter()
            .zip(&self.probs)
            .map(|(s, p)| p * s.norm_sqr() * s.norm_sqr())
            .sum();
        p4 / (p2 * p2)
    }

    /// Normalized inverse second moment `E|s|^-2 * E|s|^2`.
    ///
    /// Always >= 1 (equality iff constant modulus); errors if any point sits
    /// at the origin, where zero-forcing equalization is undefined.
    pub fn inverse_second_moment(&self) -> Result<f64> {
        let p2 = self.average_power();
        let mut inv = 0.0;
        for (s, p) in self.points.iter().zip(&self.probs) {
            let power = s.norm_sqr();
            if power == 0.0 {
                return Err(IsacError::domain(
                    "inverse second moment undefined: constellation contains the origin",
                ));
            }
            inv += p / power;
        }
        Ok(inv * p2)
    }

    /// Minimum Euclidean distance over distinct point pairs.
    pub fn min_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.points.len() {
            for j in (i + 1)..self.points.len() {
                best = best.min((self.points[i] - self.points[j]).norm());
            }
        }
        best
    }

    /// Index of the nearest constellation point to `r`.
    pub fn nearest(&self, r: Complex64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, s) in self.points.iter().enumerate() {
            let d = (r - s).norm_sqr();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// Draw one symbol index according to the probability weights.
    pub fn sample_index(&self, rng: &mut impl Rng) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        self.probs.len() - 1
    }

    /// Draw one symbol value.
    pub fn sample(&self, rng: &mut impl Rng) -> Complex64 {
        self.points[self.sample_index(rng)]
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(IsacError::domain("constellation must be nonempty"));
        }
        if self.points.len() != self.probs.len() {
            return Err(IsacError::dimension(format!(
                "{} points vs {} probabilities",
                self.points.len(),
                self.probs.len()
            )));
        }
        if self.points.iter().any(|s| !s.re.is_finite() || !s.im.is_finite()) {
            return Err(IsacError::domain("constellation points must be finite"));
        }
        if self.probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(IsacError::domain("probabilities must be finite and nonnegative"));
        }
        let total: f64 = self.probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(IsacError::domain(format!("probabilities sum to {total}, expected 1")));
        }
        Ok(())
    }

    /// Write as CSV with header `re,im,prob`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("re,im,prob\n");
        for (s, p) in self.points.iter().zip(&self.probs) {
            out.push_str(&format!("{:.17e},{:.17e},{:.17e}\n", s.re, s.im, p));
        }
        out
    }

    /// Parse the CSV form written by [`Constellation::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == "re,im,prob" => {}
            other => {
                return Err(IsacError::domain(format!(
                    "expected constellation header `re,im,prob`, got {other:?}"
                )))
            }
        }
        let mut points = Vec::new();
        let mut probs = Vec::new();
        for (lineno, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(IsacError::domain(format!(
                    "constellation line {}: expected 3 fields, got {}",
                    lineno + 2,
                    fields.len()
                )));
            }
            let parse = |s: &str| -> Result<f64> {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| IsacError::domain(format!("constellation line {}: {e}", lineno + 2)))
            };
            points.push(Complex64::new(parse(fields[0])?, parse(fields[1])?));
            probs.push(parse(fields[2])?);
        }
        Constellation::new(points, probs)
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        Constellation::from_csv(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Deserialize)]
struct RingTable {
    #[allow(dead_code)]
    version: u32,
    apsk16: RingSpec,
    apsk32: RingSpec,
}

#[derive(Debug, Deserialize)]
struct RingSpec {
    points_per_ring: Vec<usize>,
    radius_ratios: Vec<f64>,
    phase_offsets: Vec<f64>,
}

impl RingSpec {
    fn build(&self) -> Result<Constellation> {
        if self.radius_ratios.len() + 1 != self.points_per_ring.len()
            || self.phase_offsets.len() != self.points_per_ring.len()
        {
            return Err(IsacError::domain("inconsistent APSK ring table"));
        }
        let mut points = Vec::new();
        for (ring, (&count, &offset)) in self
            .points_per_ring
            .iter()
            .zip(&self.phase_offsets)
            .enumerate()
        {
            let radius = if ring == 0 { 1.0 } else { self.radius_ratios[ring - 1] };
            for k in 0..count {
                points.push(Complex64::from_polar(radius, offset + TAU * k as f64 / count as f64));
            }
        }
        Constellation::uniform(points).map(|c| c.power_normalized())
    }
}

fn ring_table() -> &'static RingTable {
    use std::sync::OnceLock;
    static TABLE: OnceLock<RingTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        serde_json::from_str(include_str!("../data/apsk_rings.json")).expect("shipped ring table parses")
    })
}

/// Result of one geometric shaping run.
#[derive(Debug, Clone)]
pub struct ShapedConstellation {
    pub constellation: Constellation,
    pub rho: f64,
    pub kurtosis: f64,
    pub min_distance: f64,
    /// Value of `(1 - rho) * kurtosis - rho * min_distance`.
    pub objective: f64,
}

/// Knobs for the shaping optimizer.
#[derive(Debug, Clone)]
pub struct ShapingOptions {
    pub restarts: usize,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for ShapingOptions {
    fn default() -> Self {
        ShapingOptions {
            restarts: 32,
            iterations: 1500,
            seed: 0,
        }
    }
}

/// Geometrically shape an `m`-point constellation at tradeoff weight `rho`.
///
/// Minimizes `(1 - rho) * mu4 - rho * d_min` over zero-mean, unit-power
/// point sets by projected gradient descent with an annealed soft-min
/// surrogate for the pairwise distance, restarted from `opts.restarts`
/// random initializations; the best run by the exact objective wins.
pub fn shape_constellation(m: usize, rho: f64, opts: &ShapingOptions) -> Result<ShapedConstellation> {
    let candidates = shaping_candidates(m, rho, opts)?;
    Ok(select_best(&candidates, rho))
}

/// Shape a constellation per `rho` on a shared candidate pool.
///
/// All restart results from every sweep point are pooled; each `rho` picks
/// the pool element minimizing its own weighted objective. Selections from a
/// shared pool are mutually non-dominated in the `(mu4, d_min)` plane.
pub fn shape_sweep(m: usize, rhos: &[f64], opts: &ShapingOptions) -> Result<Vec<ShapedConstellation>> {
    let mut pool = Vec::new();
    for &rho in rhos {
        pool.extend(shaping_candidates(m, rho, opts)?);
    }
    Ok(rhos.iter().map(|&rho| select_best(&pool, rho)).collect())
}

fn shaping_candidates(m: usize, rho: f64, opts: &ShapingOptions) -> Result<Vec<Constellation>> {
    if m < 2 {
        return Err(IsacError::domain("shaping needs at least 2 points"));
    }
    if !(0.0..=1.0).contains(&rho) {
        return Err(IsacError::domain(format!("rho must lie in [0, 1], got {rho}")));
    }
    if opts.restarts == 0 || opts.iterations == 0 {
        return Err(IsacError::domain("restarts and iterations must be positive"));
    }

    let mut candidates = Vec::with_capacity(opts.restarts);
    for restart in 0..opts.restarts {
        let mut stream = rng::stream_indexed(opts.seed, "shape", restart as u64);
        let mut points: Vec<Complex64> = (0..m).map(|_| rng::complex_normal(&mut stream)).collect();
        project_zero_mean_unit_power(&mut points);

        let t_total = opts.iterations;
        for t in 0..t_total {
            let frac = t as f64 / t_total as f64;
            // Sharpen the soft-min and shrink the step as the run progresses.
            let beta = 4.0 * (100.0_f64).powf(frac);
            let lr = 0.08 * (0.02_f64).powf(frac);
            let grad = shaping_gradient(&points, rho, beta);
            for (s, g) in points.iter_mut().zip(&grad) {
                *s -= lr * g;
            }
            project_zero_mean_unit_power(&mut points);
        }
        candidates.push(Constellation::uniform(points)?);
    }
    Ok(candidates)
}

fn select_best(pool: &[Constellation], rho: f64) -> ShapedConstellation {
    let score = |c: &Constellation| (1.0 - rho) * c.kurtosis() - rho * c.min_distance();
    let best = pool
        .iter()
        .min_by(|a, b| score(a).total_cmp(&score(b)))
        .expect("nonempty candidate pool");
    ShapedConstellation {
        constellation: best.clone(),
        rho,
        kurtosis: best.kurtosis(),
        min_distance: best.min_distance(),
        objective: score(best),
    }
}

/// Wirtinger gradient of `(1 - rho) * mu4 - rho * softmin_dist` at `points`.
fn shaping_gradient(points: &[Complex64], rho: f64, beta: f64) -> Vec<Complex64> {
    let m = points.len();
    let mut grad = vec![Complex64::new(0.0, 0.0); m];

    // d mu4 / d conj(s_i) = (2/m) |s_i|^2 s_i for unit-power-normalized sets.
    for (g, s) in grad.iter_mut().zip(points) {
        *g += (1.0 - rho) * (2.0 / m as f64) * s.norm_sqr() * s;
    }

    if rho > 0.0 {
        // Soft minimum over pairwise distances: weights concentrate on the
        // closest pairs as beta grows.
        let mut d_min = f64::INFINITY;
        for i in 0..m {
            for j in (i + 1)..m {
                d_min = d_min.min((points[i] - points[j]).norm());
            }
        }
        let mut weight_sum = 0.0;
        let mut pair_weights = Vec::new();
        for i in 0..m {
            for j in (i + 1)..m {
                let d = (points[i] - points[j]).norm();
                let w = (-beta * (d - d_min)).exp();
                pair_weights.push((i, j, d, w));
                weight_sum += w;
            }
        }
        for (i, j, d, w) in pair_weights {
            if d < 1e-12 {
                continue;
            }
            // d(d_ij)/d conj(s_i) = (s_i - s_j) / (2 d_ij); maximizing the
            // soft-min pushes the closest pairs apart.
            let dir = (points[i] - points[j]) / Complex64::from(2.0 * d);
            let coeff = rho * w / weight_sum;
            grad[i] -= coeff * dir;
            grad[j] += coeff * dir;
        }
    }
    grad
}

fn project_zero_mean_unit_power(points: &mut [Complex64]) {
    let m = points.len() as f64;
    let mean: Complex64 = points.iter().sum::<Complex64>() / m;
    for s in points.iter_mut() {
        *s -= mean;
    }
    let power: f64 = points.iter().map(|s| s.norm_sqr()).sum::<f64>() / m;
    if power > 0.0 {
        let scale = 1.0 / power.sqrt();
        for s in points.iter_mut() {
            *s *= scale;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Reference moment table for the standard alphabets.
    const TABLE: &[(&str, f64, f64)] = &[
        ("16qam", 1.32, 1.89),
        ("64qam", 1.38, 2.69),
        ("256qam", 1.40, 3.44),
        ("16apsk", 1.25, 2.50),
        ("32apsk", 1.41, 3.23),
    ];

    fn by_name(name: &str) -> Constellation {
        match name {
            "16qam" => Constellation::qam(16).unwrap(),
            "64qam" => Constellation::qam(64).unwrap(),
            "256qam" => Constellation::qam(256).unwrap(),
            "16apsk" => Constellation::apsk16().unwrap(),
            "32apsk" => Constellation::apsk32().unwrap(),
            _ => unreachable!(),
        }
    }

    #[test]
    fn test_moment_table_reproduced() {
        for &(name, mu4, nu) in TABLE {
            let c = by_name(name);
            let got_mu4 = c.kurtosis();
            let got_nu = c.inverse_second_moment().unwrap();
            assert!(
                (got_mu4 - mu4).abs() <= 0.01,
                "{name}: mu4 {got_mu4:.4} vs table {mu4}"
            );
            assert!((got_nu - nu).abs() <= 0.01, "{name}: nu {got_nu:.4} vs table {nu}");
        }
    }

    #[test]
    fn test_psk_moments_are_exactly_one() {
        for m in [2, 4, 8, 16] {
            let c = Constellation::psk(m).unwrap();
            assert!((c.kurtosis() - 1.0).abs() < 1e-12);
            assert!((c.inverse_second_moment().unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn test_16qam_exact_fractions() {
        let c = Constellation::qam(16).unwrap();
        assert!((c.kurtosis() - 1.32).abs() < 1e-12);
        assert!((c.inverse_second_moment().unwrap() - 17.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn test_kurtosis_scale_invariant() {
        let c = Constellation::qam(64).unwrap();
        let scaled = Constellation::uniform(c.points().iter().map(|s| s * 3.7).collect()).unwrap();
        assert!((c.kurtosis() - scaled.kurtosis()).abs() < 1e-12);
        assert!(
            (c.inverse_second_moment().unwrap() - scaled.inverse_second_moment().unwrap()).abs() < 1e-12
        );
    }

    #[test]
    fn test_inverse_second_moment_rejects_origin() {
        let c = Constellation::uniform(vec![
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
        ])
        .unwrap();
        assert!(c.inverse_second_moment().is_err());
    }

    #[test]
    fn test_min_distance_qpsk() {
        let c = Constellation::psk(4).unwrap();
        assert!((c.min_distance() - std::f64::consts::SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn test_csv_round_trip() {
        let c = Constellation::apsk32().unwrap();
        let back = Constellation::from_csv(&c.to_csv()).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn test_csv_rejects_bad_header() {
        assert!(Constellation::from_csv("x,y,p\n1,2,0.5\n").is_err());
    }

    #[test]
    fn test_sampling_follows_probabilities() {
        let c = Constellation::new(
            vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)],
            vec![0.8, 0.2],
        )
        .unwrap();
        let mut rng = crate::rng::stream(5, "sample");
        let n = 50_000;
        let ones = (0..n).filter(|_| c.sample_index(&mut rng) == 0).count();
        let frac = ones as f64 / n as f64;
        assert!((frac - 0.8).abs() < 0.01, "P(index 0) = {frac}");
    }

    #[test]
    fn test_shaping_rho_zero_reaches_constant_modulus() {
        let opts = ShapingOptions {
            restarts: 8,
            iterations: 800,
            seed: 1,
        };
        let shaped = shape_constellation(16, 0.0, &opts).unwrap();
        assert!(
            shaped.kurtosis < 1.0 + 1e-3,
            "kurtosis after shaping: {}",
            shaped.kurtosis
        );
    }

    #[test]
    fn test_shaping_rho_one_reaches_square_packing() {
        let opts = ShapingOptions {
            restarts: 16,
            iterations: 1200,
            seed: 2,
        };
        let shaped = shape_constellation(4, 1.0, &opts).unwrap();
        // Best zero-mean unit-power 4-point packing is the square, d = sqrt(2).
        assert!(
            shaped.min_distance >= std::f64::consts::SQRT_2 * 0.99,
            "min distance after shaping: {}",
            shaped.min_distance
        );
    }

    #[test]
    fn test_shaping_sweep_is_non_dominated() {
        let opts = ShapingOptions {
            restarts: 6,
            iterations: 500,
            seed: 3,
        };
        let sweep = shape_sweep(8, &[0.0, 0.25, 0.5, 0.75, 1.0], &opts).unwrap();
        for a in &sweep {
            for b in &sweep {
                let dominates = b.kurtosis < a.kurtosis - 1e-12 && b.min_distance > a.min_distance + 1e-12;
                assert!(!dominates, "sweep point dominated: {a:?} by {b:?}");
            }
        }
    }

    #[test]
    fn test_shaped_sets_stay_normalized() {
        let opts = ShapingOptions {
            restarts: 2,
            iterations: 300,
            seed: 4,
        };
        let shaped = shape_constellation(8, 0.5, &opts).unwrap();
        let c = &shaped.constellation;
        assert!((c.average_power() - 1.0).abs() < 1e-9);
        let mean: Complex64 = c.points().iter().sum::<Complex64>() / c.len() as f64;
        assert!(mean.norm() < 1e-9);
    }
}
