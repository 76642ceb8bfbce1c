//! Scenario configuration: array geometry, channels, targets, users.
//!
//! A [`Scenario`] is the declarative input every experiment runs from. It
//! can be built programmatically or loaded from a JSON file; validation
//! reports the exact field path of the first offending entry.
//!
//! Conventions, fixed across the crate:
//! - Angles are degrees at the API boundary and radians internally.
//! - Arrays are uniform linear arrays; element spacing is in wavelengths.
//! - Delays are integer range bins of the OFDM grid.

use std::f64::consts::TAU;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{IsacError, Result};
use crate::linalg::CVec;
use crate::rng;

/// Uniform linear array described by element count and spacing in wavelengths.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    pub num_elements: usize,
    pub spacing_wavelengths: f64,
}

impl ArrayGeometry {
    pub fn new(num_elements: usize, spacing_wavelengths: f64) -> Result<Self> {
        if num_elements == 0 {
            return Err(IsacError::domain("array needs at least one element"));
        }
        if !(spacing_wavelengths > 0.0) || !spacing_wavelengths.is_finite() {
            return Err(IsacError::domain(format!(
                "element spacing must be positive and finite, got {spacing_wavelengths}"
            )));
        }
        Ok(ArrayGeometry {
            num_elements,
            spacing_wavelengths,
        })
    }

    /// Half-wavelength ULA, the default geometry everywhere.
    pub fn half_wavelength(num_elements: usize) -> Self {
        ArrayGeometry::new(num_elements, 0.5).expect("valid spacing")
    }

    /// Steering vector `a(theta)` with element n carrying phase
    /// `2 pi d n sin(theta)`, phase-referenced to element 0.
    pub fn steering_vector(&self, angle_deg: f64) -> Result<CVec> {
        let angle = validate_angle(angle_deg)?;
        let phase_step = TAU * self.spacing_wavelengths * angle.sin();
        Ok(CVec::from_fn(self.num_elements, |n, _| {
            Complex64::from_polar(1.0, phase_step * n as f64)
        }))
    }

    /// Derivative `d a(theta) / d theta` in radians, used by Fisher
    /// information computations.
    pub fn steering_derivative(&self, angle_deg: f64) -> Result<CVec> {
        let angle = validate_angle(angle_deg)?;
        let a = self.steering_vector(angle_deg)?;
        let gain = TAU * self.spacing_wavelengths * angle.cos();
        Ok(CVec::from_fn(self.num_elements, |n, _| {
            Complex64::new(0.0, gain * n as f64) * a[n]
        }))
    }
}

fn validate_angle(angle_deg: f64) -> Result<f64> {
    if !angle_deg.is_finite() || angle_deg.abs() > 90.0 {
        return Err(IsacError::domain(format!(
            "angle must lie in [-90, 90] degrees, got {angle_deg}"
        )));
    }
    Ok(angle_deg.to_radians())
}

/// Point scatterer (or eavesdropper platform) at a known angle and range bin.
#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    pub angle_deg: f64,
    pub delay_bin: usize,
    pub amplitude_db: f64,
    pub eavesdropper: bool,
}

impl Target {
    /// Linear complex reflection amplitude (zero phase).
    pub fn amplitude(&self) -> Complex64 {
        Complex64::new(10.0_f64.powf(self.amplitude_db / 20.0), 0.0)
    }
}

/// Downlink communication user with a resolved channel vector.
#[derive(Debug, Clone, PartialEq)]
pub struct CommUser {
    pub channel: CVec,
    pub sinr_target_db: f64,
    pub noise_power: f64,
}

impl CommUser {
    /// Line-of-sight user whose channel is the steering vector at `angle_deg`.
    pub fn line_of_sight(array: &ArrayGeometry, angle_deg: f64, sinr_target_db: f64, noise_power: f64) -> Result<Self> {
        Ok(CommUser {
            channel: array.steering_vector(angle_deg)?,
            sinr_target_db,
            noise_power,
        })
    }

    pub fn sinr_target_linear(&self) -> f64 {
        10.0_f64.powf(self.sinr_target_db / 10.0)
    }
}

/// Complete experiment input: geometry, OFDM grid, users, targets, seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub tx_array: ArrayGeometry,
    pub rx_array: ArrayGeometry,
    pub num_subcarriers: usize,
    pub num_blocks: usize,
    pub seed: u64,
    pub users: Vec<CommUser>,
    pub targets: Vec<Target>,
}

impl Scenario {
    /// Load and validate a scenario from a JSON file.
    pub fn load(path: impl AsRef<Path>) -> Result<Scenario> {
        let text = std::fs::read_to_string(path)?;
        Scenario::from_json(&text)
    }

    /// Parse and validate a scenario from JSON text.
    pub fn from_json(text: &str) -> Result<Scenario> {
        let file: ScenarioFile = serde_json::from_str(text)?;
        file.resolve()
    }

    /// Serialize to the same JSON schema accepted by [`Scenario::from_json`].
    ///
    /// Users are written in explicit-channel form, so a load/save round trip
    /// is structurally exact.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ScenarioFile::from_scenario(self))?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    /// Validate cross-field invariants; returns the first violation with its
    /// JSON field path.
    pub fn validate(&self) -> Result<()> {
        if self.num_subcarriers == 0 {
            return Err(IsacError::config("subcarriers", "must be at least 1"));
        }
        if self.num_blocks == 0 {
            return Err(IsacError::config("blocks", "must be at least 1"));
        }
        for (i, user) in self.users.iter().enumerate() {
            if user.channel.len() != self.tx_array.num_elements {
                return Err(IsacError::config(
                    format!("users[{i}].channel"),
                    format!(
                        "length {} does not match tx_elements {}",
                        user.channel.len(),
                        self.tx_array.num_elements
                    ),
                ));
            }
            if user.channel.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
                return Err(IsacError::config(format!("users[{i}].channel"), "entries must be finite"));
            }
            if user.channel.norm() == 0.0 {
                return Err(IsacError::config(format!("users[{i}].channel"), "must be nonzero"));
            }
            if !(user.noise_power > 0.0) || !user.noise_power.is_finite() {
                return Err(IsacError::config(
                    format!("users[{i}].noise_power"),
                    "must be positive and finite",
                ));
            }
            if !user.sinr_target_db.is_finite() {
                return Err(IsacError::config(format!("users[{i}].sinr_target_db"), "must be finite"));
            }
        }
        for (i, target) in self.targets.iter().enumerate() {
            if !target.angle_deg.is_finite() || target.angle_deg.abs() > 90.0 {
                return Err(IsacError::config(
                    format!("targets[{i}].angle_deg"),
                    "must lie in [-90, 90]",
                ));
            }
            if target.delay_bin >= self.num_subcarriers {
                return Err(IsacError::config(
                    format!("targets[{i}].delay_bin"),
                    format!(
                        "bin {} out of range for {} subcarriers",
                        target.delay_bin, self.num_subcarriers
                    ),
                ));
            }
            if !target.amplitude_db.is_finite() {
                return Err(IsacError::config(format!("targets[{i}].amplitude_db"), "must be finite"));
            }
        }
        Ok(())
    }

    /// Targets flagged as eavesdroppers.
    pub fn eavesdroppers(&self) -> Vec<&Target> {
        self.targets.iter().filter(|t| t.eavesdropper).collect()
    }

    /// Desk-scale default: 16x16 half-wavelength arrays, 256 subcarriers,
    /// two line-of-sight users at -45 and 30 degrees, one 0 dB target at
    /// broadside in bin 40.
    pub fn demo() -> Scenario {
        let tx = ArrayGeometry::half_wavelength(16);
        let rx = ArrayGeometry::half_wavelength(16);
        let users = vec![
            CommUser::line_of_sight(&tx, -45.0, 10.0, 0.01).expect("valid angle"),
            CommUser::line_of_sight(&tx, 30.0, 10.0, 0.01).expect("valid angle"),
        ];
        let targets = vec![Target {
            angle_deg: 0.0,
            delay_bin: 40,
            amplitude_db: 0.0,
            eavesdropper: false,
        }];
        Scenario {
            tx_array: tx,
            rx_array: rx,
            num_subcarriers: 256,
            num_blocks: 64,
            seed: 42,
            users,
            targets,
        }
    }
}

/// I.i.d. CN(0, 1) Rayleigh fading channel of length `n`.
pub fn rayleigh_channel(rng: &mut impl rand::Rng, n: usize) -> CVec {
    CVec::from_fn(n, |_, _| rng::complex_normal(rng))
}

fn default_spacing() -> f64 {
    0.5
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    tx_elements: usize,
    rx_elements: usize,
    #[serde(default = "default_spacing")]
    spacing: f64,
    subcarriers: usize,
    blocks: usize,
    seed: u64,
    users: Vec<UserEntry>,
    targets: Vec<TargetEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UserEntry {
    #[serde(skip_serializing_if = "Option::is_none")]
    angle_deg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    channel: Option<Vec<[f64; 2]>>,
    sinr_target_db: f64,
    noise_power: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TargetEntry {
    angle_deg: f64,
    delay_bin: usize,
    amplitude_db: f64,
    #[serde(default)]
    eavesdropper: bool,
}

impl ScenarioFile {
    fn resolve(self) -> Result<Scenario> {
        let tx_array = ArrayGeometry::new(self.tx_elements, self.spacing)
            .map_err(|e| IsacError::config("tx_elements/spacing", e.to_string()))?;
        let rx_array = ArrayGeometry::new(self.rx_elements, self.spacing)
            .map_err(|e| IsacError::config("rx_elements/spacing", e.to_string()))?;

        let mut users = Vec::with_capacity(self.users.len());
        for (i, entry) in self.users.iter().enumerate() {
            let channel = match (&entry.angle_deg, &entry.channel) {
                (Some(angle), None) => tx_array
                    .steering_vector(*angle)
                    .map_err(|e| IsacError::config(format!("users[{i}].angle_deg"), e.to_string()))?,
                (None, Some(raw)) => CVec::from_iterator(
                    raw.len(),
                    raw.iter().map(|[re, im]| Complex64::new(*re, *im)),
                ),
                _ => {
                    return Err(IsacError::config(
                        format!("users[{i}]"),
                        "specify exactly one of angle_deg or channel",
                    ))
                }
            };
            users.push(CommUser {
                channel,
                sinr_target_db: entry.sinr_target_db,
                noise_power: entry.noise_power,
            });
        }

        let targets = self
            .targets
            .iter()
            .map(|t| Target {
                angle_deg: t.angle_deg,
                delay_bin: t.delay_bin,
                amplitude_db: t.amplitude_db,
                eavesdropper: t.eavesdropper,
            })
            .collect();

        let scenario = Scenario {
            tx_array,
            rx_array,
            num_subcarriers: self.subcarriers,
            num_blocks: self.blocks,
            seed: self.seed,
            users,
            targets,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    fn from_scenario(sc: &Scenario) -> ScenarioFile {
        ScenarioFile {
            tx_elements: sc.tx_array.num_elements,
            rx_elements: sc.rx_array.num_elements,
            spacing: sc.tx_array.spacing_wavelengths,
            subcarriers: sc.num_subcarriers,
            blocks: sc.num_blocks,
            seed: sc.seed,
            users: sc
                .users
                .iter()
                .map(|u| UserEntry {
                    angle_deg: None,
                    channel: Some(u.channel.iter().map(|c| [c.re, c.im]).collect()),
                    sinr_target_db: u.sinr_target_db,
                    noise_power: u.noise_power,
                })
                .collect(),
            targets: sc
                .targets
                .iter()
                .map(|t| TargetEntry {
                    angle_deg: t.angle_deg,
                    delay_bin: t.delay_bin,
                    amplitude_db: t.amplitude_db,
                    eavesdropper: t.eavesdropper,
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn test_steering_broadside_is_all_ones() {
        let a = ArrayGeometry::half_wavelength(8).steering_vector(0.0).unwrap();
        for n in 0..8 {
            assert!((a[n] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn test_steering_endfire_alternates_sign() {
        let a = ArrayGeometry::half_wavelength(2).steering_vector(90.0).unwrap();
        assert!((a[0] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert!((a[1] - Complex64::new(-1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn test_steering_entries_are_unit_modulus() {
        let geom = ArrayGeometry::new(16, 0.7).unwrap();
        for angle in [-90.0, -37.5, 0.0, 12.25, 88.0] {
            let a = geom.steering_vector(angle).unwrap();
            for n in 0..16 {
                assert!((a[n].norm() - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn test_steering_rejects_out_of_range_angle() {
        let geom = ArrayGeometry::half_wavelength(4);
        assert!(geom.steering_vector(90.5).is_err());
        assert!(geom.steering_vector(f64::NAN).is_err());
    }

    #[test]
    fn test_steering_derivative_matches_finite_difference() {
        let geom = ArrayGeometry::half_wavelength(6);
        let angle = 23.0;
        let h_deg = 1e-5_f64;
        let h_rad = h_deg.to_radians();
        let plus = geom.steering_vector(angle + h_deg).unwrap();
        let minus = geom.steering_vector(angle - h_deg).unwrap();
        let fd = (plus - minus) / Complex64::from(2.0 * h_rad);
        let analytic = geom.steering_derivative(angle).unwrap();
        assert!((fd - analytic).norm() < 1e-6);
    }

    #[test]
    fn test_rayleigh_channel_unit_average_power() {
        let mut rng = crate::rng::stream(11, "rayleigh");
        let n_draws = 100_000;
        let mut acc = 0.0;
        for _ in 0..n_draws {
            acc += rayleigh_channel(&mut rng, 1)[0].norm_sqr();
        }
        let mean = acc / n_draws as f64;
        assert!((mean - 1.0).abs() < 0.02, "E|h|^2 = {mean}");
    }

    #[test]
    fn test_demo_scenario_validates() {
        Scenario::demo().validate().unwrap();
    }

    #[test]
    fn test_load_rejects_delay_bin_out_of_range() {
        let text = r#"{
            "tx_elements": 4, "rx_elements": 4, "subcarriers": 64, "blocks": 8, "seed": 1,
            "users": [{"angle_deg": 10.0, "sinr_target_db": 8.0, "noise_power": 0.01}],
            "targets": [{"angle_deg": 0.0, "delay_bin": 64, "amplitude_db": 0.0}]
        }"#;
        let err = Scenario::from_json(text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("targets[0].delay_bin"), "got: {msg}");
    }

    #[test]
    fn test_load_rejects_ambiguous_user_channel() {
        let text = r#"{
            "tx_elements": 2, "rx_elements": 2, "subcarriers": 16, "blocks": 4, "seed": 1,
            "users": [{"angle_deg": 10.0, "channel": [[1.0, 0.0], [0.0, 1.0]],
                       "sinr_target_db": 8.0, "noise_power": 0.01}],
            "targets": []
        }"#;
        let err = Scenario::from_json(text).unwrap_err();
        assert!(err.to_string().contains("users[0]"));
    }

    #[test]
    fn test_json_round_trip_is_structurally_exact() {
        let sc = Scenario::demo();
        let text = sc.to_json().unwrap();
        let back = Scenario::from_json(&text).unwrap();
        assert_eq!(sc, back);
    }

    #[test]
    fn test_angle_users_resolve_to_steering_channels() {
        let text = r#"{
            "tx_elements": 8, "rx_elements": 8, "subcarriers": 32, "blocks": 4, "seed": 3,
            "users": [{"angle_deg": -45.0, "sinr_target_db": 10.0, "noise_power": 0.01}],
            "targets": []
        }"#;
        let sc = Scenario::from_json(text).unwrap();
        let expected = sc.tx_array.steering_vector(-45.0).unwrap();
        assert!((&sc.users[0].channel - expected).norm() < 1e-15);
    }
}
