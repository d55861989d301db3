//! Noisy delay/angle observations of ground-truth paths.
//!
//! Noise levels come from a simple link budget and the textbook single-path
//! bounds for delay and angle estimation:
//!
//! ```text
//! var_tau   = 1 / (8 pi^2 beta^2 snr)
//! var_theta = kappa_theta / (snr * N)
//! var_phi   = kappa_phi   / (snr * N)
//! ```
//!
//! with `beta` the RMS bandwidth of the occupied subcarriers, `N` the number
//! of receive antennas and `snr` the linear per-path SNR. This is a stand-in
//! for a full Cramér-Rao analysis of the OFDM waveform; every constant can be
//! overridden, or the variances fixed outright with [`NoiseModel::Fixed`].

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raytrace::{PathKind, PropagationPath};
use crate::rng::{rng_from_seed, Rng as StreamRng};
use crate::SPEED_OF_LIGHT;

/// Thermal noise density at 290 K, dBm/Hz.
pub const THERMAL_NOISE_DBM_PER_HZ: f64 = -174.0;

/// Receiver array and OFDM numerology feeding the link budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioConfig {
    pub n_x: usize,
    pub n_y: usize,
    /// Element spacing, wavelengths.
    pub element_spacing: f64,
    pub subcarriers: usize,
    /// Hz.
    pub subcarrier_spacing: f64,
    /// Hz.
    pub carrier_frequency: f64,
    /// dB.
    pub noise_figure: f64,
    /// dBm.
    pub tx_power: f64,
    /// Loss per specular reflection, dB.
    pub reflection_loss: f64,
}

impl Default for RadioConfig {
    fn default() -> Self {
        Self {
            n_x: 8,
            n_y: 8,
            element_spacing: 0.5,
            subcarriers: 512,
            subcarrier_spacing: 30e3,
            carrier_frequency: 3.5e9,
            noise_figure: 7.0,
            tx_power: 0.0,
            reflection_loss: 3.0,
        }
    }
}

impl RadioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("radio: {m}")));
        if self.n_x == 0 || self.n_y == 0 || self.subcarriers == 0 {
            return bad("antenna and subcarrier counts must be >= 1");
        }
        if !(self.element_spacing > 0.0 && self.subcarrier_spacing > 0.0 && self.carrier_frequency > 0.0) {
            return bad("spacings and frequencies must be positive");
        }
        if !(self.noise_figure.is_finite() && self.tx_power.is_finite() && self.reflection_loss.is_finite()) {
            return bad("noise figure, tx power and reflection loss must be finite");
        }
        Ok(())
    }

    pub fn antennas(&self) -> usize {
        self.n_x * self.n_y
    }

    /// Occupied bandwidth `K * delta_f`, Hz.
    pub fn bandwidth(&self) -> f64 {
        self.subcarriers as f64 * self.subcarrier_spacing
    }

    /// RMS bandwidth of `K` equally spaced subcarriers around the carrier, Hz.
    pub fn rms_bandwidth(&self) -> f64 {
        let k = self.subcarriers as f64;
        self.subcarrier_spacing * ((k * k - 1.0) / 12.0).sqrt()
    }

    /// Receiver noise power over the occupied band, dBm.
    pub fn noise_power_dbm(&self) -> f64 {
        THERMAL_NOISE_DBM_PER_HZ + 10.0 * self.bandwidth().log10() + self.noise_figure
    }

    pub fn with_tx_power(&self, tx_power: f64) -> Self {
        Self {
            tx_power,
            ..self.clone()
        }
    }
}

/// How per-path measurement variances are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseModel {
    /// SNR-driven closed-form bounds (see the module docs).
    CrlbApprox {
        #[serde(default = "unit")]
        kappa_azimuth: f64,
        #[serde(default = "unit")]
        kappa_zenith: f64,
    },
    /// The same variances for every path regardless of SNR.
    Fixed { delay: f64, azimuth: f64, zenith: f64 },
}

fn unit() -> f64 {
    1.0
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::CrlbApprox {
            kappa_azimuth: 1.0,
            kappa_zenith: 1.0,
        }
    }
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::CrlbApprox {
                kappa_azimuth,
                kappa_zenith,
            } => kappa_azimuth > 0.0 && kappa_zenith > 0.0,
            Self::Fixed { delay, azimuth, zenith } => delay > 0.0 && azimuth > 0.0 && zenith > 0.0,
        };
        if ok && self.params_finite() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "noise model constants must be positive: {self:?}"
            )))
        }
    }

    fn params_finite(&self) -> bool {
        match *self {
            Self::CrlbApprox {
                kappa_azimuth,
                kappa_zenith,
            } => kappa_azimuth.is_finite() && kappa_zenith.is_finite(),
            Self::Fixed { delay, azimuth, zenith } => delay.is_finite() && azimuth.is_finite() && zenith.is_finite(),
        }
    }
}

/// Per-path measurement variances: s^2, rad^2, rad^2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseVariances {
    pub delay: f64,
    pub azimuth: f64,
    pub zenith: f64,
}

/// Free-space path loss over `length` meters at `frequency` Hz, dB.
pub fn free_space_path_loss(length: f64, frequency: f64) -> f64 {
    20.0 * (4.0 * PI * length * frequency / SPEED_OF_LIGHT).log10()
}

/// Post-array SNR of one path, dB.
pub fn path_snr(path: &PropagationPath, radio: &RadioConfig) -> f64 {
    radio.tx_power + 10.0 * (radio.antennas() as f64).log10()
        - free_space_path_loss(path.length, radio.carrier_frequency)
        - radio.reflection_loss * path.surface_sequence.len() as f64
        - radio.noise_power_dbm()
}

pub fn noise_variances(path: &PropagationPath, radio: &RadioConfig, model: &NoiseModel) -> Result<NoiseVariances> {
    match *model {
        NoiseModel::Fixed { delay, azimuth, zenith } => Ok(NoiseVariances { delay, azimuth, zenith }),
        NoiseModel::CrlbApprox {
            kappa_azimuth,
            kappa_zenith,
        } => variances_at_snr(path_snr(path, radio), radio, kappa_azimuth, kappa_zenith),
    }
}

fn variances_at_snr(snr_db: f64, radio: &RadioConfig, kappa_az: f64, kappa_ze: f64) -> Result<NoiseVariances> {
    let snr = 10f64.powf(snr_db / 10.0);
    if !(snr > 0.0 && snr.is_finite()) {
        return Err(Error::InvalidConfig(format!("path SNR {snr_db} dB is not usable")));
    }
    let beta = radio.rms_bandwidth();
    let n = radio.antennas() as f64;
    Ok(NoiseVariances {
        delay: 1.0 / (8.0 * PI * PI * beta * beta * snr),
        azimuth: kappa_az / (snr * n),
        zenith: kappa_ze / (snr * n),
    })
}

/// What the estimator sees for one path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathMeasurement {
    pub index: usize,
    /// Measured delay including the clock bias, seconds.
    pub delay: f64,
    /// Radians in `(-pi, pi]`.
    pub azimuth: f64,
    /// Radians in `[0, pi]`.
    pub zenith: f64,
    pub variances: NoiseVariances,
}

/// Ground-truth origin of a measurement. Only evaluation code reads this.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthTag {
    pub kind: PathKind,
    pub surface_sequence: Vec<usize>,
}

impl TruthTag {
    /// The origin a perfect associator would assign: `Some(0)` for LOS,
    /// `Some(i)` for a single bounce off surface `i`, `None` for paths the
    /// model cannot represent.
    pub fn true_origin(&self) -> Option<usize> {
        match self.kind {
            PathKind::Los => Some(0),
            PathKind::SingleBounce => self.surface_sequence.first().copied(),
            PathKind::MultiBounce => None,
        }
    }
}

/// A measurement bundled with its hidden truth. Estimation code takes
/// `&[PathMeasurement]`, so the tag never reaches it.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledMeasurement {
    pub measurement: PathMeasurement,
    pub truth: TruthTag,
}

/// Strips the truth tags.
pub fn estimator_view(labeled: &[LabeledMeasurement]) -> Vec<PathMeasurement> {
    labeled.iter().map(|l| l.measurement.clone()).collect()
}

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    if a > -PI && a <= PI {
        return a;
    }
    let w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Draws measurements for `paths` with a common clock bias. With
/// `add_noise == false` the measurements are exact but still carry the
/// model's variances.
pub fn synthesize_with(
    paths: &[PropagationPath],
    radio: &RadioConfig,
    model: &NoiseModel,
    clock_bias: f64,
    add_noise: bool,
    rng: &mut StreamRng,
) -> Result<Vec<LabeledMeasurement>> {
    if !clock_bias.is_finite() {
        return Err(Error::InvalidArgument("clock bias must be finite".into()));
    }
    paths
        .iter()
        .map(|p| {
            let variances = noise_variances(p, radio, model)?;
            let (n_tau, n_az, n_ze) = if add_noise {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                let c: f64 = rng.sample(StandardNormal);
                (
                    a * variances.delay.sqrt(),
                    b * variances.azimuth.sqrt(),
                    c * variances.zenith.sqrt(),
                )
            } else {
                (0.0, 0.0, 0.0)
            };
            Ok(LabeledMeasurement {
                measurement: PathMeasurement {
                    index: p.index,
                    delay: p.length / SPEED_OF_LIGHT + clock_bias + n_tau,
                    azimuth: wrap_angle(p.azimuth + n_az),
                    zenith: (p.zenith + n_ze).clamp(0.0, PI),
                    variances,
                },
                truth: TruthTag {
                    kind: p.kind,
                    surface_sequence: p.surface_sequence.clone(),
                },
            })
        })
        .collect()
}

/// [`synthesize_with`] with noise, from a seed.
pub fn synthesize(
    paths: &[PropagationPath],
    radio: &RadioConfig,
    model: &NoiseModel,
    clock_bias: f64,
    seed: u64,
) -> Result<Vec<LabeledMeasurement>> {
    synthesize_with(paths, radio, model, clock_bias, true, &mut rng_from_seed(seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raytrace::generate_paths;
    use crate::scene::{canyon_scene, CANYON_UE};
    use crate::Vec3;

    fn canyon_paths() -> Vec<PropagationPath> {
        generate_paths(&Vec3::from(CANYON_UE), &canyon_scene(), 2).unwrap()
    }

    #[test]
    fn doubling_length_costs_6_db() {
        let radio = RadioConfig::default();
        let p = canyon_paths()[0].clone();
        let mut q = p.clone();
        q.length *= 2.0;
        let drop = path_snr(&p, &radio) - path_snr(&q, &radio);
        assert!((drop - 20.0 * 2f64.log10()).abs() < 1e-12);
        assert!((drop - 6.02).abs() < 1e-2);
    }

    #[test]
    fn each_bounce_costs_reflection_loss() {
        let radio = RadioConfig::default();
        let p = canyon_paths()[0].clone();
        let mut q = p.clone();
        q.surface_sequence.push(1);
        assert!((path_snr(&p, &radio) - path_snr(&q, &radio) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn ten_db_shrinks_variances_tenfold() {
        let p = canyon_paths()[1].clone();
        let lo = noise_variances(&p, &RadioConfig::default(), &NoiseModel::default()).unwrap();
        let hi = noise_variances(&p, &RadioConfig::default().with_tx_power(10.0), &NoiseModel::default()).unwrap();
        for (a, b) in [(lo.delay, hi.delay), (lo.azimuth, hi.azimuth), (lo.zenith, hi.zenith)] {
            assert!((a / b - 10.0).abs() < 1e-9);
        }
    }

    #[test]
    fn fixed_mode_is_verbatim() {
        let model = NoiseModel::Fixed {
            delay: 1e-18,
            azimuth: 1e-6,
            zenith: 1e-6,
        };
        let v = noise_variances(&canyon_paths()[0], &RadioConfig::default(), &model).unwrap();
        assert_eq!(
            v,
            NoiseVariances {
                delay: 1e-18,
                azimuth: 1e-6,
                zenith: 1e-6
            }
        );
    }

    #[test]
    fn unusable_snr_is_a_config_error() {
        let radio = RadioConfig {
            tx_power: f64::NEG_INFINITY,
            ..RadioConfig::default()
        };
        assert!(matches!(
            noise_variances(&canyon_paths()[0], &radio, &NoiseModel::default()),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn noiseless_delay_is_truth_plus_bias() {
        let paths = canyon_paths();
        let m = synthesize_with(
            &paths,
            &RadioConfig::default(),
            &NoiseModel::default(),
            1e-7,
            false,
            &mut rng_from_seed(0),
        )
        .unwrap();
        for (p, m) in paths.iter().zip(&m) {
            assert_eq!(m.measurement.delay, p.length / SPEED_OF_LIGHT + 1e-7);
            assert_eq!(m.measurement.azimuth, p.azimuth);
            assert_eq!(m.measurement.zenith, p.zenith);
        }
    }

    #[test]
    fn seeded_synthesis_is_bit_identical() {
        let paths = canyon_paths();
        let r = RadioConfig::default();
        let a = synthesize(&paths, &r, &NoiseModel::default(), 1e-7, 42).unwrap();
        let b = synthesize(&paths, &r, &NoiseModel::default(), 1e-7, 42).unwrap();
        let c = synthesize(&paths, &r, &NoiseModel::default(), 1e-7, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn wrap_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
        assert!((wrap_angle(0.1 - 4.0 * PI) - 0.1).abs() < 1e-14);
    }

    #[test]
    fn truth_origin() {
        let paths = canyon_paths();
        let m = synthesize(&paths, &RadioConfig::default(), &NoiseModel::default(), 0.0, 1).unwrap();
        assert_eq!(m[0].truth.true_origin(), Some(0));
        for (p, l) in paths.iter().zip(&m) {
            match p.kind {
                PathKind::SingleBounce => assert_eq!(l.truth.true_origin(), p.last_surface()),
                PathKind::MultiBounce => assert_eq!(l.truth.true_origin(), None),
                PathKind::Los => {}
            }
        }
    }
}
