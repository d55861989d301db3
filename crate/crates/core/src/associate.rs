//! Path-to-surface association.
//!
//! The earliest measurement is taken as the direct path. Every other
//! measurement is explained by casting `K` rays from the base station along
//! directions drawn around its measured angle of arrival and counting which
//! surface each ray strikes first.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{cast_unit, unit_from_angles, Scene, Vec3};
use crate::measurement::PathMeasurement;
use crate::rng::{derive_seed, rng_from_seed};

/// Origin value reserved for the direct path.
pub const LOS_ORIGIN: usize = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HypothesisStatus {
    Assigned,
    RejectedLowScore,
}

/// Geometric origin proposed for one measurement: `0` for the direct path,
/// otherwise the id of the reflecting surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub measurement_index: usize,
    pub origin: usize,
    pub score: f64,
    pub status: HypothesisStatus,
}

impl Hypothesis {
    pub fn los(measurement_index: usize) -> Self {
        Self {
            measurement_index,
            origin: LOS_ORIGIN,
            score: 1.0,
            status: HypothesisStatus::Assigned,
        }
    }

    pub fn surface(measurement_index: usize, surface_id: usize) -> Self {
        Self {
            measurement_index,
            origin: surface_id,
            score: 1.0,
            status: HypothesisStatus::Assigned,
        }
    }

    pub fn is_assigned(&self) -> bool {
        self.status == HypothesisStatus::Assigned
    }

    pub fn is_los(&self) -> bool {
        self.origin == LOS_ORIGIN
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssociationConfig {
    /// Perturbed rays per measurement.
    pub samples: usize,
    /// Minimum winning score, exclusive.
    pub threshold: f64,
    pub seed: u64,
}

impl Default for AssociationConfig {
    fn default() -> Self {
        Self {
            samples: 1000,
            threshold: 0.7,
            seed: 0,
        }
    }
}

impl AssociationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::InvalidConfig("association: samples must be >= 1".into()));
        }
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "association: threshold {} outside (0, 1]",
                self.threshold
            )));
        }
        Ok(())
    }
}

/// Index of the measurement with the smallest delay; ties go to the lowest
/// index.
pub fn pick_los(measurements: &[PathMeasurement]) -> Result<usize> {
    measurements
        .iter()
        .min_by(|a, b| a.delay.total_cmp(&b.delay).then(a.index.cmp(&b.index)))
        .map(|m| m.index)
        .ok_or_else(|| Error::InvalidArgument("no measurements to pick the direct path from".into()))
}

/// `K` unit directions with Gaussian-perturbed azimuth and zenith.
pub fn sample_directions(
    azimuth: f64,
    zenith: f64,
    sigma_azimuth: f64,
    sigma_zenith: f64,
    samples: usize,
    seed: u64,
) -> Vec<Vec3> {
    let mut rng = rng_from_seed(seed);
    (0..samples)
        .map(|_| {
            let da: f64 = rng.sample(StandardNormal);
            let dz: f64 = rng.sample(StandardNormal);
            let theta = azimuth + sigma_azimuth * da;
            let phi = reflect_zenith(zenith + sigma_zenith * dz);
            unit_from_angles(theta, phi)
        })
        .collect()
}

fn reflect_zenith(mut phi: f64) -> f64 {
    // A wide draw can leave [0, pi] more than once.
    phi = phi.rem_euclid(2.0 * PI);
    if phi > PI {
        2.0 * PI - phi
    } else {
        phi
    }
}

/// Hit counts per surface for a bundle of rays from the base station.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SurfaceScores {
    pub counts: BTreeMap<usize, usize>,
    pub misses: usize,
    pub total: usize,
}

impl SurfaceScores {
    pub fn score(&self, surface_id: usize) -> f64 {
        self.counts
            .get(&surface_id)
            .map_or(0.0, |&c| c as f64 / self.total as f64)
    }

    pub fn miss_fraction(&self) -> f64 {
        self.misses as f64 / self.total as f64
    }

    /// Highest-scoring surface; ties go to the lowest id.
    pub fn best(&self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, usize)> = None;
        for (&id, &c) in &self.counts {
            if best.is_none_or(|(_, bc)| c > bc) {
                best = Some((id, c));
            }
        }
        best.map(|(id, c)| (id, c as f64 / self.total as f64))
    }
}

/// Fraction of rays whose first hit is each surface.
pub fn score_surfaces(directions: &[Vec3], scene: &Scene) -> Result<SurfaceScores> {
    if directions.is_empty() {
        return Err(Error::InvalidArgument("no directions to score".into()));
    }
    let b = scene.bs_position();
    let mut scores = SurfaceScores {
        total: directions.len(),
        ..Default::default()
    };
    for d in directions {
        let norm = d.norm();
        if norm.is_nan() || norm <= 0.0 {
            return Err(Error::InvalidArgument("ray direction must be non-zero".into()));
        }
        match cast_unit(&(d / norm), b, scene) {
            Some(hit) => *scores.counts.entry(hit.surface_id).or_default() += 1,
            None => scores.misses += 1,
        }
    }
    Ok(scores)
}

/// Seed of the ray bundle for measurement `index`.
pub fn measurement_seed(config: &AssociationConfig, index: usize) -> u64 {
    derive_seed(config.seed, &[index as u64])
}

/// Assigns an origin to every measurement, in input order.
pub fn associate_all(
    measurements: &[PathMeasurement],
    scene: &Scene,
    config: &AssociationConfig,
) -> Result<Vec<Hypothesis>> {
    config.validate()?;
    let los = pick_los(measurements)?;
    measurements
        .iter()
        .map(|m| {
            if m.index == los {
                return Ok(Hypothesis::los(m.index));
            }
            let dirs = sample_directions(
                m.azimuth,
                m.zenith,
                m.variances.azimuth.sqrt(),
                m.variances.zenith.sqrt(),
                config.samples,
                measurement_seed(config, m.index),
            );
            let scores = score_surfaces(&dirs, scene)?;
            Ok(match scores.best() {
                Some((id, score)) if score > config.threshold => Hypothesis {
                    measurement_index: m.index,
                    origin: id,
                    score,
                    status: HypothesisStatus::Assigned,
                },
                best => {
                    let (origin, score) = best.unwrap_or((LOS_ORIGIN, 0.0));
                    Hypothesis {
                        measurement_index: m.index,
                        origin,
                        score,
                        status: HypothesisStatus::RejectedLowScore,
                    }
                }
            })
        })
        .collect()
}
