//! Map-aided localization of a single user from one multi-antenna base station.
//!
//! The pipeline mirrors how the estimator sees the world:
//!
//! 1. [`geom`] holds the planar environment model and its ray queries.
//! 2. [`raytrace`] enumerates the specular paths that actually exist for a
//!    given user position (the generative side).
//! 3. [`measurement`] turns those paths into noisy delay/angle observations
//!    with a shared clock bias.
//! 4. [`associate`] maps each observation to a geometric origin by casting
//!    perturbed rays into the environment model.
//! 5. [`robust`] runs RANSAC over those hypotheses to reject multi-bounce
//!    paths, then refines position and clock bias over the consensus set
//!    with the bounded Levenberg-Marquardt engine in [`solver`].
//! 6. [`sweep`] and [`metrics`] drive Monte Carlo experiments over transmit
//!    power and inlier threshold.

pub mod associate;
pub mod error;
pub mod geom;
pub mod measurement;
pub mod metrics;
pub mod raytrace;
pub mod rng;
pub mod robust;
pub mod scene;
pub mod solver;
pub mod sweep;
pub mod tolerances;

pub use error::{Error, Result};
pub use geom::{Bounds, RayHit, Scene, Surface, Vec3};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
