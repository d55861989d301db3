//! Hypothesis-driven path model, RANSAC over minimal path pairs and the final
//! refinement over the consensus set.
//!
//! For a hypothesis `h` and a user position `u` the model predicts the path
//! length `d` and the arrival angles at the base station. The per-path cost is
//! the Gaussian negative log-likelihood (up to constants)
//!
//! ```text
//! f = (tau - d/c - B)^2 / var_tau + wrap(theta - theta_pred)^2 / var_theta
//!     + wrap(phi - phi_pred)^2 / var_phi
//! ```
//!
//! A single bounce off surface `i` travels as far as the straight line from
//! the base station to the mirror image of `u` and arrives along it, so the
//! reflected prediction is the direct-path prediction evaluated at the image.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::associate::Hypothesis;
use crate::error::{Error, Result};
use crate::geom::{direction_angles, incidence_point, mirror_point, unit_from_angles, Scene, Vec3};
use crate::measurement::{wrap_angle, PathMeasurement};
use crate::rng::{derive_seed, rng_from_seed};
use crate::solver::{solve, BoxBounds, ResidualProblem};
use crate::SPEED_OF_LIGHT;

/// Upper 95%, 99% and 99.9% points of the chi-square law with 3 degrees of
/// freedom: the natural inlier thresholds for a 3-term normalized cost.
pub const CHI2_3_THRESHOLDS: [f64; 3] = [7.81, 11.34, 16.27];

/// User position and clock bias.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub position: Vec3,
    /// Seconds.
    pub clock_bias: f64,
}

impl State {
    pub fn new(position: Vec3, clock_bias: f64) -> Self {
        Self { position, clock_bias }
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_vec(vec![self.position.x, self.position.y, self.position.z, self.clock_bias])
    }

    pub fn from_vector(x: &DVector<f64>) -> Self {
        Self {
            position: Vec3::new(x[0], x[1], x[2]),
            clock_bias: x[3],
        }
    }
}

/// Predicted path length (m) and arrival angles (rad).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub distance: f64,
    pub azimuth: f64,
    pub zenith: f64,
}

/// Path prediction for origin `h` (0 = direct, otherwise a surface id), or
/// `None` when that reflection cannot exist from `u`.
pub fn predict_path(u: &Vec3, origin: usize, scene: &Scene) -> Option<Prediction> {
    predict_with_gradient(u, origin, scene).map(|(p, _)| p)
}

/// [`predict_path`] plus the derivatives of `(d, theta, phi)` with respect to
/// `u`, one row per quantity.
pub fn predict_with_gradient(u: &Vec3, origin: usize, scene: &Scene) -> Option<(Prediction, Matrix3<f64>)> {
    let b = scene.bs_position();
    let (v, dv_du) = if origin == 0 {
        if u == b {
            return None;
        }
        (u - b, Matrix3::identity())
    } else {
        let s = scene.surface(origin)?;
        incidence_point(u, b, s)?;
        let n = s.normal();
        (mirror_point(u, s) - b, Matrix3::identity() - 2.0 * n * n.transpose())
    };

    let d = v.norm();
    let (azimuth, zenith) = direction_angles(&v);
    let rho2 = v.x * v.x + v.y * v.y;
    let rho = rho2.sqrt();
    let dd = v.transpose() / d;
    let (dtheta, dphi) = if rho > 0.0 {
        (
            Vector3::new(-v.y / rho2, v.x / rho2, 0.0).transpose(),
            Vector3::new(v.x * v.z, v.y * v.z, -rho2).transpose() / (d * d * rho),
        )
    } else {
        (Vector3::zeros().transpose(), Vector3::zeros().transpose())
    };
    let mut grad = Matrix3::zeros();
    grad.set_row(0, &(dd * dv_du));
    grad.set_row(1, &(dtheta * dv_du));
    grad.set_row(2, &(dphi * dv_du));
    Some((
        Prediction {
            distance: d,
            azimuth,
            zenith,
        },
        grad,
    ))
}

/// Normalized residuals `[delay, azimuth, zenith]` of one measurement under
/// origin `h` at `state`.
pub fn path_residuals(m: &PathMeasurement, state: &State, origin: usize, scene: &Scene) -> Option<[f64; 3]> {
    let p = predict_path(&state.position, origin, scene)?;
    Some(residuals_from(m, state, &p))
}

fn residuals_from(m: &PathMeasurement, state: &State, p: &Prediction) -> [f64; 3] {
    [
        (m.delay - p.distance / SPEED_OF_LIGHT - state.clock_bias) / m.variances.delay.sqrt(),
        wrap_angle(m.azimuth - p.azimuth) / m.variances.azimuth.sqrt(),
        wrap_angle(m.zenith - p.zenith) / m.variances.zenith.sqrt(),
    ]
}

/// Per-path cost `f`; `+inf` when the hypothesis is geometrically infeasible.
pub fn residual_cost(m: &PathMeasurement, state: &State, origin: usize, scene: &Scene) -> f64 {
    path_residuals(m, state, origin, scene).map_or(f64::INFINITY, |r| r.iter().map(|v| v * v).sum())
}

/// Joint least-squares model over a set of (measurement, origin) pairs with
/// state `[u_x, u_y, u_z, B]` bounded by the scene box.
pub struct PathModel<'a> {
    scene: &'a Scene,
    terms: Vec<(&'a PathMeasurement, usize)>,
    bounds: BoxBounds,
}

impl<'a> PathModel<'a> {
    pub fn new(scene: &'a Scene, terms: Vec<(&'a PathMeasurement, usize)>) -> Self {
        let b = scene.bounds();
        let bounds = BoxBounds {
            lower: DVector::from_vec(vec![b.x_min, b.y_min, 0.0, f64::NEG_INFINITY]),
            upper: DVector::from_vec(vec![b.x_max, b.y_max, b.z_max, f64::INFINITY]),
        };
        Self { scene, terms, bounds }
    }

    /// Builds the model for the given hypotheses, looking up each one's
    /// measurement by index.
    pub fn from_hypotheses(
        scene: &'a Scene,
        hypotheses: &[Hypothesis],
        measurements: &'a [PathMeasurement],
    ) -> Result<Self> {
        let terms = hypotheses
            .iter()
            .map(|h| Ok((find_measurement(measurements, h.measurement_index)?, h.origin)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(scene, terms))
    }

    pub fn cost(&self, state: &State) -> f64 {
        self.terms
            .iter()
            .map(|(m, o)| residual_cost(m, state, *o, self.scene))
            .sum()
    }
}

impl ResidualProblem for PathModel<'_> {
    fn dim(&self) -> usize {
        4
    }

    fn bounds(&self) -> &BoxBounds {
        &self.bounds
    }

    fn residuals(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        let state = State::from_vector(x);
        let mut out = DVector::zeros(3 * self.terms.len());
        for (k, (m, origin)) in self.terms.iter().enumerate() {
            let r = path_residuals(m, &state, *origin, self.scene)?;
            out.fixed_rows_mut::<3>(3 * k).copy_from_slice(&r);
        }
        Some(out)
    }

    fn jacobian(&self, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        let u = Vec3::new(x[0], x[1], x[2]);
        let mut jac = DMatrix::zeros(3 * self.terms.len(), 4);
        for (k, (m, origin)) in self.terms.iter().enumerate() {
            let (_, grad) = predict_with_gradient(&u, *origin, self.scene)?;
            let sd = [
                m.variances.delay.sqrt(),
                m.variances.azimuth.sqrt(),
                m.variances.zenith.sqrt(),
            ];
            for j in 0..3 {
                jac[(3 * k, j)] = -grad[(0, j)] / (SPEED_OF_LIGHT * sd[0]);
                jac[(3 * k + 1, j)] = -grad[(1, j)] / sd[1];
                jac[(3 * k + 2, j)] = -grad[(2, j)] / sd[2];
            }
            jac[(3 * k, 3)] = -1.0 / sd[0];
        }
        Some(jac)
    }
}

pub(crate) fn find_measurement(measurements: &[PathMeasurement], index: usize) -> Result<&PathMeasurement> {
    measurements
        .iter()
        .find(|m| m.index == index)
        .ok_or_else(|| Error::InvalidArgument(format!("no measurement with index {index}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateSource {
    RansacWinner,
    Refined,
    AllPaths,
    PerfectInlier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateEstimate {
    pub state: State,
    /// Measurement indices of the inlier set.
    pub inliers: Vec<usize>,
    /// Sum of per-path costs over `inliers`.
    pub total_cost: f64,
    pub source: EstimateSource,
    pub converged: bool,
    /// Whether every solver run behind this estimate had a non-increasing
    /// sequence of accepted costs.
    pub monotone: bool,
}

fn monotone(trace: &[f64]) -> bool {
    trace.windows(2).all(|w| w[1] <= w[0])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RansacConfig {
    pub minimal_size: usize,
    pub success_prob: f64,
    pub outlier_ratio: f64,
    pub inlier_threshold: f64,
    pub max_iterations_cap: usize,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            minimal_size: 2,
            success_prob: 0.99,
            outlier_ratio: 3.0 / 7.0,
            inlier_threshold: CHI2_3_THRESHOLDS[1],
            max_iterations_cap: 10_000,
        }
    }
}

impl RansacConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(format!("ransac: {m}")));
        if self.minimal_size < 2 {
            return bad(format!("minimal_size {} < 2", self.minimal_size));
        }
        if !(self.success_prob > 0.0 && self.success_prob < 1.0) {
            return bad(format!("success_prob {} outside (0, 1)", self.success_prob));
        }
        if !(self.outlier_ratio >= 0.0 && self.outlier_ratio < 1.0) {
            return bad(format!("outlier_ratio {} outside [0, 1)", self.outlier_ratio));
        }
        if self.inlier_threshold.is_nan() || self.inlier_threshold <= 0.0 {
            return bad(format!("inlier_threshold {} must be positive", self.inlier_threshold));
        }
        if self.max_iterations_cap == 0 {
            return bad("max_iterations_cap must be >= 1".into());
        }
        Ok(())
    }

    pub fn iterations(&self) -> Result<usize> {
        ransac_iterations(
            self.success_prob,
            self.outlier_ratio,
            self.minimal_size,
            self.max_iterations_cap,
        )
    }
}

/// Number of draws needed to see an outlier-free sample of size `s` with
/// probability `p` when a fraction `eps` of the data are outliers.
pub fn ransac_iterations(p: f64, eps: f64, s: usize, cap: usize) -> Result<usize> {
    if !(p > 0.0 && p < 1.0) || !(0.0..1.0).contains(&eps) || s == 0 || cap == 0 {
        return Err(Error::InvalidConfig(format!(
            "ransac_iterations(p={p}, eps={eps}, s={s}, cap={cap})"
        )));
    }
    let clean = (1.0 - eps).powi(s as i32);
    if clean >= 1.0 {
        return Ok(1);
    }
    let n = ((1.0 - p).ln() / (1.0 - clean).ln()).ceil();
    Ok(if n.is_finite() { (n as usize).clamp(1, cap) } else { cap })
}

/// Extra information the multi-start needs beyond the minimal sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StartContext {
    /// Measured arrival direction of the path holding the direct-path
    /// hypothesis, if any.
    pub los_direction: Option<Vec3>,
}

impl StartContext {
    pub fn from_hypotheses(hypotheses: &[Hypothesis], measurements: &[PathMeasurement]) -> Self {
        let los_direction = hypotheses
            .iter()
            .find(|h| h.is_assigned() && h.is_los())
            .and_then(|h| find_measurement(measurements, h.measurement_index).ok())
            .map(|m| unit_from_angles(m.azimuth, m.zenith));
        Self { los_direction }
    }
}

/// Starting states for fitting `hypotheses`: back-projections along the
/// direct-path direction at 25/50/75% of the scene diagonal, the scene
/// center, and the mirrored back-projection of each single-bounce member.
/// All starts use zero clock bias.
pub fn initial_states(
    hypotheses: &[Hypothesis],
    measurements: &[PathMeasurement],
    scene: &Scene,
    ctx: &StartContext,
) -> Vec<State> {
    let bounds = scene.bounds();
    let b = scene.bs_position();
    let mut starts = Vec::with_capacity(5);
    if let Some(dir) = ctx.los_direction {
        for frac in [0.25, 0.5, 0.75] {
            starts.push(State::new(bounds.clamp(&(b + frac * bounds.diagonal() * dir)), 0.0));
        }
    }
    starts.push(State::new(bounds.center(), 0.0));
    for h in hypotheses.iter().filter(|h| !h.is_los()) {
        let (Ok(m), Some(s)) = (
            find_measurement(measurements, h.measurement_index),
            scene.surface(h.origin),
        ) else {
            continue;
        };
        let image = b + SPEED_OF_LIGHT * m.delay * unit_from_angles(m.azimuth, m.zenith);
        starts.push(State::new(bounds.clamp(&mirror_point(&image, s)), 0.0));
    }
    starts
}

/// Multi-start fit of `hypotheses`; the lowest-cost converged solution.
pub fn fit_hypotheses(
    hypotheses: &[Hypothesis],
    measurements: &[PathMeasurement],
    scene: &Scene,
    ctx: &StartContext,
    source: EstimateSource,
) -> Result<Option<StateEstimate>> {
    let model = PathModel::from_hypotheses(scene, hypotheses, measurements)?;
    let mut best: Option<(State, f64)> = None;
    let mut all_monotone = true;
    for start in initial_states(hypotheses, measurements, scene, ctx) {
        let Ok(res) = solve(&model, &start.to_vector()) else {
            continue;
        };
        all_monotone &= monotone(&res.cost_trace);
        if res.converged && res.cost.is_finite() && best.is_none_or(|(_, c)| res.cost < c) {
            best = Some((State::from_vector(&res.x), res.cost));
        }
    }
    Ok(best.map(|(state, total_cost)| StateEstimate {
        state,
        inliers: hypotheses.iter().map(|h| h.measurement_index).collect(),
        total_cost,
        source,
        converged: true,
        monotone: all_monotone,
    }))
}

/// Candidate state from a minimal sample.
pub fn estimate_minimal(
    subset: &[Hypothesis],
    measurements: &[PathMeasurement],
    scene: &Scene,
    ctx: &StartContext,
) -> Result<Option<StateEstimate>> {
    fit_hypotheses(subset, measurements, scene, ctx, EstimateSource::RansacWinner)
}

/// One RANSAC draw: the sampled hypotheses, the fitted state (if any) and
/// the cost of every assigned path at that state.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub iteration: usize,
    pub sample: Vec<usize>,
    pub state: State,
    /// `(measurement index, f)` for every assigned hypothesis.
    pub costs: Vec<(usize, f64)>,
    pub monotone: bool,
}

impl Candidate {
    pub fn inliers(&self, threshold: f64) -> Vec<usize> {
        self.costs
            .iter()
            .filter(|(_, f)| *f <= threshold)
            .map(|(i, _)| *i)
            .collect()
    }

    pub fn inlier_cost(&self, threshold: f64) -> f64 {
        self.costs
            .iter()
            .filter(|(_, f)| *f <= threshold)
            .fold(0.0, |acc, (_, f)| acc + f)
    }
}

/// Runs the sampling and minimal fits. Candidates do not depend on the inlier
/// threshold, so one set can be scored against several thresholds.
pub fn ransac_candidates(
    hypotheses: &[Hypothesis],
    measurements: &[PathMeasurement],
    scene: &Scene,
    config: &RansacConfig,
    seed: u64,
) -> Result<Vec<Candidate>> {
    config.validate()?;
    let assigned: Vec<Hypothesis> = hypotheses.iter().filter(|h| h.is_assigned()).copied().collect();
    if assigned.len() < config.minimal_size {
        return Err(Error::NotEnoughPaths {
            needed: config.minimal_size,
            available: assigned.len(),
        });
    }
    let ctx = StartContext::from_hypotheses(&assigned, measurements);
    let terms = assigned
        .iter()
        .map(|h| Ok((find_measurement(measurements, h.measurement_index)?, h)))
        .collect::<Result<Vec<_>>>()?;

    let mut candidates = Vec::new();
    for iteration in 0..config.iterations()? {
        let mut rng = rng_from_seed(derive_seed(seed, &[iteration as u64]));
        let mut picks = sample(&mut rng, assigned.len(), config.minimal_size).into_vec();
        picks.sort_unstable();
        let subset: Vec<Hypothesis> = picks.iter().map(|&k| assigned[k]).collect();
        let Some(est) = estimate_minimal(&subset, measurements, scene, &ctx)? else {
            continue;
        };
        let costs = terms
            .iter()
            .map(|(m, h)| (h.measurement_index, residual_cost(m, &est.state, h.origin, scene)))
            .collect();
        candidates.push(Candidate {
            iteration,
            sample: subset.iter().map(|h| h.measurement_index).collect(),
            state: est.state,
            costs,
            monotone: est.monotone,
        });
    }
    Ok(candidates)
}

/// Most inliers wins, then lower inlier cost, then earlier iteration.
pub fn select_winner(candidates: &[Candidate], threshold: f64) -> Result<StateEstimate> {
    let mut best: Option<(&Candidate, usize, f64)> = None;
    for c in candidates {
        let n = c.inliers(threshold).len();
        let cost = c.inlier_cost(threshold);
        let better = match best {
            None => true,
            Some((bc, bn, bcost)) => {
                n > bn || (n == bn && (cost < bcost || (cost == bcost && c.iteration < bc.iteration)))
            }
        };
        if better {
            best = Some((c, n, cost));
        }
    }
    let (c, _, total_cost) = best.ok_or(Error::NoConsensus)?;
    Ok(StateEstimate {
        state: c.state,
        inliers: c.inliers(threshold),
        total_cost,
        source: EstimateSource::RansacWinner,
        converged: true,
        monotone: c.monotone,
    })
}

/// Full RANSAC: sample, fit, score, keep the largest consensus.
pub fn run_ransac(
    hypotheses: &[Hypothesis],
    measurements: &[PathMeasurement],
    scene: &Scene,
    config: &RansacConfig,
    seed: u64,
) -> Result<StateEstimate> {
    let candidates = ransac_candidates(hypotheses, measurements, scene, config, seed)?;
    select_winner(&candidates, config.inlier_threshold)
}

/// Maximum-likelihood refinement over the winner's inliers, started at the
/// winner's state. Falls back to the winner (marked not converged) when the
/// problem cannot be solved.
pub fn refine(
    winner: &StateEstimate,
    hypotheses: &[Hypothesis],
    measurements: &[PathMeasurement],
    scene: &Scene,
) -> Result<StateEstimate> {
    let inlier_hyps: Vec<Hypothesis> = winner
        .inliers
        .iter()
        .map(|i| {
            hypotheses
                .iter()
                .find(|h| h.measurement_index == *i && h.is_assigned())
                .copied()
                .ok_or_else(|| Error::InvalidArgument(format!("inlier {i} has no assigned hypothesis")))
        })
        .collect::<Result<_>>()?;
    let unrefined = || StateEstimate {
        converged: false,
        ..winner.clone()
    };
    if inlier_hyps.len() < 2 {
        return Ok(unrefined());
    }
    let model = PathModel::from_hypotheses(scene, &inlier_hyps, measurements)?;
    match solve(&model, &winner.state.to_vector()) {
        Ok(res) => Ok(StateEstimate {
            state: State::from_vector(&res.x),
            inliers: winner.inliers.clone(),
            total_cost: res.cost,
            source: EstimateSource::Refined,
            converged: res.converged,
            monotone: winner.monotone && monotone(&res.cost_trace),
        }),
        Err(_) => Ok(unrefined()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::associate::HypothesisStatus;
    use crate::measurement::{estimator_view, synthesize_with, NoiseModel, NoiseVariances, RadioConfig};
    use crate::raytrace::{generate_paths, PathKind, PropagationPath};
    use crate::rng::rng_from_seed;
    use crate::scene::{canyon_scene, CANYON_UE};

    const BIAS: f64 = 100e-9;

    fn truth_hypotheses(paths: &[PropagationPath]) -> Vec<Hypothesis> {
        paths
            .iter()
            .map(|p| match p.kind {
                PathKind::Los => Hypothesis::los(p.index),
                _ => Hypothesis::surface(p.index, p.last_surface().unwrap()),
            })
            .collect()
    }

    fn noiseless() -> (Scene, Vec<PropagationPath>, Vec<PathMeasurement>) {
        let scene = canyon_scene();
        let paths = generate_paths(&Vec3::from(CANYON_UE), &scene, 2).unwrap();
        let m = synthesize_with(
            &paths,
            &RadioConfig::default(),
            &NoiseModel::default(),
            BIAS,
            false,
            &mut rng_from_seed(0),
        )
        .unwrap();
        (scene, paths, estimator_view(&m))
    }

    #[test]
    fn predictions_match_tracer() {
        let (scene, paths, _) = noiseless();
        let u = Vec3::from(CANYON_UE);
        for p in paths.iter().filter(|p| p.kind != PathKind::MultiBounce) {
            let origin = p.last_surface().unwrap_or(0);
            let pred = predict_path(&u, origin, &scene).unwrap();
            assert!((pred.distance - p.length).abs() < 1e-9);
            assert!((pred.azimuth - p.azimuth).abs() < 1e-9);
            assert!((pred.zenith - p.zenith).abs() < 1e-9);
        }
    }

    #[test]
    fn prediction_behind_plane_is_infeasible() {
        let scene = canyon_scene();
        // Surface 3 sits at x = 12 facing -x; a user beyond it cannot bounce off it.
        assert!(predict_path(&Vec3::new(13.0, 0.0, 1.0), 3, &scene).is_none());
        assert_eq!(
            residual_cost(
                &noiseless().2[1],
                &State::new(Vec3::new(13.0, 0.0, 1.0), 0.0),
                3,
                &scene
            ),
            f64::INFINITY
        );
    }

    #[test]
    fn cost_examples() {
        let (scene, paths, meas) = noiseless();
        let truth = State::new(Vec3::from(CANYON_UE), BIAS);
        let hyps = truth_hypotheses(&paths);
        for (m, h) in meas.iter().zip(&hyps) {
            if paths[m.index - 1].kind.is_modelled() {
                assert!(residual_cost(m, &truth, h.origin, &scene) < 1e-12);
            } else {
                let c = residual_cost(m, &truth, h.origin, &scene);
                assert!(c > 100.0 * CHI2_3_THRESHOLDS[2]);
            }
        }
        let mut shifted = meas[0].clone();
        shifted.delay += shifted.variances.delay.sqrt();
        assert!((residual_cost(&shifted, &truth, 0, &scene) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn iteration_formula() {
        assert_eq!(ransac_iterations(0.99, 3.0 / 7.0, 2, 10_000).unwrap(), 12);
        assert_eq!(ransac_iterations(0.99, 0.0, 2, 10_000).unwrap(), 1);
        assert_eq!(ransac_iterations(0.99, 0.95, 2, 100).unwrap(), 100);
        assert!(ransac_iterations(1.0, 0.1, 2, 10).is_err());
    }

    #[test]
    fn minimal_fit_recovers_truth() {
        let (scene, paths, meas) = noiseless();
        let hyps = truth_hypotheses(&paths);
        let ctx = StartContext::from_hypotheses(&hyps, &meas);
        let est = estimate_minimal(&[hyps[0], hyps[1]], &meas, &scene, &ctx)
            .unwrap()
            .unwrap();
        assert!(est.total_cost < 1e-9, "{est:?}");
        assert!((est.state.position - Vec3::from(CANYON_UE)).norm() < 1e-4);
    }

    #[test]
    fn infeasible_subset_gives_nothing() {
        let (scene, _, meas) = noiseless();
        // Two copies of a hypothesis on a surface id that does not exist.
        let bogus = [Hypothesis::surface(2, 9), Hypothesis::surface(3, 9)];
        let ctx = StartContext { los_direction: None };
        assert!(estimate_minimal(&bogus, &meas, &scene, &ctx).unwrap().is_none());
    }

    #[test]
    fn noiseless_ransac_separates_multi_bounce() {
        let (scene, paths, meas) = noiseless();
        let hyps = truth_hypotheses(&paths);
        let cfg = RansacConfig::default();
        let winner = run_ransac(&hyps, &meas, &scene, &cfg, 3).unwrap();
        let expected: Vec<usize> = paths.iter().filter(|p| p.kind.is_modelled()).map(|p| p.index).collect();
        assert_eq!(winner.inliers, expected);
        let refined = refine(&winner, &hyps, &meas, &scene).unwrap();
        assert!(refined.total_cost <= winner.total_cost);
        assert!((refined.state.position - Vec3::from(CANYON_UE)).norm() < 1e-4);
        assert!((refined.state.clock_bias - BIAS).abs() < 1e-12);
    }

    #[test]
    fn too_few_assigned_paths() {
        let (scene, _, meas) = noiseless();
        let mut h = Hypothesis::surface(2, 1);
        h.status = HypothesisStatus::RejectedLowScore;
        let hyps = [Hypothesis::los(1), h];
        assert!(matches!(
            run_ransac(&hyps, &meas, &scene, &RansacConfig::default(), 0),
            Err(Error::NotEnoughPaths {
                needed: 2,
                available: 1
            })
        ));
    }

    #[test]
    fn variance_scaling_scales_cost() {
        let (scene, _, meas) = noiseless();
        let off = State::new(Vec3::new(-14.9, -15.05, 0.2), BIAS + 1e-10);
        let mut tight = meas[1].clone();
        let v = tight.variances;
        tight.variances = NoiseVariances {
            delay: v.delay / 10.0,
            azimuth: v.azimuth / 10.0,
            zenith: v.zenith / 10.0,
        };
        let a = residual_cost(&meas[1], &off, 1, &scene);
        let b = residual_cost(&tight, &off, 1, &scene);
        assert!((b / a - 10.0).abs() < 1e-9);
    }
}
