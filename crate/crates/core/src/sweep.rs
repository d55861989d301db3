//! Monte Carlo sweeps over transmit power and inlier threshold.
//!
//! Every (power, run) pair is an independent work item. Its random streams
//! are derived from the master seed and the run number only, so the same run
//! sees the same standardized noise at every power level and results do not
//! depend on how many worker threads execute the sweep.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::associate::{associate_all, AssociationConfig, Hypothesis, HypothesisStatus};
use crate::error::{Error, Result};
use crate::geom::{Scene, Vec3};
use crate::measurement::{estimator_view, synthesize_with, LabeledMeasurement, NoiseModel, RadioConfig};
use crate::metrics::{
    final_surface_rate, metric_association_rate, metric_fa_md, rmse_rate, AssociationOutcome, PathLabel, Rate,
};
use crate::raytrace::{generate_paths, PathKind, PropagationPath, DEFAULT_MAX_BOUNCES};
use crate::rng::{derive_seed, rng_from_seed};
use crate::robust::{
    fit_hypotheses, ransac_candidates, refine, residual_cost, select_winner, EstimateSource, PathModel, RansacConfig,
    StartContext, State, StateEstimate, CHI2_3_THRESHOLDS,
};
use crate::scene::{canyon_scene, load_scene, CANYON_UE};
use crate::solver::solve;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    Ransac,
    AllPaths,
    PerfectInlier,
}

impl Baseline {
    pub const ALL: [Baseline; 3] = [Baseline::Ransac, Baseline::AllPaths, Baseline::PerfectInlier];

    pub fn name(self) -> &'static str {
        match self {
            Self::Ransac => "ransac",
            Self::AllPaths => "all_paths",
            Self::PerfectInlier => "perfect_inlier",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown baseline {s:?}")))
    }
}

fn default_powers() -> Vec<f64> {
    (0..=10).map(|k| -40.0 + 5.0 * k as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Scene file; the built-in canyon when absent.
    pub scene: Option<PathBuf>,
    pub ue_position: [f64; 3],
    /// Seconds.
    pub clock_bias: f64,
    pub max_bounces: usize,
    pub radio: RadioConfig,
    pub noise: NoiseModel,
    pub association: AssociationConfig,
    pub ransac: RansacConfig,
    /// Inlier thresholds to sweep; overrides `ransac.inlier_threshold`.
    pub thresholds: Vec<f64>,
    /// dBm.
    pub tx_power_sweep: Vec<f64>,
    pub runs: usize,
    pub baselines: Vec<Baseline>,
    pub master_seed: u64,
    /// Exact measurements (the variances still weight the costs).
    pub zero_noise: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scene: None,
            ue_position: CANYON_UE,
            clock_bias: 100e-9,
            max_bounces: DEFAULT_MAX_BOUNCES,
            radio: RadioConfig::default(),
            noise: NoiseModel::default(),
            association: AssociationConfig::default(),
            ransac: RansacConfig::default(),
            thresholds: CHI2_3_THRESHOLDS.to_vec(),
            tx_power_sweep: default_powers(),
            runs: 500,
            baselines: Baseline::ALL.to_vec(),
            master_seed: 2025,
            zero_noise: false,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.runs == 0 {
            return bad("runs must be >= 1");
        }
        if self.tx_power_sweep.is_empty() || self.thresholds.is_empty() {
            return bad("power and threshold sweeps must be non-empty");
        }
        if self.tx_power_sweep.iter().any(|p| !p.is_finite()) {
            return bad("tx powers must be finite");
        }
        if self.thresholds.iter().any(|t| t.is_nan() || *t <= 0.0) {
            return bad("thresholds must be positive");
        }
        if self.max_bounces == 0 {
            return bad("max_bounces must be >= 1");
        }
        if !self.clock_bias.is_finite() {
            return bad("clock bias must be finite");
        }
        self.radio.validate()?;
        self.noise.validate()?;
        self.association.validate()?;
        self.ransac.validate()
    }

    pub fn load_scene(&self) -> Result<Scene> {
        match &self.scene {
            Some(p) => load_scene(p),
            None => Ok(canyon_scene()),
        }
    }

    pub fn has(&self, b: Baseline) -> bool {
        self.baselines.contains(&b)
    }
}

/// Association report row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationRow {
    pub index: usize,
    pub origin: usize,
    pub score: f64,
    pub status: HypothesisStatus,
    pub true_kind: PathKind,
    pub true_surfaces: Vec<usize>,
}

/// RANSAC outcome for one threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RansacTrial {
    pub threshold: f64,
    pub winner: Option<StateEstimate>,
    pub refined: Option<StateEstimate>,
    /// Label per measurement, in measurement order.
    pub labels: Vec<PathLabel>,
    pub position_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineTrial {
    pub estimate: Option<StateEstimate>,
    pub position_error: f64,
}

/// Everything recorded for one (power, run) work item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub tx_power_dbm: f64,
    pub run: usize,
    pub association: Vec<AssociationRow>,
    pub ransac: Vec<RansacTrial>,
    pub all_paths: Option<BaselineTrial>,
    pub perfect_inlier: Option<BaselineTrial>,
    /// Per-path costs at the refined state for the first threshold.
    pub path_costs: Vec<f64>,
}

impl TrialRecord {
    pub fn association_outcomes(&self) -> Vec<AssociationOutcome> {
        self.association
            .iter()
            .map(|r| AssociationOutcome {
                path_index: r.index,
                kind: r.true_kind,
                true_origin: match r.true_kind {
                    PathKind::Los => Some(0),
                    PathKind::SingleBounce => r.true_surfaces.first().copied(),
                    PathKind::MultiBounce => None,
                },
                assigned_origin: (r.status == HypothesisStatus::Assigned).then_some(r.origin),
            })
            .collect()
    }

    pub fn classification(&self, t: usize) -> Vec<(PathKind, PathLabel)> {
        self.association
            .iter()
            .map(|r| r.true_kind)
            .zip(self.ransac[t].labels.iter().copied())
            .collect()
    }

    /// All solver runs in this trial kept non-increasing accepted costs.
    pub fn solver_monotone(&self) -> bool {
        let est = |e: &Option<StateEstimate>| e.as_ref().is_none_or(|e| e.monotone);
        self.ransac.iter().all(|r| est(&r.winner) && est(&r.refined))
            && self.all_paths.as_ref().is_none_or(|b| est(&b.estimate))
            && self.perfect_inlier.as_ref().is_none_or(|b| est(&b.estimate))
    }
}

/// Output of [`run_sweep`].
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub config: ExperimentConfig,
    pub paths: Vec<PropagationPath>,
    /// Ordered by power, then run.
    pub trials: Vec<TrialRecord>,
}

/// Path census `(los, single, multi)`.
pub fn census(paths: &[PropagationPath]) -> (usize, usize, usize) {
    let count = |k| paths.iter().filter(|p| p.kind == k).count();
    (
        count(PathKind::Los),
        count(PathKind::SingleBounce),
        count(PathKind::MultiBounce),
    )
}

fn position_error(est: Option<&StateEstimate>, truth: &Vec3, fallback: &Vec3) -> f64 {
    // A trial without any estimate is scored at the centre of the region.
    (est.map_or(*fallback, |e| e.state.position) - truth).norm()
}

pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepResult> {
    let scene = config.load_scene()?;
    run_sweep_on(config, &scene)
}

pub fn run_sweep_on(config: &ExperimentConfig, scene: &Scene) -> Result<SweepResult> {
    config.validate()?;
    let ue = Vec3::from(config.ue_position);
    let paths = generate_paths(&ue, scene, config.max_bounces)?;
    if paths.iter().filter(|p| p.kind.is_modelled()).count() < config.ransac.minimal_size {
        return Err(Error::InvalidConfig(format!(
            "scene yields {} modelled paths, fewer than the minimal sample",
            paths.iter().filter(|p| p.kind.is_modelled()).count()
        )));
    }
    // Noise variances must be usable at every power before any work starts.
    for &p in &config.tx_power_sweep {
        let radio = config.radio.with_tx_power(p);
        for path in &paths {
            crate::measurement::noise_variances(path, &radio, &config.noise)?;
        }
    }

    let items: Vec<(usize, usize)> = (0..config.tx_power_sweep.len())
        .flat_map(|p| (0..config.runs).map(move |r| (p, r)))
        .collect();
    let trials = items
        .par_iter()
        .map(|&(p, r)| run_trial(config, scene, &paths, config.tx_power_sweep[p], r))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        config: config.clone(),
        paths,
        trials,
    })
}

/// One Monte Carlo trial at `tx_power` dBm.
pub fn run_trial(
    config: &ExperimentConfig,
    scene: &Scene,
    paths: &[PropagationPath],
    tx_power: f64,
    run: usize,
) -> Result<TrialRecord> {
    let ue = Vec3::from(config.ue_position);
    let fallback = scene.bounds().center();
    let radio = config.radio.with_tx_power(tx_power);
    let run_id = run as u64;

    let mut noise_rng = rng_from_seed(derive_seed(config.master_seed, &[0, run_id]));
    let labeled = synthesize_with(
        paths,
        &radio,
        &config.noise,
        config.clock_bias,
        !config.zero_noise,
        &mut noise_rng,
    )?;
    let meas = estimator_view(&labeled);

    let assoc_cfg = AssociationConfig {
        seed: derive_seed(config.master_seed, &[1, run_id, config.association.seed]),
        ..config.association.clone()
    };
    let hyps = associate_all(&meas, scene, &assoc_cfg)?;
    let association = association_rows(&hyps, &labeled);

    let mut ransac = Vec::new();
    let mut path_costs = Vec::new();
    if config.has(Baseline::Ransac) {
        let seed = derive_seed(config.master_seed, &[2, run_id]);
        let candidates = match ransac_candidates(&hyps, &meas, scene, &config.ransac, seed) {
            Ok(c) => c,
            Err(Error::NotEnoughPaths { .. }) => Vec::new(),
            Err(e) => return Err(e),
        };
        for (k, &threshold) in config.thresholds.iter().enumerate() {
            let winner = select_winner(&candidates, threshold).ok();
            let refined = winner.as_ref().map(|w| refine(w, &hyps, &meas, scene)).transpose()?;
            let labels = hyps
                .iter()
                .map(|h| match (&winner, h.status) {
                    (_, HypothesisStatus::RejectedLowScore) => PathLabel::Rejected,
                    (Some(w), _) if w.inliers.contains(&h.measurement_index) => PathLabel::Inlier,
                    _ => PathLabel::Outlier,
                })
                .collect();
            if k == 0 {
                if let Some(est) = refined.as_ref() {
                    path_costs = meas
                        .iter()
                        .zip(&hyps)
                        .map(|(m, h)| residual_cost(m, &est.state, h.origin, scene))
                        .collect();
                }
            }
            ransac.push(RansacTrial {
                threshold,
                position_error: position_error(refined.as_ref(), &ue, &fallback),
                winner,
                refined,
                labels,
            });
        }
    }

    let all_paths = config
        .has(Baseline::AllPaths)
        .then(|| -> Result<BaselineTrial> {
            let assigned: Vec<Hypothesis> = hyps.iter().filter(|h| h.is_assigned()).copied().collect();
            let ctx = StartContext::from_hypotheses(&assigned, &meas);
            let estimate = if assigned.len() >= config.ransac.minimal_size {
                fit_hypotheses(&assigned, &meas, scene, &ctx, EstimateSource::AllPaths)?
            } else {
                None
            };
            Ok(BaselineTrial {
                position_error: position_error(estimate.as_ref(), &ue, &fallback),
                estimate,
            })
        })
        .transpose()?;

    let perfect_inlier = config
        .has(Baseline::PerfectInlier)
        .then(|| -> Result<BaselineTrial> {
            let estimate = perfect_inlier_estimate(&labeled, scene, &State::new(ue, config.clock_bias))?;
            Ok(BaselineTrial {
                position_error: position_error(estimate.as_ref(), &ue, &fallback),
                estimate,
            })
        })
        .transpose()?;

    Ok(TrialRecord {
        tx_power_dbm: tx_power,
        run,
        association,
        ransac,
        all_paths,
        perfect_inlier,
        path_costs,
    })
}

fn association_rows(hyps: &[Hypothesis], labeled: &[LabeledMeasurement]) -> Vec<AssociationRow> {
    hyps.iter()
        .zip(labeled)
        .map(|(h, l)| AssociationRow {
            index: h.measurement_index,
            origin: h.origin,
            score: h.score,
            status: h.status,
            true_kind: l.truth.kind,
            true_surfaces: l.truth.surface_sequence.clone(),
        })
        .collect()
}

/// Oracle baseline: the true LOS and single-bounce paths with their true
/// origins, solved from the true state.
pub fn perfect_inlier_estimate(
    labeled: &[LabeledMeasurement],
    scene: &Scene,
    truth: &State,
) -> Result<Option<StateEstimate>> {
    let hyps: Vec<Hypothesis> = labeled
        .iter()
        .filter_map(|l| {
            l.truth
                .true_origin()
                .map(|o| Hypothesis::surface(l.measurement.index, o))
        })
        .collect();
    let meas = estimator_view(labeled);
    let model = PathModel::from_hypotheses(scene, &hyps, &meas)?;
    Ok(solve(&model, &truth.to_vector()).ok().map(|res| StateEstimate {
        state: State::from_vector(&res.x),
        inliers: hyps.iter().map(|h| h.measurement_index).collect(),
        total_cost: res.cost,
        source: EstimateSource::PerfectInlier,
        converged: res.converged,
        monotone: res.cost_trace.windows(2).all(|w| w[1] <= w[0]),
    }))
}

/// One aggregated CSV row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub tx_power_dbm: f64,
    pub threshold: Option<f64>,
    pub series: String,
    pub metric: f64,
    pub stderr: f64,
}

/// Aggregates per figure, keyed by file name.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepSummary {
    pub association: Vec<SummaryRow>,
    pub false_alarm: Vec<SummaryRow>,
    pub missed_detection: Vec<SummaryRow>,
    pub rmse: Vec<SummaryRow>,
}

fn series_name(p: &PropagationPath) -> String {
    let tag = match p.kind {
        PathKind::Los => "los",
        PathKind::SingleBounce => "sb",
        PathKind::MultiBounce => "mb",
    };
    std::iter::once(tag.to_string())
        .chain(p.surface_sequence.iter().map(|s| format!("s{s}")))
        .collect::<Vec<_>>()
        .join("_")
}

impl SweepResult {
    /// Trials for power index `p`.
    pub fn trials_at(&self, p: usize) -> &[TrialRecord] {
        let n = self.config.runs;
        &self.trials[p * n..(p + 1) * n]
    }

    pub fn summarize(&self) -> SweepSummary {
        let mut out = SweepSummary::default();
        let final_surface: BTreeMap<usize, usize> = self
            .paths
            .iter()
            .filter_map(|p| p.last_surface().map(|s| (p.index, s)))
            .collect();
        let row = |power: f64, threshold: Option<f64>, series: String, r: Rate| SummaryRow {
            tx_power_dbm: power,
            threshold,
            series,
            metric: r.value,
            stderr: r.stderr,
        };

        for (pi, &power) in self.config.tx_power_sweep.iter().enumerate() {
            let trials = self.trials_at(pi);
            let outcomes: Vec<_> = trials.iter().map(TrialRecord::association_outcomes).collect();
            let sb = metric_association_rate(&outcomes);
            let anyk = final_surface_rate(&outcomes, &final_surface);
            for p in &self.paths {
                let rate = match p.kind {
                    PathKind::SingleBounce => sb.get(&p.index),
                    PathKind::MultiBounce => anyk.get(&p.index),
                    PathKind::Los => None,
                };
                if let Some(r) = rate {
                    out.association.push(row(power, None, series_name(p), *r));
                }
            }

            if self.config.has(Baseline::Ransac) {
                for (ti, &t) in self.config.thresholds.iter().enumerate() {
                    let cls: Vec<_> = trials.iter().map(|tr| tr.classification(ti)).collect();
                    let (fa, md) = metric_fa_md(&cls);
                    out.false_alarm.push(row(power, Some(t), "ransac".into(), fa));
                    out.missed_detection.push(row(power, Some(t), "ransac".into(), md));
                    let errs: Vec<f64> = trials.iter().map(|tr| tr.ransac[ti].position_error).collect();
                    out.rmse.push(row(power, Some(t), "ransac".into(), rmse_rate(&errs)));
                }
            }
            if self.config.has(Baseline::AllPaths) {
                let errs: Vec<f64> = trials
                    .iter()
                    .filter_map(|tr| tr.all_paths.as_ref().map(|b| b.position_error))
                    .collect();
                out.rmse.push(row(power, None, "all_paths".into(), rmse_rate(&errs)));
            }
            if self.config.has(Baseline::PerfectInlier) {
                let errs: Vec<f64> = trials
                    .iter()
                    .filter_map(|tr| tr.perfect_inlier.as_ref().map(|b| b.position_error))
                    .collect();
                out.rmse
                    .push(row(power, None, "perfect_inlier".into(), rmse_rate(&errs)));
            }
        }
        out
    }

    /// Trial records as JSON lines.
    pub fn trials_jsonl(&self) -> String {
        let mut s = String::new();
        for t in &self.trials {
            s.push_str(&serde_json::to_string(t).expect("trial serializes"));
            s.push('\n');
        }
        s
    }
}

impl SweepSummary {
    pub fn files(&self) -> [(&'static str, &[SummaryRow]); 4] {
        [
            ("fig2_association.csv", &self.association),
            ("fig3_fa.csv", &self.false_alarm),
            ("fig4_md.csv", &self.missed_detection),
            ("fig5_rmse.csv", &self.rmse),
        ]
    }

    /// Lookup of a metric value.
    pub fn value(rows: &[SummaryRow], power: f64, threshold: Option<f64>, series: &str) -> Option<SummaryRow> {
        rows.iter()
            .find(|r| r.tx_power_dbm == power && r.threshold == threshold && r.series == series)
            .cloned()
    }
}

/// CSV text with header `tx_power_dbm,T,series,metric,stderr`.
pub fn to_csv(rows: &[SummaryRow]) -> String {
    let mut s = String::from("tx_power_dbm,T,series,metric,stderr\n");
    for r in rows {
        let t = r.threshold.map(|t| t.to_string()).unwrap_or_default();
        writeln!(s, "{},{},{},{},{}", r.tx_power_dbm, t, r.series, r.metric, r.stderr).unwrap();
    }
    s
}

/// Writes the four figure CSVs and `trials.jsonl` into `dir`.
pub fn write_outputs(result: &SweepResult, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let summary = result.summarize();
    let mut written = Vec::new();
    for (name, rows) in summary.files() {
        let path = dir.join(name);
        std::fs::write(&path, to_csv(rows))?;
        written.push(path);
    }
    let path = dir.join("trials.jsonl");
    std::fs::write(&path, result.trials_jsonl())?;
    written.push(path);
    Ok(written)
}
