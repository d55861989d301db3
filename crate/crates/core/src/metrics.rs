//! Monte Carlo metrics: association rate, false-alarm and missed-detection
//! rates of the inlier classification, and position RMSE.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::raytrace::PathKind;

/// A mean over runs with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub value: f64,
    pub stderr: f64,
    pub runs: usize,
}

impl Rate {
    /// Mean and standard error of per-run values.
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        if n == 0 {
            return Self {
                value: f64::NAN,
                stderr: f64::NAN,
                runs: 0,
            };
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Self {
            value: mean,
            stderr,
            runs: n,
        }
    }
}

/// How the estimator treated one path in one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathLabel {
    Inlier,
    Outlier,
    /// Dropped at association.
    Rejected,
}

/// Association result for one path in one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssociationOutcome {
    pub path_index: usize,
    pub kind: PathKind,
    /// Reflecting surface of a single bounce, 0 for LOS, `None` otherwise.
    pub true_origin: Option<usize>,
    /// Assigned origin, `None` if rejected.
    pub assigned_origin: Option<usize>,
}

impl AssociationOutcome {
    pub fn correct(&self) -> bool {
        self.true_origin.is_some() && self.assigned_origin == self.true_origin
    }
}

/// Per single-bounce path (keyed by path index), the fraction of runs that
/// assigned it to its true reflecting surface.
pub fn metric_association_rate(runs: &[Vec<AssociationOutcome>]) -> BTreeMap<usize, Rate> {
    let mut hits: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for run in runs {
        for o in run.iter().filter(|o| o.kind == PathKind::SingleBounce) {
            hits.entry(o.path_index)
                .or_default()
                .push(if o.correct() { 1.0 } else { 0.0 });
        }
    }
    hits.into_iter().map(|(k, v)| (k, Rate::from_samples(&v))).collect()
}

/// Per path of any kind, the fraction of runs in which it was assigned the
/// surface of its final reflection (LOS paths: origin 0).
pub fn final_surface_rate(
    runs: &[Vec<AssociationOutcome>],
    final_surface: &BTreeMap<usize, usize>,
) -> BTreeMap<usize, Rate> {
    let mut hits: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for run in runs {
        for o in run {
            let ok = o.assigned_origin.is_some() && o.assigned_origin == final_surface.get(&o.path_index).copied();
            hits.entry(o.path_index).or_default().push(if ok { 1.0 } else { 0.0 });
        }
    }
    hits.into_iter().map(|(k, v)| (k, Rate::from_samples(&v))).collect()
}

/// `(false alarm, missed detection)` averaged over runs.
///
/// False alarm: share of multi-bounce paths labeled inlier. Missed
/// detection: share of LOS and single-bounce paths labeled outlier or
/// rejected at association.
pub fn metric_fa_md(runs: &[Vec<(PathKind, PathLabel)>]) -> (Rate, Rate) {
    let mut fa = Vec::with_capacity(runs.len());
    let mut md = Vec::with_capacity(runs.len());
    for run in runs {
        let (mut outliers, mut admitted, mut inliers, mut dropped) = (0usize, 0usize, 0usize, 0usize);
        for (kind, label) in run {
            if kind.is_modelled() {
                inliers += 1;
                dropped += usize::from(*label != PathLabel::Inlier);
            } else {
                outliers += 1;
                admitted += usize::from(*label == PathLabel::Inlier);
            }
        }
        if outliers > 0 {
            fa.push(admitted as f64 / outliers as f64);
        }
        if inliers > 0 {
            md.push(dropped as f64 / inliers as f64);
        }
    }
    (Rate::from_samples(&fa), Rate::from_samples(&md))
}

/// Root mean square of the position errors.
pub fn metric_rmse(errors: &[f64]) -> f64 {
    if errors.is_empty() {
        return f64::NAN;
    }
    (errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt()
}

/// RMSE with a delta-method standard error.
pub fn rmse_rate(errors: &[f64]) -> Rate {
    let sq: Vec<f64> = errors.iter().map(|e| e * e).collect();
    let mse = Rate::from_samples(&sq);
    let value = mse.value.sqrt();
    let stderr = if value > 0.0 { mse.stderr / (2.0 * value) } else { 0.0 };
    Rate {
        value,
        stderr,
        runs: mse.runs,
    }
}
