//! Specular path enumeration between a user and the base station using the
//! image method.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{direction_angles, mirror_point, segment_occluded, Scene, Vec3};
use crate::tolerances::{ON_PLANE_TOL, PARALLEL_EPS, SEGMENT_EPS};
use crate::SPEED_OF_LIGHT;

/// Highest reflection order traced by default.
pub const DEFAULT_MAX_BOUNCES: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathKind {
    Los,
    SingleBounce,
    MultiBounce,
}

impl PathKind {
    pub fn from_bounces(n: usize) -> Self {
        match n {
            0 => Self::Los,
            1 => Self::SingleBounce,
            _ => Self::MultiBounce,
        }
    }

    /// LOS and single-bounce paths are the ones the localization model
    /// can explain.
    pub fn is_modelled(self) -> bool {
        !matches!(self, Self::MultiBounce)
    }
}

/// A ground-truth propagation path.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationPath {
    /// 1-based position in the delay-sorted path list.
    pub index: usize,
    pub kind: PathKind,
    /// Surfaces in the order the signal meets them, starting at the user.
    pub surface_sequence: Vec<usize>,
    pub reflection_points: Vec<Vec3>,
    /// Total length, meters.
    pub length: f64,
    /// Propagation delay, seconds.
    pub delay: f64,
    /// Arrival azimuth at the base station, radians in `(-pi, pi]`.
    pub azimuth: f64,
    /// Arrival zenith at the base station, radians in `[0, pi]`.
    pub zenith: f64,
}

impl PropagationPath {
    fn build(u: &Vec3, b: &Vec3, surface_sequence: Vec<usize>, reflection_points: Vec<Vec3>) -> Self {
        let mut length = 0.0;
        let mut prev = u;
        for r in &reflection_points {
            length += (r - prev).norm();
            prev = r;
        }
        length += (b - prev).norm();
        let (azimuth, zenith) = direction_angles(&(prev - b));
        Self {
            index: 0,
            kind: PathKind::from_bounces(surface_sequence.len()),
            surface_sequence,
            reflection_points,
            length,
            delay: length / SPEED_OF_LIGHT,
            azimuth,
            zenith,
        }
    }

    /// Surface of the last reflection before the base station.
    pub fn last_surface(&self) -> Option<usize> {
        self.surface_sequence.last().copied()
    }

    /// Path vertices from the user to the base station.
    pub fn vertices(&self, u: &Vec3, b: &Vec3) -> Vec<Vec3> {
        let mut v = Vec::with_capacity(self.reflection_points.len() + 2);
        v.push(*u);
        v.extend(self.reflection_points.iter().copied());
        v.push(*b);
        v
    }
}

fn check_user(u: &Vec3, scene: &Scene) -> Result<()> {
    if u == scene.bs_position() {
        return Err(Error::InvalidArgument("user coincides with the base station".into()));
    }
    if !scene.bounds().contains(u) {
        return Err(Error::InvalidArgument(format!(
            "user {:?} lies outside the bounds",
            u.as_slice()
        )));
    }
    Ok(())
}

/// The direct path, if no surface blocks it.
pub fn trace_los(u: &Vec3, scene: &Scene) -> Result<Option<PropagationPath>> {
    check_user(u, scene)?;
    let b = scene.bs_position();
    if segment_occluded(u, b, scene, &[]) {
        return Ok(None);
    }
    let mut path = PropagationPath::build(u, b, Vec::new(), Vec::new());
    path.index = 1;
    Ok(Some(path))
}

/// Every valid specular path of order `1..=max_bounces`, sorted by delay.
///
/// Sequences never reflect twice in a row off the same surface. A candidate
/// survives only if each reflection point lies on its surface and no segment
/// is blocked by a surface other than the ones at its ends.
pub fn trace_reflections(u: &Vec3, scene: &Scene, max_bounces: usize) -> Result<Vec<PropagationPath>> {
    check_user(u, scene)?;
    if max_bounces == 0 {
        return Err(Error::InvalidArgument("max_bounces must be at least 1".into()));
    }
    let mut paths = Vec::new();
    let mut seq = Vec::with_capacity(max_bounces);
    let mut images = vec![*u];
    enumerate(u, scene, max_bounces, &mut seq, &mut images, &mut paths);
    sort_and_index(&mut paths);
    Ok(paths)
}

fn enumerate(
    u: &Vec3,
    scene: &Scene,
    max_bounces: usize,
    seq: &mut Vec<usize>,
    images: &mut Vec<Vec3>,
    out: &mut Vec<PropagationPath>,
) {
    for s in scene.surfaces() {
        if seq.last() == Some(&s.id()) {
            continue;
        }
        let image = mirror_point(images.last().unwrap(), s);
        seq.push(s.id());
        images.push(image);
        if let Some(points) = backtrack(scene, seq, images) {
            if segments_clear(u, scene.bs_position(), seq, &points, scene) {
                out.push(PropagationPath::build(u, scene.bs_position(), seq.clone(), points));
            }
        }
        if seq.len() < max_bounces {
            enumerate(u, scene, max_bounces, seq, images, out);
        }
        seq.pop();
        images.pop();
    }
}

// Walks from the base station back through the image chain. `images[j]` is
// the user mirrored through the first `j` surfaces of `seq`.
fn backtrack(scene: &Scene, seq: &[usize], images: &[Vec3]) -> Option<Vec<Vec3>> {
    let mut points = vec![Vec3::zeros(); seq.len()];
    let mut cur = *scene.bs_position();
    for j in (0..seq.len()).rev() {
        let s = scene.surface(seq[j])?;
        if s.signed_distance(&cur).abs() <= ON_PLANE_TOL {
            return None;
        }
        let dir = images[j + 1] - cur;
        let denom = dir.dot(s.normal());
        if denom.abs() < PARALLEL_EPS * dir.norm() {
            return None;
        }
        let t = (s.anchor() - cur).dot(s.normal()) / denom;
        if !(t > SEGMENT_EPS && t < 1.0 - SEGMENT_EPS) {
            return None;
        }
        let r = cur + t * dir;
        if !s.contains(&r) {
            return None;
        }
        points[j] = r;
        cur = r;
    }
    Some(points)
}

fn segments_clear(u: &Vec3, b: &Vec3, seq: &[usize], points: &[Vec3], scene: &Scene) -> bool {
    let n = points.len();
    (0..=n).all(|k| {
        let start = if k == 0 { u } else { &points[k - 1] };
        let end = if k == n { b } else { &points[k] };
        let mut ignore = Vec::with_capacity(2);
        if k > 0 {
            ignore.push(seq[k - 1]);
        }
        if k < n {
            ignore.push(seq[k]);
        }
        !segment_occluded(start, end, scene, &ignore)
    })
}

fn sort_and_index(paths: &mut [PropagationPath]) {
    paths.sort_by(|a, b| a.delay.total_cmp(&b.delay));
    for (k, p) in paths.iter_mut().enumerate() {
        p.index = k + 1;
    }
}

/// LOS (when present) plus all reflections, indexed `1..=L` by delay.
pub fn generate_paths(u: &Vec3, scene: &Scene, max_bounces: usize) -> Result<Vec<PropagationPath>> {
    let mut paths: Vec<_> = trace_los(u, scene)?.into_iter().collect();
    paths.extend(trace_reflections(u, scene, max_bounces)?);
    sort_and_index(&mut paths);
    Ok(paths)
}

/// One line of the path debug dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub index: usize,
    pub kind: PathKind,
    pub surfaces: Vec<usize>,
    pub points: Vec<[f64; 3]>,
    pub length: f64,
    pub delay: f64,
    pub azimuth: f64,
    pub zenith: f64,
}

impl From<&PropagationPath> for PathRecord {
    fn from(p: &PropagationPath) -> Self {
        Self {
            index: p.index,
            kind: p.kind,
            surfaces: p.surface_sequence.clone(),
            points: p.reflection_points.iter().map(|r| [r.x, r.y, r.z]).collect(),
            length: p.length,
            delay: p.delay,
            azimuth: p.azimuth,
            zenith: p.zenith,
        }
    }
}

/// Paths as JSON lines, one record per path.
pub fn dump_paths(paths: &[PropagationPath]) -> String {
    let mut out = String::new();
    for p in paths {
        out.push_str(&serde_json::to_string(&PathRecord::from(p)).expect("path serializes"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{Bounds, Surface};
    use crate::scene::{canyon_scene, CANYON_UE};
    use std::f64::consts::PI;

    fn v(x: f64, y: f64, z: f64) -> Vec3 {
        Vec3::new(x, y, z)
    }

    fn bounds() -> Bounds {
        Bounds {
            x_min: -30.,
            x_max: 30.,
            y_min: -30.,
            y_max: 30.,
            z_max: 30.,
        }
    }

    fn wall_x(id: usize, x: f64, nx: f64, y: (f64, f64), z: (f64, f64)) -> Surface {
        Surface::new(
            id,
            v(nx, 0., 0.),
            v(x, 0., 0.),
            vec![v(x, y.0, z.0), v(x, y.1, z.0), v(x, y.1, z.1), v(x, y.0, z.1)],
        )
        .unwrap()
    }

    #[test]
    fn los_example() {
        let s = Scene::new(vec![], v(0., 0., 15.), bounds()).unwrap();
        let p = trace_los(&v(-15., -15., 0.), &s).unwrap().unwrap();
        let l = 15.0 * 3f64.sqrt();
        assert!((p.length - l).abs() < 1e-12);
        assert!((p.delay - 86.662e-9).abs() < 1e-12);
        assert!((p.azimuth + 3.0 * PI / 4.0).abs() < 1e-12);
        assert!((p.zenith - (-15.0 / l).acos()).abs() < 1e-12);
        assert!((p.zenith - 2.1863).abs() < 1e-4);
    }

    #[test]
    fn los_straight_down() {
        let s = Scene::new(vec![], v(0., 0., 15.), bounds()).unwrap();
        let p = trace_los(&v(0., 0., 0.), &s).unwrap().unwrap();
        assert_eq!(p.azimuth, 0.0);
        assert_eq!(p.zenith, PI);
    }

    #[test]
    fn los_blocked_and_invalid() {
        let s = Scene::new(
            vec![wall_x(1, -7.5, 1., (-30., 30.), (0., 30.))],
            v(0., 0., 15.),
            bounds(),
        )
        .unwrap();
        assert!(trace_los(&v(-15., -15., 0.), &s).unwrap().is_none());
        assert!(matches!(trace_los(&v(0., 0., 15.), &s), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn single_wall_reflection() {
        let s = Scene::new(
            vec![wall_x(1, -20., 1., (-30., 30.), (0., 30.))],
            v(0., 0., 15.),
            bounds(),
        )
        .unwrap();
        let paths = trace_reflections(&v(-15., -15., 0.), &s, 2).unwrap();
        assert_eq!(paths.len(), 1);
        let p = &paths[0];
        assert_eq!(p.kind, PathKind::SingleBounce);
        assert!((p.reflection_points[0] - v(-20., -12., 3.)).norm() < 1e-12);
        assert!((p.length - 1075f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn empty_scene_has_no_reflections() {
        let s = Scene::new(vec![], v(0., 0., 15.), bounds()).unwrap();
        assert!(trace_reflections(&v(-15., -15., 0.), &s, 2).unwrap().is_empty());
        assert!(trace_reflections(&v(-15., -15., 0.), &s, 0).is_err());
    }

    #[test]
    fn blocked_los_leaves_reflections() {
        // Short wall between UE and BS, tall wall behind the UE.
        let s = Scene::new(
            vec![
                wall_x(1, -7.5, 1., (-30., 30.), (0., 8.)),
                wall_x(2, -20., 1., (-30., 30.), (0., 30.)),
            ],
            v(0., 0., 15.),
            bounds(),
        )
        .unwrap();
        let u = v(-15., -15., 0.);
        let paths = generate_paths(&u, &s, 2).unwrap();
        assert!(trace_los(&u, &s).unwrap().is_none());
        assert_eq!(paths.len(), trace_reflections(&u, &s, 2).unwrap().len());
        assert!(paths.iter().all(|p| p.kind != PathKind::Los));
    }

    #[test]
    fn canyon_census() {
        let scene = canyon_scene();
        let paths = generate_paths(&Vec3::from(CANYON_UE), &scene, DEFAULT_MAX_BOUNCES).unwrap();
        let kinds: Vec<_> = paths.iter().map(|p| p.kind).collect();
        assert_eq!(paths.len(), 7);
        assert_eq!(kinds.iter().filter(|k| **k == PathKind::Los).count(), 1);
        assert_eq!(kinds.iter().filter(|k| **k == PathKind::SingleBounce).count(), 3);
        assert_eq!(kinds.iter().filter(|k| **k == PathKind::MultiBounce).count(), 3);
        assert_eq!(paths[0].kind, PathKind::Los);
        for (k, p) in paths.iter().enumerate() {
            assert_eq!(p.index, k + 1);
        }
    }
}
