//! Planar environment model and the three ray queries the localizer relies on:
//! nearest-hit ray casting, point mirroring and specular incidence points.
//!
//! All queries are pure functions of an immutable [`Scene`].

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::tolerances::{
    COPLANAR_TOL, EDGE_TOL, MIN_AREA, NORMAL_TOL, ON_PLANE_TOL, PARALLEL_EPS, RAY_T_MIN, SEGMENT_EPS,
};

pub type Vec3 = Vector3<f64>;

/// A bounded planar reflector.
///
/// The boundary is a convex polygon lying in the plane through `anchor` with
/// unit `normal`. Vertices may be given in either winding order.
#[derive(Debug, Clone, PartialEq)]
pub struct Surface {
    id: usize,
    normal: Vec3,
    anchor: Vec3,
    boundary: Vec<Vec3>,
    // +1 or -1 so that interior points give positive edge distances.
    winding: f64,
}

impl Surface {
    pub fn new(id: usize, normal: Vec3, anchor: Vec3, boundary: Vec<Vec3>) -> Result<Self> {
        let bad = |msg: String| Error::InvalidArgument(format!("surface {id}: {msg}"));
        if !normal.iter().chain(anchor.iter()).all(|v| v.is_finite()) {
            return Err(bad("non-finite normal or anchor".into()));
        }
        if (normal.norm() - 1.0).abs() > NORMAL_TOL {
            return Err(bad(format!("normal has norm {}, expected 1", normal.norm())));
        }
        if boundary.len() < 3 {
            return Err(bad(format!("boundary has {} vertices, need >= 3", boundary.len())));
        }
        for (k, v) in boundary.iter().enumerate() {
            let off = (v - anchor).dot(&normal);
            if !off.is_finite() || off.abs() >= COPLANAR_TOL {
                return Err(bad(format!("vertex {k} is {off:e} m off the plane")));
            }
        }

        // Signed area along the normal, via the fan from vertex 0.
        let mut area_vec = Vec3::zeros();
        for k in 1..boundary.len() - 1 {
            area_vec += (boundary[k] - boundary[0]).cross(&(boundary[k + 1] - boundary[0]));
        }
        let signed_area = 0.5 * area_vec.dot(&normal);
        if signed_area.abs() <= MIN_AREA {
            return Err(bad(format!("degenerate boundary, area {:e} m^2", signed_area.abs())));
        }
        let winding = signed_area.signum();

        // Convexity: every turn must agree with the overall winding.
        let n = boundary.len();
        for k in 0..n {
            let a = boundary[k];
            let b = boundary[(k + 1) % n];
            let c = boundary[(k + 2) % n];
            let turn = (b - a).cross(&(c - b)).dot(&normal) * winding;
            if turn < -COPLANAR_TOL * (b - a).norm().max(1.0) {
                return Err(bad(format!("boundary is not convex at vertex {}", (k + 1) % n)));
            }
        }

        Ok(Self {
            id,
            normal,
            anchor,
            boundary,
            winding,
        })
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn normal(&self) -> &Vec3 {
        &self.normal
    }

    pub fn anchor(&self) -> &Vec3 {
        &self.anchor
    }

    pub fn boundary(&self) -> &[Vec3] {
        &self.boundary
    }

    /// Signed distance from `p` to the plane, positive on the normal side.
    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        (p - self.anchor).dot(&self.normal)
    }

    /// Whether an in-plane point lies within the boundary polygon, allowing
    /// [`EDGE_TOL`] meters outside each edge.
    pub fn contains(&self, p: &Vec3) -> bool {
        let n = self.boundary.len();
        (0..n).all(|k| {
            let a = &self.boundary[k];
            let b = &self.boundary[(k + 1) % n];
            let edge = b - a;
            let len = edge.norm();
            let dist = edge.cross(&(p - a)).dot(&self.normal) * self.winding / len;
            dist >= -EDGE_TOL
        })
    }

    /// Parameter `t` where the line `origin + t * dir` meets the plane, or
    /// `None` when the line is parallel to it.
    fn plane_parameter(&self, origin: &Vec3, dir: &Vec3) -> Option<f64> {
        let denom = dir.dot(&self.normal);
        if denom.abs() < PARALLEL_EPS * dir.norm() {
            return None;
        }
        Some((self.anchor - origin).dot(&self.normal) / denom)
    }
}

/// Axis-aligned region the user may occupy. The floor is always `z = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub z_max: f64,
}

impl Bounds {
    pub const Z_MIN: f64 = 0.0;

    pub fn contains(&self, p: &Vec3) -> bool {
        (self.x_min..=self.x_max).contains(&p.x)
            && (self.y_min..=self.y_max).contains(&p.y)
            && (Self::Z_MIN..=self.z_max).contains(&p.z)
    }

    pub fn lower(&self) -> Vec3 {
        Vec3::new(self.x_min, self.y_min, Self::Z_MIN)
    }

    pub fn upper(&self) -> Vec3 {
        Vec3::new(self.x_max, self.y_max, self.z_max)
    }

    pub fn center(&self) -> Vec3 {
        0.5 * (self.lower() + self.upper())
    }

    pub fn diagonal(&self) -> f64 {
        (self.upper() - self.lower()).norm()
    }

    pub fn clamp(&self, p: &Vec3) -> Vec3 {
        let (lo, hi) = (self.lower(), self.upper());
        Vec3::new(p.x.clamp(lo.x, hi.x), p.y.clamp(lo.y, hi.y), p.z.clamp(lo.z, hi.z))
    }
}

/// The environment model: reflecting surfaces, the base station and the
/// region the user can be in.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    surfaces: Vec<Surface>,
    bs_position: Vec3,
    bounds: Bounds,
}

impl Scene {
    pub fn new(surfaces: Vec<Surface>, bs_position: Vec3, bounds: Bounds) -> Result<Self> {
        for (k, s) in surfaces.iter().enumerate() {
            if s.id != k + 1 {
                return Err(Error::InvalidArgument(format!(
                    "surface ids must be contiguous from 1; position {} has id {}",
                    k + 1,
                    s.id
                )));
            }
        }
        if !(bounds.x_min < bounds.x_max && bounds.y_min < bounds.y_max && bounds.z_max > 0.0) {
            return Err(Error::InvalidArgument(format!("empty bounds {bounds:?}")));
        }
        if !bounds.contains(&bs_position) {
            return Err(Error::InvalidArgument(format!(
                "base station {:?} lies outside the bounds",
                bs_position.as_slice()
            )));
        }
        Ok(Self {
            surfaces,
            bs_position,
            bounds,
        })
    }

    pub fn surfaces(&self) -> &[Surface] {
        &self.surfaces
    }

    /// Surface by its 1-based id.
    pub fn surface(&self, id: usize) -> Option<&Surface> {
        id.checked_sub(1).and_then(|k| self.surfaces.get(k))
    }

    pub fn bs_position(&self) -> &Vec3 {
        &self.bs_position
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }
}

/// First surface struck by a ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub surface_id: usize,
    pub point: Vec3,
    /// Ray parameter along the normalized direction, meters.
    pub distance: f64,
}

/// Casts a ray from `origin` along `direction` and returns the nearest
/// boundary-valid intersection. Hits closer than [`RAY_T_MIN`] are ignored so
/// a ray leaving a surface does not strike it again.
pub fn find_surface(direction: &Vec3, origin: &Vec3, scene: &Scene) -> Result<Option<RayHit>> {
    let norm = direction.norm();
    if !norm.is_finite() || norm <= 0.0 {
        return Err(Error::InvalidArgument("ray direction must be non-zero".into()));
    }
    let dir = direction / norm;
    Ok(cast_unit(&dir, origin, scene))
}

/// [`find_surface`] for an already normalized direction.
pub(crate) fn cast_unit(dir: &Vec3, origin: &Vec3, scene: &Scene) -> Option<RayHit> {
    let mut best: Option<RayHit> = None;
    for s in &scene.surfaces {
        let Some(t) = s.plane_parameter(origin, dir) else {
            continue;
        };
        if t < RAY_T_MIN || best.is_some_and(|h| h.distance <= t) {
            continue;
        }
        let point = origin + t * dir;
        if s.contains(&point) {
            best = Some(RayHit {
                surface_id: s.id,
                point,
                distance: t,
            });
        }
    }
    best
}

/// Reflects `u` across the plane of `surface`.
pub fn mirror_point(u: &Vec3, surface: &Surface) -> Vec3 {
    u - 2.0 * surface.signed_distance(u) * surface.normal
}

/// Specular reflection point on `surface` for a path between `u` and `b`,
/// found by intersecting the segment from `b` to the mirror image of `u`
/// with the plane.
///
/// Returns `None` for every physically absent reflection: an endpoint on the
/// plane, endpoints on opposite sides, a segment parallel to the plane, or a
/// reflection point outside the boundary.
pub fn incidence_point(u: &Vec3, b: &Vec3, surface: &Surface) -> Option<Vec3> {
    if u == b || surface.signed_distance(u).abs() <= ON_PLANE_TOL || surface.signed_distance(b).abs() <= ON_PLANE_TOL {
        return None;
    }
    let image = mirror_point(u, surface);
    let seg = image - b;
    let t = surface.plane_parameter(b, &seg)?;
    if !(t > 0.0 && t < 1.0) {
        return None;
    }
    let r = b + t * seg;
    surface.contains(&r).then_some(r)
}

/// True when a surface outside `ignore` cuts the open segment `(a, b)`
/// strictly between its endpoints, within that surface's boundary.
pub fn segment_occluded(a: &Vec3, b: &Vec3, scene: &Scene, ignore: &[usize]) -> bool {
    let seg = b - a;
    scene.surfaces.iter().filter(|s| !ignore.contains(&s.id)).any(|s| {
        s.plane_parameter(a, &seg)
            .is_some_and(|t| t > SEGMENT_EPS && t < 1.0 - SEGMENT_EPS && s.contains(&(a + t * seg)))
    })
}

/// Azimuth and zenith of `v`, with the azimuth from the full-quadrant
/// arctangent in `(-pi, pi]`. A vertical `v` gets azimuth 0.
pub fn direction_angles(v: &Vec3) -> (f64, f64) {
    let horiz = v.x.hypot(v.y);
    let azimuth = if horiz == 0.0 { 0.0 } else { v.y.atan2(v.x) };
    let zenith = horiz.atan2(v.z);
    (azimuth, zenith)
}

/// Unit vector for an (azimuth, zenith) pair.
pub fn unit_from_angles(azimuth: f64, zenith: f64) -> Vec3 {
    let (sp, cp) = zenith.sin_cos();
    let (st, ct) = azimuth.sin_cos();
    Vec3::new(sp * ct, sp * st, cp)
}
