//! Numerical tolerances shared by the geometry engine, the solver and the tests.

/// Ray parameters (and segment parameters scaled to length) below this are
/// treated as self-hits of a ray leaving a surface.
pub const RAY_T_MIN: f64 = 1e-9;

/// Open-segment margin used by occlusion and incidence checks, in units of
/// the segment parameter.
pub const SEGMENT_EPS: f64 = 1e-9;

/// Distance from an edge under which a point still counts as inside a
/// boundary polygon, meters.
pub const EDGE_TOL: f64 = 1e-9;

/// A point this close to a plane is considered to lie on it, meters.
pub const ON_PLANE_TOL: f64 = 1e-9;

/// Denominators of plane intersections below this magnitude mean the line is
/// parallel to the plane.
pub const PARALLEL_EPS: f64 = 1e-12;

/// Unit-normal check on loaded surfaces.
pub const NORMAL_TOL: f64 = 1e-9;

/// Vertex-to-plane distance allowed for a boundary polygon, meters.
pub const COPLANAR_TOL: f64 = 1e-6;

/// Minimum polygon area, m^2.
pub const MIN_AREA: f64 = 1e-9;

/// Levenberg-Marquardt termination: scaled gradient (cosine) tolerance.
pub const SOLVER_GTOL: f64 = 1e-10;

/// Levenberg-Marquardt termination: relative scaled step tolerance.
pub const SOLVER_XTOL: f64 = 1e-12;

/// Levenberg-Marquardt iteration cap.
pub const SOLVER_MAX_ITER: usize = 200;

/// Relative finite-difference step for the numeric Jacobian.
pub const FD_REL_STEP: f64 = 1e-6;
