#![allow(dead_code)]

use dtloc::geom::{Bounds, Scene, Surface, Vec3};
use rand::Rng;

pub fn random_unit<R: Rng>(rng: &mut R) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Orthonormal in-plane basis for normal `n`.
pub fn basis(n: &Vec3) -> (Vec3, Vec3) {
    let helper = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let e1 = n.cross(&helper).normalize();
    (e1, n.cross(&e1))
}

/// Rectangle with normal `n` centred at `anchor`.
pub fn rectangle(id: usize, n: Vec3, anchor: Vec3, half_a: f64, half_b: f64) -> Surface {
    let (e1, e2) = basis(&n);
    let corners = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)]
        .iter()
        .map(|(a, b)| anchor + a * half_a * e1 + b * half_b * e2)
        .collect();
    Surface::new(id, n, anchor, corners).expect("valid rectangle")
}

pub fn random_surface<R: Rng>(rng: &mut R, id: usize, max_half: f64) -> Surface {
    let n = random_unit(rng);
    let anchor = Vec3::new(
        rng.random_range(-20.0..20.0),
        rng.random_range(-20.0..20.0),
        rng.random_range(-20.0..20.0),
    );
    rectangle(
        id,
        n,
        anchor,
        rng.random_range(0.5..max_half),
        rng.random_range(0.5..max_half),
    )
}

/// A point on the front side of `s`, offset in-plane by up to `spread`.
pub fn point_in_front<R: Rng>(rng: &mut R, s: &Surface, spread: f64) -> Vec3 {
    let (e1, e2) = basis(s.normal());
    s.anchor()
        + rng.random_range(-spread..spread) * e1
        + rng.random_range(-spread..spread) * e2
        + rng.random_range(0.5..20.0) * s.normal()
}

pub fn open_scene(surfaces: Vec<Surface>) -> Scene {
    let bounds = Bounds {
        x_min: -1e3,
        x_max: 1e3,
        y_min: -1e3,
        y_max: 1e3,
        z_max: 1e3,
    };
    Scene::new(surfaces, Vec3::new(0.0, 0.0, 1.0), bounds).expect("valid scene")
}

/// Nearest hit by intersecting every surface's plane directly.
pub fn exhaustive_hit(dir: &Vec3, origin: &Vec3, scene: &Scene) -> Option<(usize, f64)> {
    let d = dir.normalize();
    scene
        .surfaces()
        .iter()
        .filter_map(|s| {
            let denom = d.dot(s.normal());
            if denom.abs() < 1e-12 {
                return None;
            }
            let t = (s.anchor() - origin).dot(s.normal()) / denom;
            (t > 1e-9 && s.contains(&(origin + t * d))).then_some((s.id(), t))
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
}

pub mod canyon {
    use dtloc::associate::Hypothesis;
    use dtloc::geom::{Scene, Vec3};
    use dtloc::measurement::{synthesize, synthesize_with, LabeledMeasurement, NoiseModel, RadioConfig};
    use dtloc::raytrace::{generate_paths, PropagationPath};
    use dtloc::rng::rng_from_seed;
    use dtloc::robust::State;
    use dtloc::scene::{canyon_scene, CANYON_UE};
    use dtloc::solver::{numeric_jacobian, ResidualProblem};
    use nalgebra::DVector;

    pub const BIAS: f64 = 100e-9;

    pub fn setup() -> (Scene, Vec<PropagationPath>) {
        let scene = canyon_scene();
        let paths = generate_paths(&Vec3::from(CANYON_UE), &scene, 2).unwrap();
        (scene, paths)
    }

    pub fn truth() -> State {
        State::new(Vec3::from(CANYON_UE), BIAS)
    }

    pub fn noisy(paths: &[PropagationPath], power: f64, seed: u64) -> Vec<LabeledMeasurement> {
        synthesize(
            paths,
            &RadioConfig::default().with_tx_power(power),
            &NoiseModel::default(),
            BIAS,
            seed,
        )
        .unwrap()
    }

    pub fn exact(paths: &[PropagationPath], power: f64) -> Vec<LabeledMeasurement> {
        let radio = RadioConfig::default().with_tx_power(power);
        synthesize_with(
            paths,
            &radio,
            &NoiseModel::default(),
            BIAS,
            false,
            &mut rng_from_seed(0),
        )
        .unwrap()
    }

    /// LOS and single-bounce measurements with their true origins.
    pub fn true_inliers(labeled: &[LabeledMeasurement]) -> Vec<Hypothesis> {
        labeled
            .iter()
            .filter_map(|l| {
                l.truth
                    .true_origin()
                    .map(|o| Hypothesis::surface(l.measurement.index, o))
            })
            .collect()
    }

    /// Largest entry-wise gap between the analytic and central-difference
    /// Jacobians, relative to the largest entry of the same row.
    pub fn jacobian_gap<P: ResidualProblem>(problem: &P, x: &DVector<f64>) -> Option<f64> {
        let a = problem.jacobian(x)?;
        let n = numeric_jacobian(problem, x)?;
        let mut worst: f64 = 0.0;
        for i in 0..a.nrows() {
            let scale = a.row(i).amax().max(n.row(i).amax());
            if scale == 0.0 {
                continue;
            }
            worst = worst.max((a.row(i) - n.row(i)).amax() / scale);
        }
        Some(worst)
    }
}
