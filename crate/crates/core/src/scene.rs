//! Scene files and the default street-canyon scene.
//!
//! A scene file is a JSON document:
//!
//! ```text
//! {
//!   "bs_position": [x, y, z],
//!   "bounds": { "x_min": .., "x_max": .., "y_min": .., "y_max": .., "z_max": .. },
//!   "surfaces": [ { "id": 1, "normal": [..], "anchor": [..], "boundary": [[..], ..] }, .. ]
//! }
//! ```
//!
//! Every invariant of [`Surface`] and [`Scene`] is checked on load, and
//! failures carry the line of the offending entry.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Bounds, Scene, Surface, Vec3};

/// Street canyon around the base station at (0, 0, 15): a 10 m facade at
/// x = -20, a closing facade at y = -25 and a 30 m facade at x = 12.
pub const CANYON_JSON: &str = include_str!("../data/canyon.json");

/// The default base station position of the canyon scene.
pub const CANYON_BS: [f64; 3] = [0.0, 0.0, 15.0];

/// The default user position used with the canyon scene.
pub const CANYON_UE: [f64; 3] = [-15.0, -15.0, 0.0];

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub bs_position: [f64; 3],
    pub bounds: BoundsFile,
    pub surfaces: Vec<SurfaceFile>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsFile {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub z_max: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceFile {
    pub id: usize,
    pub normal: [f64; 3],
    pub anchor: [f64; 3],
    pub boundary: Vec<[f64; 3]>,
}

impl From<&Scene> for SceneFile {
    fn from(scene: &Scene) -> Self {
        let b = scene.bounds();
        Self {
            bs_position: to_array(scene.bs_position()),
            bounds: BoundsFile {
                x_min: b.x_min,
                x_max: b.x_max,
                y_min: b.y_min,
                y_max: b.y_max,
                z_max: b.z_max,
            },
            surfaces: scene
                .surfaces()
                .iter()
                .map(|s| SurfaceFile {
                    id: s.id(),
                    normal: to_array(s.normal()),
                    anchor: to_array(s.anchor()),
                    boundary: s.boundary().iter().map(to_array).collect(),
                })
                .collect(),
        }
    }
}

fn to_array(v: &Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

/// Parses and validates a scene from JSON text.
pub fn parse_scene(text: &str) -> Result<Scene> {
    let file: SceneFile = serde_json::from_str(text).map_err(|e| Error::InvalidScene {
        line: e.line(),
        msg: e.to_string(),
    })?;

    let mut surfaces = Vec::with_capacity(file.surfaces.len());
    for (k, s) in file.surfaces.iter().enumerate() {
        let line = nth_key_line(text, "\"id\"", k).unwrap_or(0);
        let boundary = s.boundary.iter().map(|p| Vec3::from(*p)).collect();
        let surface = Surface::new(s.id, Vec3::from(s.normal), Vec3::from(s.anchor), boundary).map_err(|e| {
            Error::InvalidScene {
                line,
                msg: e.to_string(),
            }
        })?;
        if s.id != k + 1 {
            return Err(Error::InvalidScene {
                line,
                msg: format!("surface ids must be contiguous from 1; entry {} has id {}", k + 1, s.id),
            });
        }
        surfaces.push(surface);
    }

    let b = file.bounds;
    let bounds = Bounds {
        x_min: b.x_min,
        x_max: b.x_max,
        y_min: b.y_min,
        y_max: b.y_max,
        z_max: b.z_max,
    };
    Scene::new(surfaces, Vec3::from(file.bs_position), bounds).map_err(|e| Error::InvalidScene {
        line: nth_key_line(text, "\"bounds\"", 0).unwrap_or(0),
        msg: e.to_string(),
    })
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene> {
    parse_scene(&std::fs::read_to_string(path)?)
}

pub fn scene_to_json(scene: &Scene) -> String {
    serde_json::to_string_pretty(&SceneFile::from(scene)).expect("scene serializes")
}

/// The frozen default canyon scene.
pub fn canyon_scene() -> Scene {
    parse_scene(CANYON_JSON).expect("built-in canyon scene is valid")
}

// 1-based line of the n-th occurrence of `key`.
fn nth_key_line(text: &str, key: &str, n: usize) -> Option<usize> {
    let (pos, _) = text.match_indices(key).nth(n)?;
    Some(text[..pos].matches('\n').count() + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canyon_loads() {
        let s = canyon_scene();
        assert_eq!(s.surfaces().len(), 3);
        assert_eq!(s.bs_position(), &Vec3::from(CANYON_BS));
        assert!(s.bounds().contains(&Vec3::from(CANYON_UE)));
    }

    #[test]
    fn json_round_trip() {
        let s = canyon_scene();
        assert_eq!(parse_scene(&scene_to_json(&s)).unwrap(), s);
    }

    #[test]
    fn bad_normal_reports_its_line() {
        let text = CANYON_JSON.replacen("[0.0, 1.0, 0.0]", "[0.0, 2.0, 0.0]", 1);
        match parse_scene(&text) {
            Err(Error::InvalidScene { line, msg }) => {
                assert_eq!(line, 12, "{msg}");
                assert!(msg.contains("surface 2"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn syntax_error_reports_its_line() {
        let text = CANYON_JSON.replacen("\"z_max\": 30.0", "\"z_max\": ", 1);
        match parse_scene(&text) {
            Err(Error::InvalidScene { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_contiguous_ids_rejected() {
        let text = CANYON_JSON.replacen("\"id\": 3", "\"id\": 4", 1);
        assert!(matches!(parse_scene(&text), Err(Error::InvalidScene { line: 18, .. })));
    }

    #[test]
    fn bs_outside_bounds_rejected() {
        let text = CANYON_JSON.replacen("[0.0, 0.0, 15.0]", "[0.0, 0.0, 45.0]", 1);
        assert!(matches!(parse_scene(&text), Err(Error::InvalidScene { line: 3, .. })));
    }
}
