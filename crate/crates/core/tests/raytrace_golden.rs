use dtloc::geom::{segment_occluded, Vec3};
use dtloc::raytrace::{dump_paths, generate_paths, PathKind, PathRecord};
use dtloc::scene::{canyon_scene, parse_scene, scene_to_json, CANYON_BS, CANYON_UE};
use dtloc::SPEED_OF_LIGHT;

const GOLDEN: &str = include_str!("fixtures/canyon_paths.jsonl");

fn ue() -> Vec3 {
    Vec3::from(CANYON_UE)
}

fn golden() -> Vec<PathRecord> {
    GOLDEN.lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn canyon_matches_golden_dump() {
    let paths = generate_paths(&ue(), &canyon_scene(), 2).unwrap();
    let fresh: Vec<PathRecord> = paths.iter().map(PathRecord::from).collect();
    let frozen = golden();
    assert_eq!(fresh.len(), frozen.len());
    for (a, b) in fresh.iter().zip(&frozen) {
        assert_eq!((a.index, a.kind, &a.surfaces), (b.index, b.kind, &b.surfaces));
        assert!((a.length - b.length).abs() < 1e-9);
        assert!((a.azimuth - b.azimuth).abs() < 1e-12);
        assert!((a.zenith - b.zenith).abs() < 1e-12);
        for (p, q) in a.points.iter().zip(&b.points) {
            assert!((Vec3::from(*p) - Vec3::from(*q)).norm() < 1e-9);
        }
    }
}

#[test]
fn golden_lengths_equal_image_distances() {
    // Images of the user across x = -20, y = -25 and x = 12, applied in
    // path order, measured to the base station at (0, 0, 15).
    let expected = [
        ("", 675.0f64),
        ("1", 1075.0),
        ("2", 1675.0),
        ("3", 1971.0),
        ("1,2", 2075.0),
        ("1,3", 2851.0),
        ("2,3", 2971.0),
    ];
    let frozen = golden();
    for (rec, (seq, sq)) in frozen.iter().zip(expected) {
        let s: Vec<String> = rec.surfaces.iter().map(|s| s.to_string()).collect();
        assert_eq!(s.join(","), seq);
        assert!(
            (rec.length - sq.sqrt()).abs() < 1e-9,
            "{seq}: {} vs {}",
            rec.length,
            sq.sqrt()
        );
        assert!((rec.delay - rec.length / SPEED_OF_LIGHT).abs() < 1e-18);
    }
}

#[test]
fn census_is_one_los_three_single_three_multi() {
    let paths = generate_paths(&ue(), &canyon_scene(), 2).unwrap();
    let count = |k| paths.iter().filter(|p| p.kind == k).count();
    assert_eq!(
        (
            count(PathKind::Los),
            count(PathKind::SingleBounce),
            count(PathKind::MultiBounce)
        ),
        (1, 3, 3)
    );
}

#[test]
fn paths_are_unobstructed_and_specular() {
    let scene = canyon_scene();
    let b = Vec3::from(CANYON_BS);
    for p in generate_paths(&ue(), &scene, 2).unwrap() {
        let v = p.vertices(&ue(), &b);
        for (k, w) in v.windows(2).enumerate() {
            let mut ignore = Vec::new();
            if k > 0 {
                ignore.push(p.surface_sequence[k - 1]);
            }
            if k < p.surface_sequence.len() {
                ignore.push(p.surface_sequence[k]);
            }
            assert!(!segment_occluded(&w[0], &w[1], &scene, &ignore));
        }
        for (k, &sid) in p.surface_sequence.iter().enumerate() {
            let s = scene.surface(sid).unwrap();
            let d_in = (v[k + 1] - v[k]).normalize();
            let d_out = (v[k + 2] - v[k + 1]).normalize();
            let n = s.normal();
            assert!((d_out - (d_in - 2.0 * d_in.dot(n) * n)).norm() < 1e-7);
            assert!(s.contains(&v[k + 1]));
        }
    }
}

#[test]
fn delays_are_sorted_and_indexed() {
    let paths = generate_paths(&ue(), &canyon_scene(), 2).unwrap();
    for (k, p) in paths.iter().enumerate() {
        assert_eq!(p.index, k + 1);
    }
    assert!(paths.windows(2).all(|w| w[0].delay <= w[1].delay));
}

#[test]
fn single_bounce_limit_drops_multi_bounce() {
    let paths = generate_paths(&ue(), &canyon_scene(), 1).unwrap();
    assert_eq!(paths.len(), 4);
    assert!(paths.iter().all(|p| p.kind != PathKind::MultiBounce));
}

#[test]
fn dump_round_trips_and_scene_serializes() {
    let paths = generate_paths(&ue(), &canyon_scene(), 2).unwrap();
    let dump = dump_paths(&paths);
    assert_eq!(dump.lines().count(), 7);
    let reparsed = parse_scene(&scene_to_json(&canyon_scene())).unwrap();
    assert_eq!(generate_paths(&ue(), &reparsed, 2).unwrap(), paths);
}
