//! Helpers shared by the integration tests.
#![allow(dead_code)]

use std::fs;
use std::path::PathBuf;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use seldkit::annotation::{ClassId, ClipAnnotation, EventRecord, FrameIndex};
use seldkit::labels::parse_labels;
use seldkit::{angular_distance, SphericalDoa};

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

/// `(file name, text)` of every valid label fixture, sorted by name.
pub fn label_fixtures() -> Vec<(String, String)> {
    let mut files: Vec<(String, String)> = fs::read_dir(fixture_dir().join("labels"))
        .expect("fixture directory")
        .map(|entry| {
            let path = entry.unwrap().path();
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            (name, fs::read_to_string(&path).unwrap())
        })
        .filter(|(name, _)| name.ends_with(".csv"))
        .collect();
    files.sort();
    files
}

pub fn fixture_clips() -> Vec<(String, ClipAnnotation)> {
    label_fixtures()
        .into_iter()
        .map(|(name, text)| {
            let clip = parse_labels(&text, 13).unwrap_or_else(|e| panic!("{name}: {e}"));
            (name, clip)
        })
        .collect()
}

pub fn event(frame: u32, class: usize, source: u32, azimuth: f64, elevation: f64) -> EventRecord {
    EventRecord {
        frame: FrameIndex(frame),
        class: ClassId::new(class, 13).unwrap(),
        source,
        doa: SphericalDoa::new(azimuth, elevation).unwrap(),
        distance_cm: None,
    }
}

pub fn random_doa(rng: &mut ChaCha8Rng) -> SphericalDoa {
    // area-uniform on the sphere, away from the poles
    let z: f64 = rng.gen_range(-0.98..0.98);
    SphericalDoa::new(rng.gen_range(-180.0..180.0), z.asin().to_degrees()).unwrap()
}

/// Random clip with at most `max_per_class` simultaneous events per class,
/// same-class events at one frame more than `min_separation_deg` apart.
pub fn random_clip(
    rng: &mut ChaCha8Rng,
    frames: u32,
    class_count: usize,
    max_per_class: usize,
    min_separation_deg: f64,
) -> ClipAnnotation {
    let mut events = Vec::new();
    for frame in 0..frames {
        for class in 0..class_count {
            if rng.gen_bool(0.8) {
                continue;
            }
            let wanted = rng.gen_range(1..=max_per_class);
            let mut placed: Vec<SphericalDoa> = Vec::new();
            while placed.len() < wanted {
                let doa = random_doa(rng);
                let far = placed.iter().all(|p| {
                    angular_distance(&p.to_cartesian(), &doa.to_cartesian()) > min_separation_deg
                });
                if far {
                    placed.push(doa);
                }
            }
            for (source, doa) in placed.into_iter().enumerate() {
                events.push(EventRecord {
                    frame: FrameIndex(frame),
                    class: ClassId::new(class, class_count).unwrap(),
                    source: source as u32,
                    doa,
                    distance_cm: None,
                });
            }
        }
    }
    ClipAnnotation::new(events, class_count)
        .unwrap()
        .with_frame_count(frames)
        .unwrap()
}

/// One event per frame at a slowly moving direction.
pub fn single_source_scene(frames: u32) -> ClipAnnotation {
    let events = (0..frames)
        .map(|f| {
            let azimuth = -170.0 + 7.0 * f as f64 % 340.0;
            let elevation = (f % 9) as f64 * 10.0 - 40.0;
            event(f, 1, 0, azimuth, elevation)
        })
        .collect();
    ClipAnnotation::new(events, 13).unwrap()
}
