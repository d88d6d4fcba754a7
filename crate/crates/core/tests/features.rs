use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use seldkit::features::audio::{
    window_starts, FeatureExtractor, HOP_LENGTH, SAMPLE_RATE_HZ, WINDOW_SAMPLES,
    WINDOW_SHIFT_FRAMES,
};
use seldkit::features::visual::{encode_boxes, BoundingBox, VisualConfig};
use seldkit::AudioClip;

fn noise_clip(seed: u64, samples: usize) -> AudioClip {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let channels = (0..4)
        .map(|_| (0..samples).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    AudioClip::new(channels, SAMPLE_RATE_HZ).unwrap()
}

#[test]
fn ipd_stays_in_half_open_range() {
    let clip = noise_clip(1, WINDOW_SAMPLES);
    let f = FeatureExtractor::<f64>::new().extract(&clip, 0).unwrap();
    for plane in 4..7 {
        for bin in 0..257 {
            for frame in 0..128 {
                let v = f.get(plane, bin, frame);
                assert!(v > -PI && v <= PI, "{v}");
            }
        }
    }
}

#[test]
fn tiles_cover_the_clip_without_gaps() {
    let samples = 5 * SAMPLE_RATE_HZ as usize;
    let starts = window_starts(samples);
    assert_eq!(starts[0], 0);
    for pair in starts.windows(2) {
        assert_eq!(pair[1] - pair[0], WINDOW_SHIFT_FRAMES * HOP_LENGTH);
    }
    assert!(starts.last().unwrap() + WINDOW_SAMPLES >= samples);
    let tiles = FeatureExtractor::<f64>::new()
        .extract_tiled(&noise_clip(4, samples))
        .unwrap();
    assert_eq!(tiles.len(), starts.len());
    assert!(tiles.iter().all(|t| t.shape() == [7, 257, 128]));
}

#[test]
fn tiled_extraction_matches_serial_windows() {
    let clip = noise_clip(6, 3 * SAMPLE_RATE_HZ as usize);
    let extractor = FeatureExtractor::<f64>::new();
    let tiled = extractor.extract_tiled(&clip).unwrap();
    for (tile, start) in tiled.iter().zip(window_starts(clip.sample_count())) {
        if start + WINDOW_SAMPLES <= clip.sample_count() {
            assert_eq!(
                tile.values(),
                extractor.extract(&clip, start).unwrap().values()
            );
        }
    }
}

fn boxes() -> Vec<BoundingBox<f64>> {
    vec![
        BoundingBox::new(10.0, 10.0, 30.0, 40.0, 360.0, 180.0).unwrap(),
        BoundingBox::new(200.0, 50.0, 60.0, 60.0, 360.0, 180.0).unwrap(),
        BoundingBox::new(100.0, 100.0, 20.0, 20.0, 360.0, 180.0).unwrap(),
    ]
}

#[test]
fn box_order_does_not_matter() {
    let cfg = VisualConfig::default();
    let forward = encode_boxes(&boxes(), &cfg).unwrap();
    let mut reversed = boxes();
    reversed.reverse();
    assert_eq!(encode_boxes(&reversed, &cfg).unwrap(), forward);
    assert!(forward.values().iter().all(|v| (0.0..=1.0).contains(v)));
}

proptest! {
    #[test]
    fn profiles_fall_away_from_the_peak(u in 0.0f64..300.0, w in 5.0f64..60.0) {
        let b = BoundingBox::new(u, 0.0, w, 10.0, 360.0, 180.0).unwrap();
        let f = encode_boxes(&[b], &VisualConfig::default()).unwrap();
        let values: Vec<f64> = (0..37).map(|l| f.get(0, 0, l)).collect();
        let peak = (0..37).max_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
        for l in 1..=peak {
            prop_assert!(values[l - 1] <= values[l]);
        }
        for l in peak..36 {
            prop_assert!(values[l + 1] <= values[l]);
        }
    }
}

fn write_wav(path: &std::path::Path, channels: u16, rate: u32, samples: usize) {
    let spec = hound::WavSpec {
        channels,
        sample_rate: rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(path, spec).unwrap();
    for n in 0..samples {
        for c in 0..channels {
            w.write_sample(((n as i32 * 37 + i32::from(c) * 1000) % 20000 - 10000) as i16)
                .unwrap();
        }
    }
    w.finalize().unwrap();
}

#[test]
fn reads_four_channel_wav() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.wav");
    write_wav(&good, 4, SAMPLE_RATE_HZ, WINDOW_SAMPLES);
    let clip = AudioClip::read_wav(&good).unwrap();
    assert_eq!(clip.sample_count(), WINDOW_SAMPLES);
    assert_eq!(clip.channel(0)[0], -10000.0 / 32768.0);
    assert_eq!(clip.channel(1)[0], -9000.0 / 32768.0);
    let f = FeatureExtractor::<f64>::new().extract(&clip, 0).unwrap();
    assert_eq!(f.shape(), [7, 257, 128]);

    let stereo = dir.path().join("stereo.wav");
    write_wav(&stereo, 2, SAMPLE_RATE_HZ, 100);
    assert!(AudioClip::read_wav(&stereo).is_err());
    let slow = dir.path().join("slow.wav");
    write_wav(&slow, 4, 48_000, 100);
    assert!(AudioClip::read_wav(&slow).is_err());
}
