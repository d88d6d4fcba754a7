//! Multi-ACCDOA representation: per track, class and frame a Cartesian vector
//! whose length encodes activity and whose direction encodes the DOA.
//!
//! Targets use duplicated tracks: with `A` active same-class events in a frame,
//! tracks `0..A` carry them in annotation order and the remaining tracks repeat
//! them round-robin, so track `k` holds event `k mod A`. [`pit_loss`] takes the
//! minimum mean squared error over all track permutations. This is a simpler
//! grouping than auxiliary duplicating PIT with per-polyphony target sets, and
//! loss values are not bit-compatible with implementations of that scheme.
//!
//! The squared error is averaged over the 3 components and the `N` tracks of a
//! (class, frame) cell, and the per-cell minima are averaged over all cells.

use rayon::prelude::*;

use crate::annotation::{ClassId, ClipAnnotation, EventRecord, FrameIndex};
use crate::array_io::FlatArray;
use crate::error::{Error, Result};
use crate::geometry::{angular_distance, Cartesian};
use crate::scalar::Scalar;
use crate::LABEL_FRAME_SECONDS;

/// Array of shape `[3, N, C, T]` (axis, track, class, frame), row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiAccdoa<T> {
    values: Vec<T>,
    tracks: usize,
    classes: usize,
    frames: usize,
    frame_rate_hz: f64,
}

impl<T: Scalar> MultiAccdoa<T> {
    pub fn zeros(tracks: usize, classes: usize, frames: usize, frame_rate_hz: f64) -> Self {
        Self {
            values: vec![T::zero(); 3 * tracks * classes * frames],
            tracks,
            classes,
            frames,
            frame_rate_hz,
        }
    }

    pub fn from_values(
        values: Vec<T>,
        tracks: usize,
        classes: usize,
        frames: usize,
        frame_rate_hz: f64,
    ) -> Result<Self> {
        if values.len() != 3 * tracks * classes * frames {
            return Err(Error::ShapeMismatch {
                expected: vec![3, tracks, classes, frames],
                found: vec![values.len()],
            });
        }
        Ok(Self {
            values,
            tracks,
            classes,
            frames,
            frame_rate_hz,
        })
    }

    pub fn shape(&self) -> [usize; 4] {
        [3, self.tracks, self.classes, self.frames]
    }

    pub fn tracks(&self) -> usize {
        self.tracks
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn frame_rate_hz(&self) -> f64 {
        self.frame_rate_hz
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    fn index(&self, axis: usize, track: usize, class: usize, frame: usize) -> usize {
        ((axis * self.tracks + track) * self.classes + class) * self.frames + frame
    }

    pub fn vector(&self, track: usize, class: usize, frame: usize) -> [T; 3] {
        [0, 1, 2].map(|axis| self.values[self.index(axis, track, class, frame)])
    }

    pub fn set_vector(&mut self, track: usize, class: usize, frame: usize, v: [T; 3]) {
        for (axis, component) in v.into_iter().enumerate() {
            let i = self.index(axis, track, class, frame);
            self.values[i] = component;
        }
    }

    /// Reorders tracks so that new track `n` is old track `order[n]`.
    pub fn permute_tracks(&self, order: &[usize]) -> Self {
        assert_eq!(order.len(), self.tracks, "permutation length");
        let mut out = Self::zeros(self.tracks, self.classes, self.frames, self.frame_rate_hz);
        for (new, &old) in order.iter().enumerate() {
            for class in 0..self.classes {
                for frame in 0..self.frames {
                    out.set_vector(new, class, frame, self.vector(old, class, frame));
                }
            }
        }
        out
    }

    pub fn to_flat_array(&self) -> FlatArray<T> {
        FlatArray::new(
            self.shape().to_vec(),
            self.frame_rate_hz,
            self.values.clone(),
        )
        .expect("shape matches storage")
    }

    pub fn from_flat_array(array: FlatArray<T>) -> Result<Self> {
        match array.shape.as_slice() {
            &[3, tracks, classes, frames] => {
                Self::from_values(array.data, tracks, classes, frames, array.frame_rate_hz)
            }
            other => Err(Error::ShapeMismatch {
                expected: vec![3, 0, 0, 0],
                found: other.to_vec(),
            }),
        }
    }
}

fn label_frame_rate() -> f64 {
    1.0 / LABEL_FRAME_SECONDS
}

/// Label frame nearest to output frame `t`; an exact tie goes to the earlier frame.
fn output_to_label_frame(t: usize, frame_rate_hz: f64, label_rate_hz: f64) -> u32 {
    let x = t as f64 * label_rate_hz / frame_rate_hz;
    (x - 0.5 - 1e-9).ceil().max(0.0) as u32
}

/// Builds duplicated-track targets for `frames` output frames at `frame_rate_hz`.
pub fn encode_targets<T: Scalar>(
    annotation: &ClipAnnotation,
    tracks: usize,
    classes: usize,
    frames: usize,
    frame_rate_hz: f64,
) -> Result<MultiAccdoa<T>> {
    if annotation.class_count() != classes {
        return Err(Error::ClassCountMismatch {
            expected: classes,
            found: annotation.class_count(),
        });
    }
    if tracks == 0 || frame_rate_hz.is_nan() || frame_rate_hz <= 0.0 {
        return Err(Error::Config(format!(
            "need at least one track and a positive frame rate (tracks {tracks}, rate {frame_rate_hz})"
        )));
    }
    let mut tensor = MultiAccdoa::zeros(tracks, classes, frames, frame_rate_hz);
    for t in 0..frames {
        let frame = FrameIndex(output_to_label_frame(t, frame_rate_hz, label_frame_rate()));
        let events = annotation.events_at(frame);
        for same_class in events.chunk_by(|a, b| a.class == b.class) {
            let class = same_class[0].class.index();
            let active = same_class.len();
            if active > tracks {
                return Err(Error::TrackCapacity {
                    frame: frame.0,
                    class,
                    active,
                    tracks,
                });
            }
            let dirs: Vec<[T; 3]> = same_class
                .iter()
                .map(|e| {
                    let c = e.doa.to_cartesian();
                    [T::lit(c.x), T::lit(c.y), T::lit(c.z)]
                })
                .collect();
            for track in 0..tracks {
                tensor.set_vector(track, class, t, dirs[track % active]);
            }
        }
    }
    Ok(tensor)
}

/// All permutations of `0..n` in lexicographic order.
pub(crate) fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut current: Vec<usize> = (0..n).collect();
    let mut out = vec![current.clone()];
    loop {
        let Some(i) = (1..n).rev().find(|&i| current[i - 1] < current[i]) else {
            return out;
        };
        let j = (i..n)
            .rev()
            .find(|&j| current[j] > current[i - 1])
            .expect("successor exists");
        current.swap(i - 1, j);
        current[i..].reverse();
        out.push(current.clone());
    }
}

/// Permutation-invariant MSE between predicted and target tensors.
pub fn pit_loss<T: Scalar>(pred: &MultiAccdoa<T>, target: &MultiAccdoa<T>) -> Result<T> {
    if pred.shape() != target.shape() {
        return Err(Error::ShapeMismatch {
            expected: target.shape().to_vec(),
            found: pred.shape().to_vec(),
        });
    }
    let [_, tracks, classes, frames] = pred.shape();
    let cells = classes * frames;
    if cells == 0 || tracks == 0 {
        return Ok(T::zero());
    }
    let perms = permutations(tracks);
    let norm = T::from_usize_lossy(3 * tracks);
    let minima: Vec<T> = (0..cells)
        .into_par_iter()
        .map(|cell| {
            let (class, frame) = (cell / frames, cell % frames);
            let p: Vec<[T; 3]> = (0..tracks).map(|n| pred.vector(n, class, frame)).collect();
            let q: Vec<[T; 3]> = (0..tracks)
                .map(|n| target.vector(n, class, frame))
                .collect();
            perms
                .iter()
                .map(|perm| {
                    perm.iter()
                        .enumerate()
                        .map(|(n, &m)| {
                            (0..3)
                                .map(|a| (p[n][a] - q[m][a]) * (p[n][a] - q[m][a]))
                                .sum::<T>()
                        })
                        .sum::<T>()
                        / norm
                })
                .fold(T::infinity(), T::min)
        })
        .collect();
    Ok(minima.into_iter().sum::<T>() / T::from_usize_lossy(cells))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodeConfig {
    /// A track vector longer than this is an active event.
    pub activity_threshold: f64,
    /// Same-class active tracks closer than this are merged.
    pub merge_angle_deg: f64,
    pub label_frame_rate_hz: f64,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            activity_threshold: 0.3,
            merge_angle_deg: 15.0,
            label_frame_rate_hz: label_frame_rate(),
        }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.activity_threshold > 0.0 && self.activity_threshold < 1.0) {
            return Err(Error::Config(format!(
                "activity threshold must lie in (0, 1), got {}",
                self.activity_threshold
            )));
        }
        if self.merge_angle_deg.is_nan() || self.merge_angle_deg < 0.0 {
            return Err(Error::Config(format!(
                "merge angle must be non-negative, got {}",
                self.merge_angle_deg
            )));
        }
        if self.label_frame_rate_hz.is_nan() || self.label_frame_rate_hz <= 0.0 {
            return Err(Error::Config("label frame rate must be positive".into()));
        }
        Ok(())
    }
}

/// Thresholds track vectors into events on the label-frame grid.
///
/// Each label frame takes the nearest output frame. Within a frame and class,
/// active tracks are visited by decreasing vector length (then track index);
/// a track within `merge_angle_deg` of an already emitted track is folded into
/// it, otherwise it emits a new event whose source index is its track. An
/// event's DOA is the normalized mean of its members' unit directions. Weaker
/// tracks never influence which stronger tracks are emitted, so raising the
/// threshold can only remove events.
pub fn decode_predictions<T: Scalar>(
    tensor: &MultiAccdoa<T>,
    cfg: &DecodeConfig,
) -> Result<ClipAnnotation> {
    cfg.validate()?;
    let [_, tracks, classes, frames] = tensor.shape();
    let mut events = Vec::new();
    let mut label_frames = 0u32;
    if frames > 0 && tensor.frame_rate_hz > 0.0 {
        let mut label_frame = 0u32;
        loop {
            let t = (f64::from(label_frame) * tensor.frame_rate_hz / cfg.label_frame_rate_hz)
                .round() as usize;
            if t >= frames {
                break;
            }
            for class in 0..classes {
                decode_cell(tensor, cfg, class, t, tracks, label_frame, &mut events)?;
            }
            label_frame += 1;
        }
        label_frames = label_frame;
    }
    ClipAnnotation::new(events, classes)?.with_frame_count(label_frames)
}

fn decode_cell<T: Scalar>(
    tensor: &MultiAccdoa<T>,
    cfg: &DecodeConfig,
    class: usize,
    t: usize,
    tracks: usize,
    label_frame: u32,
    events: &mut Vec<EventRecord>,
) -> Result<()> {
    let threshold = T::lit(cfg.activity_threshold);
    let mut active: Vec<(T, usize, Cartesian<T>)> = (0..tracks)
        .filter_map(|track| {
            let [x, y, z] = tensor.vector(track, class, t);
            let norm = (x * x + y * y + z * z).sqrt();
            (norm > threshold).then(|| {
                (
                    norm,
                    track,
                    Cartesian::new_unchecked(x / norm, y / norm, z / norm),
                )
            })
        })
        .collect();
    active.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .expect("finite norms")
            .then(a.1.cmp(&b.1))
    });

    // (track, leader direction, summed member directions)
    let mut groups: Vec<(usize, Cartesian<T>, [T; 3])> = Vec::new();
    let merge = T::lit(cfg.merge_angle_deg);
    for (_, track, dir) in active {
        match groups
            .iter_mut()
            .find(|(_, leader, _)| angular_distance(leader, &dir) < merge)
        {
            Some((_, _, sum)) => {
                sum[0] += dir.x;
                sum[1] += dir.y;
                sum[2] += dir.z;
            }
            None => groups.push((track, dir, dir.to_array())),
        }
    }
    for (track, leader, sum) in groups {
        let mean = Cartesian::new(sum[0].as_f64(), sum[1].as_f64(), sum[2].as_f64())
            .unwrap_or_else(|_| {
                Cartesian::new_unchecked(leader.x.as_f64(), leader.y.as_f64(), leader.z.as_f64())
            });
        events.push(EventRecord {
            frame: FrameIndex(label_frame),
            class: ClassId::new(class, tensor.classes)?,
            source: track as u32,
            doa: mean.to_spherical()?,
            distance_cm: None,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::parse_labels;
    use approx::assert_abs_diff_eq;

    fn one_frame(tracks: &[[f64; 3]]) -> MultiAccdoa<f64> {
        let mut t = MultiAccdoa::zeros(tracks.len(), 1, 1, 10.0);
        for (n, v) in tracks.iter().enumerate() {
            t.set_vector(n, 0, 0, *v);
        }
        t
    }

    #[test]
    fn empty_annotation_encodes_to_zeros() {
        let t = encode_targets::<f64>(&ClipAnnotation::empty(13), 3, 13, 50, 10.0).unwrap();
        assert_eq!(t.shape(), [3, 3, 13, 50]);
        assert!(t.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_event_fills_every_track() {
        let clip = parse_labels("4,0,0,0,0,100\n", 13).unwrap();
        let t = encode_targets::<f64>(&clip, 3, 13, 10, 10.0).unwrap();
        for track in 0..3 {
            assert_eq!(t.vector(track, 0, 4), [1.0, 0.0, 0.0]);
            assert_eq!(t.vector(track, 0, 3), [0.0, 0.0, 0.0]);
            assert_eq!(t.vector(track, 1, 4), [0.0, 0.0, 0.0]);
        }
    }

    #[test]
    fn two_events_duplicate_round_robin() {
        let clip = parse_labels("0,0,1,0,0,100\n0,0,2,90,0,100\n", 13).unwrap();
        let t = encode_targets::<f64>(&clip, 3, 13, 1, 10.0).unwrap();
        let round = |v: [f64; 3]| v.map(|c| c.round());
        assert_eq!(round(t.vector(0, 0, 0)), [1.0, 0.0, 0.0]);
        assert_eq!(round(t.vector(1, 0, 0)), [0.0, 1.0, 0.0]);
        assert_eq!(round(t.vector(2, 0, 0)), [1.0, 0.0, 0.0]);
    }

    #[test]
    fn too_many_events_for_tracks() {
        let clip = parse_labels("7,3,0,0,0,1\n7,3,1,40,0,1\n7,3,2,80,0,1\n", 13).unwrap();
        let err = encode_targets::<f64>(&clip, 2, 13, 10, 10.0).unwrap_err();
        assert!(matches!(
            err,
            Error::TrackCapacity {
                frame: 7,
                class: 3,
                active: 3,
                tracks: 2
            }
        ));
    }

    #[test]
    fn encodes_at_a_finer_output_rate() {
        let clip = parse_labels("2,0,0,0,0,100\n", 13).unwrap();
        let t = encode_targets::<f32>(&clip, 1, 13, 8, 20.0).unwrap();
        let active: Vec<usize> = (0..8).filter(|&f| t.vector(0, 0, f)[0] > 0.5).collect();
        assert_eq!(active, vec![4, 5]);
        let back = decode_predictions(&t, &DecodeConfig::default()).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back.events()[0].frame, FrameIndex(2));
    }

    #[test]
    fn loss_examples() {
        let e1 = [1.0, 0.0, 0.0];
        let e2 = [0.0, 1.0, 0.0];
        let target = one_frame(&[e1, e2]);
        assert_eq!(pit_loss(&target, &target).unwrap(), 0.0);
        assert_eq!(pit_loss(&one_frame(&[e2, e1]), &target).unwrap(), 0.0);
        // Best permutation leaves one track off by |e1 - e2|^2 = 2, over 3 * 2 entries.
        assert_abs_diff_eq!(pit_loss(&one_frame(&[e1, e1]), &target).unwrap(), 1.0 / 3.0);
    }

    #[test]
    fn loss_shape_mismatch() {
        let a = MultiAccdoa::<f64>::zeros(3, 13, 5, 10.0);
        let b = MultiAccdoa::<f64>::zeros(3, 13, 6, 10.0);
        assert!(matches!(pit_loss(&a, &b), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn permutation_listing() {
        assert_eq!(permutations(1), vec![vec![0]]);
        assert_eq!(permutations(3).len(), 6);
        assert_eq!(permutations(3)[1], vec![0, 2, 1]);
    }

    #[test]
    fn decode_thresholds() {
        let cfg = DecodeConfig::default();
        let clip = decode_predictions(&one_frame(&[[0.5, 0.0, 0.0]]), &cfg).unwrap();
        assert_eq!(clip.len(), 1);
        let doa = clip.events()[0].doa;
        assert_abs_diff_eq!(doa.azimuth_deg(), 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(doa.elevation_deg(), 0.0, epsilon = 1e-9);
        assert!(decode_predictions(&one_frame(&[[0.2, 0.0, 0.0]]), &cfg)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn decode_merges_close_tracks() {
        let horizontal = |azi: f64| {
            let r = azi.to_radians();
            [r.cos(), r.sin(), 0.0]
        };
        let (a, b, c) = (horizontal(0.0), horizontal(10.0), horizontal(60.0));
        let clip = decode_predictions(&one_frame(&[a, b, c]), &DecodeConfig::default()).unwrap();
        assert_eq!(clip.len(), 2);
        let azimuths: Vec<f64> = clip.events().iter().map(|e| e.doa.azimuth_deg()).collect();
        assert_abs_diff_eq!(azimuths[0], 5.0, epsilon = 1e-9);
        assert_abs_diff_eq!(azimuths[1], 60.0, epsilon = 1e-9);
        let no_merge = DecodeConfig {
            merge_angle_deg: 5.0,
            ..DecodeConfig::default()
        };
        assert_eq!(
            decode_predictions(&one_frame(&[a, b, c]), &no_merge)
                .unwrap()
                .len(),
            3
        );
    }

    #[test]
    fn decode_rejects_bad_config() {
        let cfg = DecodeConfig {
            activity_threshold: 1.5,
            ..DecodeConfig::default()
        };
        assert!(decode_predictions(&one_frame(&[[1.0, 0.0, 0.0]]), &cfg).is_err());
    }

    #[test]
    fn flat_array_round_trip() {
        let clip = parse_labels("0,1,0,30,10,100\n", 13).unwrap();
        let t = encode_targets::<f32>(&clip, 3, 13, 4, 10.0).unwrap();
        let bytes = t.to_flat_array().to_bytes();
        let back =
            MultiAccdoa::from_flat_array(FlatArray::<f32>::from_bytes(&bytes).unwrap()).unwrap();
        assert_eq!(back, t);
        let wrong = FlatArray::new(vec![2, 2], 10.0, vec![0.0f32; 4]).unwrap();
        assert!(MultiAccdoa::from_flat_array(wrong).is_err());
    }
}
