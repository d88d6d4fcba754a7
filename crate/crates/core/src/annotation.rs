//! Event records and per-clip annotations, shared by references and predictions.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::SphericalDoa;

/// Class names of the full 13-class set, in class-index order.
pub const STARSS23_CLASSES: [&str; 13] = [
    "female_speech",
    "male_speech",
    "clapping",
    "telephone",
    "laughter",
    "domestic_sounds",
    "footsteps",
    "door",
    "music",
    "musical_instrument",
    "water_tap",
    "bell",
    "knock",
];

/// Full-set indices of the body-related classes: speech (both), clapping,
/// laughter, footsteps. Position in this array is the index in the 5-class set.
pub const BODY_CLASSES: [usize; 5] = [0, 1, 2, 4, 6];

/// Duration of one label frame.
pub const LABEL_FRAME_SECONDS: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ClassId(usize);

impl ClassId {
    pub fn new(index: usize, class_count: usize) -> Result<Self> {
        if index >= class_count {
            return Err(Error::OutOfRange {
                what: "class index",
                value: index as f64,
            });
        }
        Ok(Self(index))
    }

    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Index of a 100 ms label frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize)]
pub struct FrameIndex(pub u32);

impl FrameIndex {
    pub fn value(self) -> u32 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventRecord {
    pub frame: FrameIndex,
    pub class: ClassId,
    pub source: u32,
    pub doa: SphericalDoa,
    /// Source distance in centimetres; absent on prediction files.
    pub distance_cm: Option<u32>,
}

impl EventRecord {
    pub fn key(&self) -> (FrameIndex, ClassId, u32) {
        (self.frame, self.class, self.source)
    }
}

/// All events of one clip, sorted by `(frame, class, source)` with no repeated triple.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipAnnotation {
    events: Vec<EventRecord>,
    frame_count: u32,
    class_count: usize,
}

impl ClipAnnotation {
    /// Sorts `events` into canonical order and checks the clip invariants.
    /// `frame_count` becomes one past the last annotated frame.
    pub fn new(mut events: Vec<EventRecord>, class_count: usize) -> Result<Self> {
        events.sort_by_key(EventRecord::key);
        for pair in events.windows(2) {
            if pair[0].key() == pair[1].key() {
                let (frame, class, source) = pair[1].key();
                return Err(Error::DuplicateEvent {
                    frame: frame.0,
                    class: class.0,
                    source_id: source,
                });
            }
        }
        for event in &events {
            if event.class.0 >= class_count {
                return Err(Error::OutOfRange {
                    what: "class index",
                    value: event.class.0 as f64,
                });
            }
            if event.distance_cm == Some(0) {
                return Err(Error::OutOfRange {
                    what: "distance",
                    value: 0.0,
                });
            }
        }
        let frame_count = events.last().map_or(0, |e| e.frame.0 + 1);
        Ok(Self {
            events,
            frame_count,
            class_count,
        })
    }

    pub fn empty(class_count: usize) -> Self {
        Self {
            events: Vec::new(),
            frame_count: 0,
            class_count,
        }
    }

    /// Overrides the clip length, e.g. from a clip-length sidecar. The length
    /// may not cut off annotated frames.
    pub fn with_frame_count(mut self, frame_count: u32) -> Result<Self> {
        let needed = self.events.last().map_or(0, |e| e.frame.0 + 1);
        if frame_count < needed {
            return Err(Error::Config(format!(
                "clip length {frame_count} frames is shorter than the last annotated frame {}",
                needed - 1
            )));
        }
        self.frame_count = frame_count;
        Ok(self)
    }

    pub fn events(&self) -> &[EventRecord] {
        &self.events
    }

    pub fn into_events(self) -> Vec<EventRecord> {
        self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn frame_count(&self) -> u32 {
        self.frame_count
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    /// Events at one frame, in `(class, source)` order.
    pub fn events_at(&self, frame: FrameIndex) -> &[EventRecord] {
        let start = self.events.partition_point(|e| e.frame < frame);
        let end = self.events.partition_point(|e| e.frame <= frame);
        &self.events[start..end]
    }

    /// Non-empty frames in increasing order with their events.
    pub fn frames(&self) -> impl Iterator<Item = (FrameIndex, &[EventRecord])> {
        self.events
            .chunk_by(|a, b| a.frame == b.frame)
            .map(|chunk| (chunk[0].frame, chunk))
    }

    /// DOAs rounded to whole degrees, as required by the label file format.
    pub fn rounded(&self) -> Self {
        let events = self
            .events
            .iter()
            .map(|e| EventRecord {
                doa: e.doa.rounded(),
                ..*e
            })
            .collect();
        Self {
            events,
            ..self.clone()
        }
    }

    /// Restricts a 13-class annotation to the body-related 5-class set,
    /// re-indexing classes and dropping everything else.
    pub fn body_subset(&self) -> Result<Self> {
        if self.class_count != STARSS23_CLASSES.len() {
            return Err(Error::ClassCountMismatch {
                expected: STARSS23_CLASSES.len(),
                found: self.class_count,
            });
        }
        let events = self
            .events
            .iter()
            .filter_map(|e| {
                BODY_CLASSES
                    .iter()
                    .position(|&c| c == e.class.0)
                    .map(|new_index| EventRecord {
                        class: ClassId(new_index),
                        ..*e
                    })
            })
            .collect();
        let mut subset = Self::new(events, BODY_CLASSES.len())?;
        subset.frame_count = self.frame_count;
        Ok(subset)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn event(frame: u32, class: usize, source: u32, azi: f64) -> EventRecord {
        EventRecord {
            frame: FrameIndex(frame),
            class: ClassId::new(class, 13).unwrap(),
            source,
            doa: SphericalDoa::new(azi, 0.0).unwrap(),
            distance_cm: Some(100),
        }
    }

    #[test]
    fn sorts_and_indexes_by_frame() {
        let clip = ClipAnnotation::new(
            vec![
                event(3, 1, 0, 0.0),
                event(1, 5, 2, 0.0),
                event(1, 2, 0, 0.0),
            ],
            13,
        )
        .unwrap();
        let keys: Vec<_> = clip
            .events()
            .iter()
            .map(|e| (e.frame.0, e.class.0))
            .collect();
        assert_eq!(keys, vec![(1, 2), (1, 5), (3, 1)]);
        assert_eq!(clip.frame_count(), 4);
        assert_eq!(clip.events_at(FrameIndex(1)).len(), 2);
        assert!(clip.events_at(FrameIndex(2)).is_empty());
        assert_eq!(clip.frames().count(), 2);
    }

    #[test]
    fn rejects_duplicates_and_bad_lengths() {
        let dup = ClipAnnotation::new(vec![event(0, 1, 1, 0.0), event(0, 1, 1, 20.0)], 13);
        assert!(matches!(
            dup,
            Err(Error::DuplicateEvent {
                frame: 0,
                class: 1,
                source_id: 1
            })
        ));
        let clip = ClipAnnotation::new(vec![event(9, 0, 0, 0.0)], 13).unwrap();
        assert!(clip.clone().with_frame_count(9).is_err());
        assert_eq!(clip.with_frame_count(600).unwrap().frame_count(), 600);
    }

    #[test]
    fn body_subset_remaps_classes() {
        let clip = ClipAnnotation::new(
            vec![
                event(0, 4, 1, 0.0),
                event(0, 3, 1, 0.0),
                event(1, 6, 2, 0.0),
            ],
            13,
        )
        .unwrap()
        .with_frame_count(50)
        .unwrap();
        let body = clip.body_subset().unwrap();
        assert_eq!(body.class_count(), 5);
        assert_eq!(body.frame_count(), 50);
        let classes: Vec<_> = body.events().iter().map(|e| e.class.index()).collect();
        assert_eq!(classes, vec![3, 4]);
    }
}
