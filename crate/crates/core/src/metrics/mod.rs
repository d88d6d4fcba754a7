//! Joint localization-and-detection metrics.
//!
//! References and predictions are associated per label frame and class with
//! the Hungarian method. Frame-level counts and matched angles are summed into
//! non-overlapping segments (ten 100 ms frames by default) from which the
//! location-aware detection scores (`ER20`, `F20`) and the class-aware
//! localization scores (`LE_CD`, `LR_CD`) are computed:
//!
//! * `ER20` is micro-averaged: per segment, substitutions `min(FN, FP)`,
//!   deletions `max(0, FN - FP)` and insertions `max(0, FP - FN)` summed over
//!   classes, divided by the number of references.
//! * `F20`, `LE_CD` and `LR_CD` are computed per class, then macro-averaged
//!   over the classes that have at least one reference or prediction.
//! * A matched pair farther apart than the spatial threshold is a false
//!   positive for `ER20`/`F20` but still counts as a match for `LE_CD`/`LR_CD`.
//! * A class with no matched pair at all gets `LE_CD = 180`.

mod assignment;
pub mod report;

pub use assignment::{match_frame, solve_assignment, MatchedPair};

use rayon::prelude::*;
use serde::Serialize;

use crate::annotation::{ClipAnnotation, FrameIndex};
use crate::error::{Error, Result};
use crate::CartesianDoa;

/// Localization error assigned to a class without any matched pair.
pub const MAX_LOCALIZATION_ERROR_DEG: f64 = 180.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricConfig {
    pub spatial_threshold_deg: f64,
    /// Label frames per evaluation segment.
    pub segment_frames: u32,
    pub class_count: usize,
}

impl MetricConfig {
    pub fn new(class_count: usize) -> Self {
        Self {
            spatial_threshold_deg: 20.0,
            segment_frames: 10,
            class_count,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.spatial_threshold_deg.is_finite() || self.spatial_threshold_deg <= 0.0 {
            return Err(Error::Config(format!(
                "spatial threshold must be positive, got {}",
                self.spatial_threshold_deg
            )));
        }
        if self.segment_frames == 0 {
            return Err(Error::Config(
                "segment length must be at least one frame".into(),
            ));
        }
        if self.class_count == 0 {
            return Err(Error::Config("class count must be positive".into()));
        }
        Ok(())
    }
}

/// Counts for one class in one segment, summed over the segment's frames.
///
/// Per frame `K = min(P, R)`, `FN = max(0, R - P)` and
/// `FP = max(0, P - R) + L`; the segment holds the sums.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ClassSegmentCounts {
    pub predictions: u32,
    pub references: u32,
    pub matched: u32,
    /// Matched pairs whose angle exceeds the spatial threshold.
    pub beyond_threshold: u32,
    pub false_negatives: u32,
    pub false_positives: u32,
    /// Angle of every matched pair, in degrees.
    pub angular_errors: Vec<f64>,
}

impl ClassSegmentCounts {
    /// Matches within the spatial threshold.
    pub fn true_positives(&self) -> u32 {
        self.matched - self.beyond_threshold
    }

    fn add_frame(&mut self, refs: usize, preds: usize, angles: &[f64], threshold: f64) {
        let beyond = angles.iter().filter(|&&a| a > threshold).count() as u32;
        self.references += refs as u32;
        self.predictions += preds as u32;
        self.matched += angles.len() as u32;
        self.beyond_threshold += beyond;
        self.false_negatives += refs.saturating_sub(preds) as u32;
        self.false_positives += preds.saturating_sub(refs) as u32 + beyond;
        self.angular_errors.extend_from_slice(angles);
    }
}

/// Per-segment, per-class counts of one clip (or of a pooled corpus).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentCounts {
    pub class_count: usize,
    /// Indexed `[segment][class]`.
    pub segments: Vec<Vec<ClassSegmentCounts>>,
}

impl SegmentCounts {
    pub fn empty(class_count: usize) -> Self {
        Self {
            class_count,
            segments: Vec::new(),
        }
    }

    /// Appends another clip's segments.
    pub fn extend(&mut self, other: SegmentCounts) {
        debug_assert_eq!(self.class_count, other.class_count);
        self.segments.extend(other.segments);
    }
}

/// Runs frame-level association for every class and sums counts per segment.
pub fn accumulate_counts(
    reference: &ClipAnnotation,
    prediction: &ClipAnnotation,
    cfg: &MetricConfig,
) -> Result<SegmentCounts> {
    cfg.validate()?;
    for clip in [reference, prediction] {
        if clip.class_count() != cfg.class_count {
            return Err(Error::ClassCountMismatch {
                expected: cfg.class_count,
                found: clip.class_count(),
            });
        }
    }
    let frames = reference.frame_count().max(prediction.frame_count());
    let segment_count = frames.div_ceil(cfg.segment_frames) as usize;
    let mut segments = vec![vec![ClassSegmentCounts::default(); cfg.class_count]; segment_count];

    let mut active_frames: Vec<FrameIndex> = reference
        .frames()
        .chain(prediction.frames())
        .map(|(f, _)| f)
        .collect();
    active_frames.sort_unstable();
    active_frames.dedup();

    let mut ref_dirs: Vec<CartesianDoa> = Vec::new();
    let mut pred_dirs: Vec<CartesianDoa> = Vec::new();
    for frame in active_frames {
        let segment = &mut segments[(frame.0 / cfg.segment_frames) as usize];
        let refs = reference.events_at(frame);
        let preds = prediction.events_at(frame);
        let (mut ri, mut pi) = (0, 0);
        while ri < refs.len() || pi < preds.len() {
            let class = match (refs.get(ri), preds.get(pi)) {
                (Some(r), Some(p)) => r.class.min(p.class),
                (Some(r), None) => r.class,
                (None, Some(p)) => p.class,
                (None, None) => unreachable!(),
            };
            ref_dirs.clear();
            pred_dirs.clear();
            while ri < refs.len() && refs[ri].class == class {
                ref_dirs.push(refs[ri].doa.to_cartesian());
                ri += 1;
            }
            while pi < preds.len() && preds[pi].class == class {
                pred_dirs.push(preds[pi].doa.to_cartesian());
                pi += 1;
            }
            let angles: Vec<f64> = match_frame(&ref_dirs, &pred_dirs)
                .into_iter()
                .map(|m| m.angle_deg)
                .collect();
            segment[class.index()].add_frame(
                ref_dirs.len(),
                pred_dirs.len(),
                &angles,
                cfg.spatial_threshold_deg,
            );
        }
    }
    Ok(SegmentCounts {
        class_count: cfg.class_count,
        segments,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassScores {
    pub class: usize,
    /// False when the class has neither references nor predictions; such
    /// classes are left out of the macro averages.
    pub included: bool,
    pub f20: f64,
    pub le_cd: f64,
    pub lr_cd: f64,
    pub references: u64,
    pub predictions: u64,
    pub matched: u64,
    pub true_positives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeldScores {
    pub er20: f64,
    pub f20: f64,
    pub le_cd: f64,
    pub lr_cd: f64,
    pub e_seld: f64,
    pub per_class: Vec<ClassScores>,
}

/// Aggregated SELD error: the mean of `ER`, `1 - F`, `LE / 180` and `1 - LR`.
pub fn aggregate_seld_error(er20: f64, f20: f64, le_cd_deg: f64, lr_cd: f64) -> f64 {
    (er20 + (1.0 - f20) + le_cd_deg / MAX_LOCALIZATION_ERROR_DEG + (1.0 - lr_cd)) / 4.0
}

/// Sum that does not depend on the order of `values`.
fn order_independent_sum(mut values: Vec<f64>) -> f64 {
    values.sort_unstable_by(f64::total_cmp);
    values.into_iter().sum()
}

/// Turns segment counts into the four metrics and the aggregated error.
pub fn compute_scores(counts: &SegmentCounts, cfg: &MetricConfig) -> SeldScores {
    let classes = counts.class_count;
    debug_assert_eq!(classes, cfg.class_count);

    let mut errors = 0u64;
    let mut reference_total = 0u64;
    for segment in &counts.segments {
        let fn_sum: u64 = segment.iter().map(|c| u64::from(c.false_negatives)).sum();
        let fp_sum: u64 = segment.iter().map(|c| u64::from(c.false_positives)).sum();
        let substitutions = fn_sum.min(fp_sum);
        let deletions = fn_sum.saturating_sub(fp_sum);
        let insertions = fp_sum.saturating_sub(fn_sum);
        errors += substitutions + deletions + insertions;
        reference_total += segment.iter().map(|c| u64::from(c.references)).sum::<u64>();
    }
    let er20 = errors as f64 / reference_total.max(1) as f64;

    let mut per_class = Vec::with_capacity(classes);
    for class in 0..classes {
        let mut s = ClassScores {
            class,
            included: false,
            f20: 0.0,
            le_cd: MAX_LOCALIZATION_ERROR_DEG,
            lr_cd: 0.0,
            references: 0,
            predictions: 0,
            matched: 0,
            true_positives: 0,
            false_positives: 0,
            false_negatives: 0,
        };
        let mut segment_errors = Vec::new();
        for segment in &counts.segments {
            let c = &segment[class];
            s.references += u64::from(c.references);
            s.predictions += u64::from(c.predictions);
            s.matched += u64::from(c.matched);
            s.true_positives += u64::from(c.true_positives());
            s.false_positives += u64::from(c.false_positives);
            s.false_negatives += u64::from(c.false_negatives);
            if c.matched > 0 {
                let sum = order_independent_sum(c.angular_errors.clone());
                segment_errors.push(sum / f64::from(c.matched));
            }
        }
        s.included = s.references > 0 || s.predictions > 0;
        let f_denominator = 2 * s.true_positives + s.false_positives + s.false_negatives;
        if f_denominator > 0 {
            s.f20 = (2 * s.true_positives) as f64 / f_denominator as f64;
        }
        if !segment_errors.is_empty() {
            let n = segment_errors.len() as f64;
            s.le_cd = order_independent_sum(segment_errors) / n;
        }
        if s.matched + s.false_negatives > 0 {
            s.lr_cd = s.matched as f64 / (s.matched + s.false_negatives) as f64;
        }
        per_class.push(s);
    }

    let included: Vec<&ClassScores> = per_class.iter().filter(|c| c.included).collect();
    let (f20, le_cd, lr_cd) = if included.is_empty() {
        (1.0, 0.0, 1.0)
    } else {
        let n = included.len() as f64;
        (
            included.iter().map(|c| c.f20).sum::<f64>() / n,
            included.iter().map(|c| c.le_cd).sum::<f64>() / n,
            included.iter().map(|c| c.lr_cd).sum::<f64>() / n,
        )
    };
    SeldScores {
        er20,
        f20,
        le_cd,
        lr_cd,
        e_seld: aggregate_seld_error(er20, f20, le_cd, lr_cd),
        per_class,
    }
}

/// Scores a single reference/prediction pair.
pub fn evaluate_clip(
    reference: &ClipAnnotation,
    prediction: &ClipAnnotation,
    cfg: &MetricConfig,
) -> Result<SeldScores> {
    let counts = accumulate_counts(reference, prediction, cfg)?;
    Ok(compute_scores(&counts, cfg))
}

#[derive(Debug, Clone)]
pub struct ClipPair {
    pub name: String,
    pub reference: ClipAnnotation,
    pub prediction: ClipAnnotation,
}

/// Pools segment counts over all clips, then scores once.
///
/// Clips are processed on the current rayon pool. Segments are pooled in a
/// canonical order (clip name, then input position), so the result does not
/// depend on worker count or on the order of `pairs`.
pub fn evaluate_corpus(pairs: &[ClipPair], cfg: &MetricConfig) -> Result<SeldScores> {
    cfg.validate()?;
    let per_clip: Vec<SegmentCounts> = pairs
        .par_iter()
        .map(|pair| {
            accumulate_counts(&pair.reference, &pair.prediction, cfg)
                .map_err(|e| e.in_clip(pair.name.clone()))
        })
        .collect::<Result<_>>()?;
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.sort_by(|&a, &b| pairs[a].name.cmp(&pairs[b].name));
    let mut pooled = SegmentCounts::empty(cfg.class_count);
    let mut per_clip: Vec<Option<SegmentCounts>> = per_clip.into_iter().map(Some).collect();
    for index in order {
        pooled.extend(per_clip[index].take().expect("each clip pooled once"));
    }
    Ok(compute_scores(&pooled, cfg))
}
