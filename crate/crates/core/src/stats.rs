//! Corpus statistics: frame coverage, polyphony, event durations and DOA
//! histograms, globally and per class.
//!
//! A clip contributes `frame_count()` frames to the denominator, i.e. one past
//! its last annotated frame unless a clip length was set explicitly. Polyphony
//! is the number of simultaneous events in a frame (same-class events only for
//! per-class figures); mean polyphony and the polyphony distribution are taken
//! over active frames. A duration is a maximal run of consecutive frames in
//! which one `(class, source)` pair is active.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::annotation::ClipAnnotation;
use crate::error::{Error, Result};

pub const DOA_BIN_DEG: i32 = 10;
pub const AZIMUTH_BINS: usize = 36;
pub const ELEVATION_BINS: usize = 18;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolyphonyStats {
    pub active_frames: u64,
    pub total_frames: u64,
    pub frame_coverage: f64,
    pub max_polyphony: u32,
    pub mean_polyphony: f64,
    /// Active frames at polyphony `1, 2, ..., max`.
    pub polyphony_counts: Vec<u64>,
    /// `polyphony_counts` divided by `active_frames`.
    pub polyphony_histogram: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DurationStats {
    /// Run lengths in frames, ascending.
    pub durations: Vec<u32>,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DoaHistogram {
    /// 36 bins of 10° from -180°; 180° falls into the last bin.
    pub azimuth: Vec<u64>,
    /// 18 bins of 10° from -90°; 90° falls into the last bin.
    pub elevation: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScopeStats {
    pub polyphony: PolyphonyStats,
    pub durations: DurationStats,
    pub doa: DoaHistogram,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetStats {
    pub clips: usize,
    pub class_count: usize,
    pub global: ScopeStats,
    pub per_class: Vec<ScopeStats>,
}

/// Integer tallies for one scope; summed across clips.
#[derive(Debug, Clone, Default)]
struct Tally {
    active_frames: u64,
    total_frames: u64,
    polyphony_counts: BTreeMap<u32, u64>,
    durations: Vec<u32>,
    azimuth: Vec<u64>,
    elevation: Vec<u64>,
}

impl Tally {
    fn new() -> Self {
        Self {
            azimuth: vec![0; AZIMUTH_BINS],
            elevation: vec![0; ELEVATION_BINS],
            ..Self::default()
        }
    }

    fn merge(&mut self, other: Tally) {
        self.active_frames += other.active_frames;
        self.total_frames += other.total_frames;
        for (level, count) in other.polyphony_counts {
            *self.polyphony_counts.entry(level).or_default() += count;
        }
        self.durations.extend(other.durations);
        for (a, b) in self.azimuth.iter_mut().zip(other.azimuth) {
            *a += b;
        }
        for (a, b) in self.elevation.iter_mut().zip(other.elevation) {
            *a += b;
        }
    }

    fn add_frame(&mut self, polyphony: u32) {
        if polyphony > 0 {
            self.active_frames += 1;
            *self.polyphony_counts.entry(polyphony).or_default() += 1;
        }
    }

    fn finish(mut self) -> ScopeStats {
        let max_polyphony = self
            .polyphony_counts
            .keys()
            .next_back()
            .copied()
            .unwrap_or(0);
        let counts: Vec<u64> = (1..=max_polyphony)
            .map(|level| self.polyphony_counts.get(&level).copied().unwrap_or(0))
            .collect();
        let active = self.active_frames;
        let ratio = |n: u64, d: u64| if d == 0 { 0.0 } else { n as f64 / d as f64 };
        let weighted: u64 = counts.iter().zip(1u64..).map(|(c, level)| c * level).sum();
        self.durations.sort_unstable();
        let q = |p: f64| quantile(&self.durations, p);
        ScopeStats {
            polyphony: PolyphonyStats {
                active_frames: active,
                total_frames: self.total_frames,
                frame_coverage: ratio(active, self.total_frames),
                max_polyphony,
                mean_polyphony: ratio(weighted, active),
                polyphony_histogram: counts.iter().map(|&c| ratio(c, active)).collect(),
                polyphony_counts: counts,
            },
            durations: DurationStats {
                q1: q(0.25),
                median: q(0.5),
                q3: q(0.75),
                durations: self.durations,
            },
            doa: DoaHistogram {
                azimuth: self.azimuth,
                elevation: self.elevation,
            },
        }
    }
}

/// Linear-interpolation quantile of ascending data; 0 for no data.
fn quantile(sorted: &[u32], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let position = p * (sorted.len() - 1) as f64;
    let lower = position.floor() as usize;
    let upper = position.ceil() as usize;
    let fraction = position - lower as f64;
    f64::from(sorted[lower]) + fraction * (f64::from(sorted[upper]) - f64::from(sorted[lower]))
}

pub fn azimuth_bin(azimuth_deg: f64) -> usize {
    (((azimuth_deg + 180.0) / f64::from(DOA_BIN_DEG)).floor() as usize).min(AZIMUTH_BINS - 1)
}

pub fn elevation_bin(elevation_deg: f64) -> usize {
    (((elevation_deg + 90.0) / f64::from(DOA_BIN_DEG)).floor() as usize).min(ELEVATION_BINS - 1)
}

fn tally_clip(clip: &ClipAnnotation, class_count: usize) -> (Tally, Vec<Tally>) {
    let mut global = Tally::new();
    let mut per_class = vec![Tally::new(); class_count];
    global.total_frames = u64::from(clip.frame_count());
    for t in &mut per_class {
        t.total_frames = global.total_frames;
    }

    let mut class_polyphony = vec![0u32; class_count];
    for (_, events) in clip.frames() {
        global.add_frame(events.len() as u32);
        class_polyphony.fill(0);
        for e in events {
            let c = e.class.index();
            class_polyphony[c] += 1;
            let az = azimuth_bin(e.doa.azimuth_deg());
            let el = elevation_bin(e.doa.elevation_deg());
            global.azimuth[az] += 1;
            global.elevation[el] += 1;
            per_class[c].azimuth[az] += 1;
            per_class[c].elevation[el] += 1;
        }
        for (tally, &p) in per_class.iter_mut().zip(&class_polyphony) {
            tally.add_frame(p);
        }
    }

    // Runs per (class, source): sort that key's frames and split on gaps.
    let mut frames_by_key: BTreeMap<(usize, u32), Vec<u32>> = BTreeMap::new();
    for e in clip.events() {
        frames_by_key
            .entry((e.class.index(), e.source))
            .or_default()
            .push(e.frame.value());
    }
    for ((class, _), frames) in frames_by_key {
        let mut run = 1u32;
        for pair in frames.windows(2) {
            if pair[1] == pair[0] + 1 {
                run += 1;
            } else {
                global.durations.push(run);
                per_class[class].durations.push(run);
                run = 1;
            }
        }
        global.durations.push(run);
        per_class[class].durations.push(run);
    }
    (global, per_class)
}

pub fn compute_stats(annotations: &[ClipAnnotation], class_count: usize) -> Result<DatasetStats> {
    if let Some(clip) = annotations.iter().find(|a| a.class_count() != class_count) {
        return Err(Error::ClassCountMismatch {
            expected: class_count,
            found: clip.class_count(),
        });
    }
    let tallies: Vec<(Tally, Vec<Tally>)> = annotations
        .par_iter()
        .map(|clip| tally_clip(clip, class_count))
        .collect();
    let mut global = Tally::new();
    let mut per_class = vec![Tally::new(); class_count];
    for (g, classes) in tallies {
        global.merge(g);
        for (acc, c) in per_class.iter_mut().zip(classes) {
            acc.merge(c);
        }
    }
    Ok(DatasetStats {
        clips: annotations.len(),
        class_count,
        global: global.finish(),
        per_class: per_class.into_iter().map(Tally::finish).collect(),
    })
}

fn scope_names(stats: &DatasetStats, class_names: Option<&[&str]>) -> Vec<(String, String)> {
    std::iter::once(("global".to_string(), "all".to_string()))
        .chain((0..stats.class_count).map(|c| {
            let name = class_names
                .and_then(|names| names.get(c).copied())
                .map_or_else(|| format!("class_{c}"), str::to_string);
            (c.to_string(), name)
        }))
        .collect()
}

/// Writes plot-ready CSV tables into `dir` and returns the paths written:
///
/// * `summary.csv`: coverage and polyphony per scope (global, then classes
///   in index order), polyphony distribution as percent of active frames.
/// * `durations.csv`: count, quartiles, min and max run length per scope.
/// * `duration_samples.csv`: one row per run, for box plots.
/// * `doa_azimuth.csv`, `doa_elevation.csv`: bin edges and counts per scope.
pub fn emit_reports(
    stats: &DatasetStats,
    dir: impl AsRef<Path>,
    class_names: Option<&[&str]>,
) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let scopes: Vec<&ScopeStats> = std::iter::once(&stats.global)
        .chain(&stats.per_class)
        .collect();
    let names = scope_names(stats, class_names);
    let levels = stats.global.polyphony.max_polyphony.max(1) as usize;

    let mut summary = String::from(
        "scope,name,coverage_pct,active_frames,total_frames,max_polyphony,mean_polyphony",
    );
    for level in 1..=levels {
        let _ = write!(summary, ",polyphony_{level}_pct");
    }
    summary.push('\n');
    for ((scope, name), s) in names.iter().zip(&scopes) {
        let p = &s.polyphony;
        let _ = write!(
            summary,
            "{scope},{name},{:.3},{},{},{},{:.4}",
            p.frame_coverage * 100.0,
            p.active_frames,
            p.total_frames,
            p.max_polyphony,
            p.mean_polyphony
        );
        for level in 0..levels {
            let fraction = p.polyphony_histogram.get(level).copied().unwrap_or(0.0);
            let _ = write!(summary, ",{:.3}", fraction * 100.0);
        }
        summary.push('\n');
    }

    let mut durations = String::from("scope,name,count,q1,median,q3,min,max\n");
    let mut samples = String::from("scope,name,duration_frames\n");
    for ((scope, name), s) in names.iter().zip(&scopes) {
        let d = &s.durations;
        let _ = writeln!(
            durations,
            "{scope},{name},{},{:.2},{:.2},{:.2},{},{}",
            d.durations.len(),
            d.q1,
            d.median,
            d.q3,
            d.durations.first().copied().unwrap_or(0),
            d.durations.last().copied().unwrap_or(0)
        );
        if scope != "global" {
            for run in &d.durations {
                let _ = writeln!(samples, "{scope},{name},{run}");
            }
        }
    }

    let histogram = |bins: usize, lower: i32, pick: &dyn Fn(&DoaHistogram) -> &Vec<u64>| {
        let mut out = String::from("bin_start_deg,bin_end_deg");
        for (scope, _) in &names {
            let _ = write!(
                out,
                ",{}",
                if scope == "global" {
                    "global".into()
                } else {
                    format!("class_{scope}")
                }
            );
        }
        out.push('\n');
        for bin in 0..bins {
            let start = lower + DOA_BIN_DEG * bin as i32;
            let _ = write!(out, "{start},{}", start + DOA_BIN_DEG);
            for s in &scopes {
                let _ = write!(out, ",{}", pick(&s.doa)[bin]);
            }
            out.push('\n');
        }
        out
    };
    let azimuth = histogram(AZIMUTH_BINS, -180, &|h| &h.azimuth);
    let elevation = histogram(ELEVATION_BINS, -90, &|h| &h.elevation);

    let mut written = Vec::new();
    for (file, body) in [
        ("summary.csv", summary),
        ("durations.csv", durations),
        ("duration_samples.csv", samples),
        ("doa_azimuth.csv", azimuth),
        ("doa_elevation.csv", elevation),
    ] {
        let path = dir.join(file);
        fs::write(&path, body)?;
        written.push(path);
    }
    Ok(written)
}
