//! `seldkit` command-line entry point.
//!
//! Exit codes: 0 success, 1 the inputs had errors (invalid labels, unreadable
//! files, failed evaluation), 2 usage error.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::json;
use walkdir::WalkDir;

use seldkit::accdoa::{decode_predictions, encode_targets, DecodeConfig, MultiAccdoa};
use seldkit::array_io::FlatArray;
use seldkit::features::audio::{features_to_array, FeatureExtractor};
use seldkit::features::visual::{encode_boxes, parse_box_file, VisualConfig};
use seldkit::labels::{parse_labels, validate_file, write_labels};
use seldkit::metrics::report::format_report;
use seldkit::metrics::{evaluate_corpus, ClipPair, MetricConfig};
use seldkit::perturb::{perturb, NoiseModel, PerturbationConfig};
use seldkit::stats::{compute_stats, emit_reports};
use seldkit::{AudioClip, ClipAnnotation, BODY_CLASSES, STARSS23_CLASSES};

/// Version tag of the JSON score report.
const REPORT_SCHEMA: &str = "seldkit.scores/1";

#[derive(Parser)]
#[command(
    name = "seldkit",
    version,
    about = "Sound event localization and detection toolkit"
)]
struct Cli {
    /// Dataset root; label directories default to <root>/metadata_dev.
    #[arg(long, global = true, env = "SELDKIT_DATA_ROOT")]
    data_root: Option<PathBuf>,

    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check label files and print a report per file.
    Validate {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long, default_value_t = 13)]
        classes: usize,
    },
    /// Score a prediction directory against a reference directory.
    Evaluate(EvaluateArgs),
    /// Dataset statistics as CSV tables.
    Stats {
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// CSV rows `file name, frame count` overriding clip lengths.
        #[arg(long)]
        clip_lengths: Option<PathBuf>,
        #[arg(long, default_value_t = 13, value_parser = class_set)]
        classes: usize,
    },
    /// Label file to multi-ACCDOA target tensor.
    EncodeAccdoa {
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 3)]
        tracks: usize,
        #[arg(long, default_value_t = 13, value_parser = class_set)]
        classes: usize,
        /// Output frames; defaults to covering the clip.
        #[arg(long)]
        frames: Option<usize>,
        #[arg(long, default_value_t = 10.0)]
        frame_rate: f64,
        /// Store single precision.
        #[arg(long)]
        f32: bool,
    },
    /// Multi-ACCDOA tensor to label file.
    DecodeAccdoa {
        #[arg(long)]
        tensor: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.3)]
        threshold: f64,
        #[arg(long, default_value_t = 15.0)]
        merge_angle: f64,
    },
    /// Spectrogram and phase-difference features from a 4-channel 24 kHz WAV.
    Features {
        #[arg(long)]
        audio: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// One window from this sample; without it the clip is tiled.
        #[arg(long)]
        start: Option<usize>,
        #[arg(long)]
        f32: bool,
    },
    /// Bounding-box sidecar to per-frame visual features.
    BboxEncode {
        #[arg(long)]
        boxes: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 360.0)]
        image_width: f64,
        #[arg(long, default_value_t = 180.0)]
        image_height: f64,
        /// Video frame rate stored in the output header.
        #[arg(long, default_value_t = 29.97)]
        fps: f64,
        /// Output frames; defaults to one past the last frame with boxes.
        #[arg(long)]
        frames: Option<usize>,
        #[arg(long, default_value_t = 0.5)]
        sigma_scale: f64,
    },
    /// Synthetic predictions from references.
    Perturb {
        #[arg(long = "ref")]
        reference: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        noise_deg: f64,
        #[arg(long, default_value_t = 0.0)]
        deletion_prob: f64,
        #[arg(long, default_value_t = 0.0)]
        insertion_rate: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Half-normal rotation magnitudes instead of exact ones.
        #[arg(long)]
        gaussian: bool,
        #[arg(long)]
        jobs: Option<usize>,
    },
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long = "ref")]
    reference: Option<PathBuf>,
    #[arg(long)]
    pred: PathBuf,
    #[arg(long, default_value_t = 20.0)]
    threshold: f64,
    #[arg(long, default_value_t = 10)]
    segment_frames: u32,
    /// 13 for the full set, 5 for the body-related subset.
    #[arg(long, default_value_t = 13, value_parser = class_set)]
    classes: usize,
    /// Write the machine-readable report here.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
    /// Fail on files present in only one directory.
    #[arg(long)]
    strict: bool,
}

fn class_set(s: &str) -> std::result::Result<usize, String> {
    match s.parse::<usize>() {
        Ok(13) => Ok(13),
        Ok(5) => Ok(5),
        _ => Err("must be 13 (full set) or 5 (body-related set)".into()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let root = cli.data_root;
    match cli.command {
        Command::Validate { files, classes } => validate(&files, classes),
        Command::Evaluate(args) => evaluate(args, root.as_deref()),
        Command::Stats {
            labels,
            out,
            clip_lengths,
            classes,
        } => {
            let labels = label_dir(labels, root.as_deref(), "--labels")?;
            stats(&labels, &out, clip_lengths.as_deref(), classes)
        }
        Command::EncodeAccdoa {
            labels,
            out,
            tracks,
            classes,
            frames,
            frame_rate,
            f32,
        } => {
            let clip = read_clip(&labels, classes)?;
            let frames = frames.unwrap_or_else(|| {
                (f64::from(clip.frame_count()) * frame_rate / 10.0).ceil() as usize
            });
            let tensor: MultiAccdoa<f64> =
                encode_targets(&clip, tracks, classes, frames, frame_rate)
                    .with_context(|| labels.display().to_string())?;
            write_array(tensor.to_flat_array(), &out, f32)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::DecodeAccdoa {
            tensor,
            out,
            threshold,
            merge_angle,
        } => {
            let array =
                FlatArray::<f64>::read(&tensor).with_context(|| tensor.display().to_string())?;
            let tensor_data = MultiAccdoa::from_flat_array(array)
                .with_context(|| tensor.display().to_string())?;
            let cfg = DecodeConfig {
                activity_threshold: threshold,
                merge_angle_deg: merge_angle,
                ..DecodeConfig::default()
            };
            let clip = decode_predictions(&tensor_data, &cfg)?;
            write_text(&out, &write_labels(&clip.rounded())?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Features {
            audio,
            out,
            start,
            f32,
        } => {
            let clip = AudioClip::read_wav(&audio).with_context(|| audio.display().to_string())?;
            let extractor = FeatureExtractor::new();
            let windows = match start {
                Some(start) => vec![extractor
                    .extract(&clip, start)
                    .with_context(|| audio.display().to_string())?],
                None => extractor
                    .extract_tiled(&clip)
                    .with_context(|| audio.display().to_string())?,
            };
            write_array(features_to_array(windows), &out, f32)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::BboxEncode {
            boxes,
            out,
            image_width,
            image_height,
            fps,
            frames,
            sigma_scale,
        } => {
            let text = read_text(&boxes)?;
            let by_frame = parse_box_file::<f64>(&text, image_width, image_height)
                .with_context(|| boxes.display().to_string())?;
            let count = frames
                .unwrap_or_else(|| by_frame.keys().next_back().map_or(0, |&f| f as usize + 1));
            let cfg = VisualConfig {
                sigma_scale,
                ..VisualConfig::default()
            };
            let mut data = Vec::new();
            let mut shape = vec![count, 2, cfg.max_boxes, cfg.grid_length];
            for frame in 0..count {
                let list = by_frame.get(&(frame as u32)).map_or(&[][..], Vec::as_slice);
                let feature = encode_boxes(list, &cfg)
                    .with_context(|| format!("{} frame {frame}", boxes.display()))?;
                shape[1..].copy_from_slice(&feature.shape());
                data.extend_from_slice(feature.values());
            }
            write_array(FlatArray::new(shape, fps, data)?, &out, false)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Perturb {
            reference,
            out,
            noise_deg,
            deletion_prob,
            insertion_rate,
            seed,
            gaussian,
            jobs,
        } => {
            set_jobs(jobs)?;
            let reference = label_dir(reference, root.as_deref(), "--ref")?;
            let cfg = PerturbationConfig {
                angular_noise_deg: noise_deg,
                deletion_prob,
                insertion_rate,
                seed,
                noise_model: if gaussian {
                    NoiseModel::Gaussian
                } else {
                    NoiseModel::ExactRotation
                },
            };
            cfg.validate()?;
            perturb_dir(&reference, &out, &cfg)
        }
    }
}

fn set_jobs(jobs: Option<usize>) -> Result<()> {
    if let Some(n) = jobs {
        if n == 0 {
            bail!("--jobs must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    Ok(())
}

fn label_dir(given: Option<PathBuf>, root: Option<&Path>, flag: &str) -> Result<PathBuf> {
    given
        .or_else(|| root.map(|r| r.join("metadata_dev")))
        .ok_or_else(|| anyhow!("{flag} is required when SELDKIT_DATA_ROOT is not set"))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| path.display().to_string())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| parent.display().to_string())?;
    }
    fs::write(path, text).with_context(|| path.display().to_string())
}

fn write_array(array: FlatArray<f64>, path: &Path, single: bool) -> Result<()> {
    let bytes = if single {
        let data = array.data.iter().map(|&v| v as f32).collect();
        FlatArray::new(array.shape, array.frame_rate_hz, data)?.to_bytes()
    } else {
        array.to_bytes()
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, bytes).with_context(|| path.display().to_string())
}

/// Parses with the full class set, then restricts to the body-related
/// subset when `classes` is 5.
fn read_clip(path: &Path, classes: usize) -> Result<ClipAnnotation> {
    let clip = parse_labels(&read_text(path)?, STARSS23_CLASSES.len())
        .with_context(|| path.display().to_string())?;
    if classes == BODY_CLASSES.len() {
        Ok(clip.body_subset()?)
    } else {
        Ok(clip)
    }
}

fn class_names(classes: usize) -> Vec<&'static str> {
    if classes == BODY_CLASSES.len() {
        BODY_CLASSES.iter().map(|&c| STARSS23_CLASSES[c]).collect()
    } else {
        STARSS23_CLASSES.to_vec()
    }
}

/// Label files under `dir` keyed by file name.
fn collect_labels(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    if !dir.is_dir() {
        bail!("{}: not a directory", dir.display());
    }
    let mut files = BTreeMap::new();
    for entry in WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.with_context(|| dir.display().to_string())?;
        let path = entry.path();
        if entry.file_type().is_file() && path.extension().is_some_and(|x| x == "csv") {
            let name = entry.file_name().to_string_lossy().into_owned();
            if let Some(previous) = files.insert(name.clone(), path.to_path_buf()) {
                bail!(
                    "{}: file name {name} also used by {}",
                    path.display(),
                    previous.display()
                );
            }
        }
    }
    Ok(files)
}

fn validate(files: &[PathBuf], classes: usize) -> Result<ExitCode> {
    let mut failed = false;
    for path in files {
        let report = validate_file(&read_text(path)?, classes);
        if files.len() > 1 {
            println!("{}:", path.display());
        }
        print!("{report}");
        failed |= report.error_count() > 0;
    }
    Ok(if failed {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

fn evaluate(args: EvaluateArgs, root: Option<&Path>) -> Result<ExitCode> {
    set_jobs(args.jobs)?;
    let reference_dir = label_dir(args.reference, root, "--ref")?;
    let refs = collect_labels(&reference_dir)?;
    let preds = collect_labels(&args.pred)?;
    let mut unmatched = Vec::new();
    for name in refs.keys().filter(|n| !preds.contains_key(*n)) {
        unmatched.push(format!("{name} has no prediction"));
    }
    for name in preds.keys().filter(|n| !refs.contains_key(*n)) {
        unmatched.push(format!("{name} has no reference"));
    }
    if args.strict && !unmatched.is_empty() {
        bail!("unmatched files: {}", unmatched.join("; "));
    }
    for message in &unmatched {
        log::warn!("skipping {message}");
    }
    let names: Vec<&String> = refs.keys().filter(|n| preds.contains_key(*n)).collect();
    if names.is_empty() {
        bail!(
            "no file names shared by {} and {}",
            reference_dir.display(),
            args.pred.display()
        );
    }
    let pairs: Vec<ClipPair> = names
        .par_iter()
        .map(|&name| {
            Ok(ClipPair {
                name: name.clone(),
                reference: read_clip(&refs[name], args.classes)?,
                prediction: read_clip(&preds[name], args.classes)?,
            })
        })
        .collect::<Result<_>>()?;
    let cfg = MetricConfig {
        spatial_threshold_deg: args.threshold,
        segment_frames: args.segment_frames,
        class_count: args.classes,
    };
    let scores = evaluate_corpus(&pairs, &cfg)?;
    let names_list = class_names(args.classes);
    print!("{}", format_report(&scores, Some(&names_list)));
    if let Some(out) = args.out {
        let per_class: Vec<_> = scores
            .per_class
            .iter()
            .map(|c| {
                let mut v = serde_json::to_value(c).expect("plain data");
                v["name"] = json!(names_list[c.class]);
                v
            })
            .collect();
        let doc = json!({
            "schema": REPORT_SCHEMA,
            "config": {
                "spatial_threshold_deg": cfg.spatial_threshold_deg,
                "segment_frames": cfg.segment_frames,
                "class_count": cfg.class_count,
            },
            "clips": pairs.iter().map(|p| p.name.as_str()).collect::<Vec<_>>(),
            "skipped": unmatched,
            "scores": {
                "er20": scores.er20,
                "f20": scores.f20,
                "le_cd": scores.le_cd,
                "lr_cd": scores.lr_cd,
                "e_seld": scores.e_seld,
            },
            "per_class": per_class,
        });
        write_text(&out, &(serde_json::to_string_pretty(&doc)? + "\n"))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn read_clip_lengths(path: &Path) -> Result<BTreeMap<String, u32>> {
    let mut lengths = BTreeMap::new();
    for (i, line) in read_text(path)?.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (name, frames) = line
            .split_once(',')
            .ok_or_else(|| anyhow!("{} row {}: expected `name,frames`", path.display(), i + 1))?;
        let frames = frames
            .trim()
            .parse()
            .with_context(|| format!("{} row {}", path.display(), i + 1))?;
        lengths.insert(name.trim().to_string(), frames);
    }
    Ok(lengths)
}

fn stats(
    labels: &Path,
    out: &Path,
    clip_lengths: Option<&Path>,
    classes: usize,
) -> Result<ExitCode> {
    let files = collect_labels(labels)?;
    let lengths = clip_lengths
        .map(read_clip_lengths)
        .transpose()?
        .unwrap_or_default();
    let clips: Vec<ClipAnnotation> = files
        .par_iter()
        .map(|(name, path)| {
            let clip = read_clip(path, classes)?;
            match lengths.get(name) {
                Some(&n) => clip
                    .with_frame_count(n)
                    .with_context(|| path.display().to_string()),
                None => Ok(clip),
            }
        })
        .collect::<Result<_>>()?;
    let stats = compute_stats(&clips, classes)?;
    let names = class_names(classes);
    for path in
        emit_reports(&stats, out, Some(&names)).with_context(|| out.display().to_string())?
    {
        println!("{}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

/// FNV-1a; mixes the file name into the seed so clips get distinct streams
/// that do not depend on which other files are present.
fn name_hash(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

fn perturb_dir(reference: &Path, out: &Path, cfg: &PerturbationConfig) -> Result<ExitCode> {
    let files = collect_labels(reference)?;
    fs::create_dir_all(out).with_context(|| out.display().to_string())?;
    files
        .par_iter()
        .try_for_each(|(name, path)| -> Result<()> {
            let clip = read_clip(path, STARSS23_CLASSES.len())?;
            let clip_cfg = PerturbationConfig {
                seed: cfg.seed ^ name_hash(name),
                ..*cfg
            };
            let predicted =
                perturb(&clip, &clip_cfg).with_context(|| path.display().to_string())?;
            write_text(&out.join(name), &write_labels(&predicted.rounded())?)
        })?;
    Ok(ExitCode::SUCCESS)
}
