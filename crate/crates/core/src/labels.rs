//! Reader, writer and validator for comma-separated label files.
//!
//! One row per active event and frame:
//! `frame, class, source, azimuth, elevation[, distance]`, all integers.
//! Reading tolerates spaces around fields; writing emits the canonical form
//! with no spaces and a newline after every row.

use std::collections::HashMap;
use std::fmt::{self, Write as _};

use serde::Serialize;

use crate::annotation::{ClassId, ClipAnnotation, EventRecord, FrameIndex};
use crate::error::{Error, Result};
use crate::SphericalDoa;

/// One syntactically and range-checked row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabelFileRow {
    pub frame: u32,
    pub class: usize,
    pub source: u32,
    pub azimuth: i32,
    pub elevation: i32,
    pub distance: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowError {
    /// 1-based line number.
    pub row: usize,
    pub message: String,
}

/// Non-blank lines with their 1-based line numbers.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, line)| (i + 1, line.trim()))
        .filter(|(_, line)| !line.is_empty())
}

fn parse_row(line: &str, class_count: usize) -> std::result::Result<LabelFileRow, String> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != 5 && fields.len() != 6 {
        return Err(format!("expected 5 or 6 fields, found {}", fields.len()));
    }
    const NAMES: [&str; 6] = [
        "frame",
        "class",
        "source",
        "azimuth",
        "elevation",
        "distance",
    ];
    let mut values = [0i64; 6];
    for (i, field) in fields.iter().enumerate() {
        values[i] = field
            .parse::<i64>()
            .map_err(|_| format!("{} is not an integer: {field:?}", NAMES[i]))?;
    }
    let [frame, class, source, azimuth, elevation, distance] = values;
    if !(0..=i64::from(u32::MAX)).contains(&frame) {
        return Err(format!("frame out of range: {frame}"));
    }
    if class < 0 || class as u64 >= class_count as u64 {
        return Err(format!("class out of range [0, {class_count}): {class}"));
    }
    if !(0..=i64::from(u32::MAX)).contains(&source) {
        return Err(format!("source out of range: {source}"));
    }
    if !(-180..=180).contains(&azimuth) {
        return Err(format!("azimuth out of range [-180, 180]: {azimuth}"));
    }
    if !(-90..=90).contains(&elevation) {
        return Err(format!("elevation out of range [-90, 90]: {elevation}"));
    }
    let distance = if fields.len() == 6 {
        if !(1..=i64::from(u32::MAX)).contains(&distance) {
            return Err(format!("distance must be positive: {distance}"));
        }
        Some(distance as u32)
    } else {
        None
    };
    Ok(LabelFileRow {
        frame: frame as u32,
        class: class as usize,
        source: source as u32,
        azimuth: azimuth as i32,
        elevation: elevation as i32,
        distance,
    })
}

fn to_event(row: &LabelFileRow, class_count: usize) -> EventRecord {
    EventRecord {
        frame: FrameIndex(row.frame),
        class: ClassId::new(row.class, class_count).expect("row was range-checked"),
        source: row.source,
        doa: SphericalDoa::new(f64::from(row.azimuth), f64::from(row.elevation))
            .expect("row was range-checked"),
        distance_cm: row.distance,
    }
}

/// Parses a label file, failing on the first bad row.
pub fn parse_labels(text: &str, class_count: usize) -> Result<ClipAnnotation> {
    let mut seen: HashMap<(u32, usize, u32), usize> = HashMap::new();
    let mut events = Vec::new();
    for (row, line) in data_lines(text) {
        let parsed =
            parse_row(line, class_count).map_err(|message| Error::Parse { row, message })?;
        if let Some(first) = seen.insert((parsed.frame, parsed.class, parsed.source), row) {
            return Err(Error::Parse {
                row,
                message: format!(
                    "duplicate (frame, class, source) triple, first seen on row {first}"
                ),
            });
        }
        events.push(to_event(&parsed, class_count));
    }
    ClipAnnotation::new(events, class_count)
}

/// Parses every row it can and returns the rest as errors. Each non-blank
/// line ends up either as an event or as exactly one error.
pub fn parse_labels_lenient(text: &str, class_count: usize) -> (ClipAnnotation, Vec<RowError>) {
    let mut seen: HashMap<(u32, usize, u32), usize> = HashMap::new();
    let mut events = Vec::new();
    let mut errors = Vec::new();
    for (row, line) in data_lines(text) {
        match parse_row(line, class_count) {
            Ok(parsed) => {
                if let Some(&first) = seen.get(&(parsed.frame, parsed.class, parsed.source)) {
                    errors.push(RowError {
                        row,
                        message: format!(
                            "duplicate (frame, class, source) triple, first seen on row {first}"
                        ),
                    });
                } else {
                    seen.insert((parsed.frame, parsed.class, parsed.source), row);
                    events.push(to_event(&parsed, class_count));
                }
            }
            Err(message) => errors.push(RowError { row, message }),
        }
    }
    let annotation =
        ClipAnnotation::new(events, class_count).expect("duplicates and ranges already filtered");
    (annotation, errors)
}

/// Canonical serialization. DOAs must already be whole degrees.
pub fn write_labels(annotation: &ClipAnnotation) -> Result<String> {
    let mut out = String::with_capacity(annotation.len() * 20);
    for event in annotation.events() {
        if !event.doa.is_integral() {
            return Err(Error::NonIntegralDoa {
                frame: event.frame.0,
                class: event.class.index(),
                source_id: event.source,
            });
        }
        write!(
            out,
            "{},{},{},{},{}",
            event.frame.0,
            event.class.index(),
            event.source,
            event.doa.azimuth_deg() as i64,
            event.doa.elevation_deg() as i64
        )
        .expect("writing to a String");
        if let Some(distance) = event.distance_cm {
            write!(out, ",{distance}").expect("writing to a String");
        }
        out.push('\n');
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Finding {
    pub row: usize,
    pub severity: Severity,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    /// Number of non-blank rows examined.
    pub rows: usize,
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_conformant(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn error_count(&self) -> usize {
        self.findings
            .iter()
            .filter(|f| f.severity == Severity::Error)
            .count()
    }

    pub fn warning_count(&self) -> usize {
        self.findings.len() - self.error_count()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for finding in &self.findings {
            let severity = match finding.severity {
                Severity::Error => "error",
                Severity::Warning => "warning",
            };
            writeln!(f, "row {}: {severity}: {}", finding.row, finding.message)?;
        }
        writeln!(
            f,
            "{} rows, {} errors, {} warnings",
            self.rows,
            self.error_count(),
            self.warning_count()
        )
    }
}

/// Checks every row and reports all violations instead of stopping at the first.
pub fn validate_file(text: &str, class_count: usize) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut seen: HashMap<(u32, usize, u32), usize> = HashMap::new();
    let mut last_frame: Option<u32> = None;
    for (row, line) in data_lines(text) {
        report.rows += 1;
        let parsed = match parse_row(line, class_count) {
            Ok(parsed) => parsed,
            Err(message) => {
                report.findings.push(Finding {
                    row,
                    severity: Severity::Error,
                    message,
                });
                continue;
            }
        };
        if let Some(previous) = last_frame {
            if parsed.frame < previous {
                report.findings.push(Finding {
                    row,
                    severity: Severity::Warning,
                    message: format!("frame {} follows frame {previous}", parsed.frame),
                });
            }
        }
        last_frame = Some(last_frame.map_or(parsed.frame, |p| p.max(parsed.frame)));
        if let Some(&first) = seen.get(&(parsed.frame, parsed.class, parsed.source)) {
            report.findings.push(Finding {
                row,
                severity: Severity::Error,
                message: format!(
                    "duplicate (frame, class, source) triple ({}, {}, {}), first seen on row {first}",
                    parsed.frame, parsed.class, parsed.source
                ),
            });
        } else {
            seen.insert((parsed.frame, parsed.class, parsed.source), row);
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_example_row() {
        let clip = parse_labels("10, 1, 1, -50, 30, 181", 13).unwrap();
        assert_eq!(clip.len(), 1);
        let e = clip.events()[0];
        assert_eq!(e.frame, FrameIndex(10));
        assert_eq!(e.class.index(), 1);
        assert_eq!(e.source, 1);
        assert_eq!(e.doa.azimuth_deg(), -50.0);
        assert_eq!(e.doa.elevation_deg(), 30.0);
        assert_eq!(e.distance_cm, Some(181));
    }

    #[test]
    fn empty_input() {
        assert!(parse_labels("", 13).unwrap().is_empty());
        assert!(parse_labels("\n  \n", 13).unwrap().is_empty());
    }

    #[test]
    fn class_out_of_range() {
        let err = parse_labels("0, 13, 0, 0, 0, 100", 13).unwrap_err();
        assert!(matches!(err, Error::Parse { row: 1, .. }), "{err}");
        assert!(parse_labels("0, 4, 0, 0, 0, 100", 5).is_ok());
    }

    #[test]
    fn parse_errors_carry_row_numbers() {
        let text = "0,0,0,0,0,100\n1,0,0,0,x,100\n";
        assert!(matches!(
            parse_labels(text, 13),
            Err(Error::Parse { row: 2, .. })
        ));
        assert!(matches!(
            parse_labels("0,0,0,0\n", 13),
            Err(Error::Parse { row: 1, .. })
        ));
        assert!(matches!(
            parse_labels("0,0,0,0,0,0,0\n", 13),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            parse_labels("0,0,0,0,0,0\n", 13),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            parse_labels("-1,0,0,0,0,10\n", 13),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            parse_labels("0,0,0,0,91,10\n", 13),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            parse_labels("0,0,0,0,1.5,10\n", 13),
            Err(Error::Parse { .. })
        ));
        let dup = "3,1,1,0,0,100\n3,1,1,5,0,100\n";
        assert!(matches!(
            parse_labels(dup, 13),
            Err(Error::Parse { row: 2, .. })
        ));
    }

    #[test]
    fn five_field_rows_have_no_distance() {
        let clip = parse_labels("4,2,0,10,-5\n", 13).unwrap();
        assert_eq!(clip.events()[0].distance_cm, None);
        assert_eq!(write_labels(&clip).unwrap(), "4,2,0,10,-5\n");
    }

    #[test]
    fn canonical_minimal_record() {
        let clip = parse_labels("0, 0, 0, 0, 0, 100", 13).unwrap();
        assert_eq!(write_labels(&clip).unwrap(), "0,0,0,0,0,100\n");
    }

    #[test]
    fn writer_sorts_and_wraps_azimuth() {
        let clip = parse_labels("5,0,0,180,0,100\n1,3,2,-10,4,90\r\n", 13).unwrap();
        assert_eq!(
            write_labels(&clip).unwrap(),
            "1,3,2,-10,4,90\n5,0,0,-180,0,100\n"
        );
    }

    #[test]
    fn writer_rejects_fractional_doa() {
        let clip = parse_labels("0,0,0,10,0,100\n", 13).unwrap();
        let mut events = clip.into_events();
        events[0].doa = SphericalDoa::new(10.4, 0.0).unwrap();
        let clip = ClipAnnotation::new(events, 13).unwrap();
        assert!(matches!(
            write_labels(&clip),
            Err(Error::NonIntegralDoa { .. })
        ));
        assert_eq!(write_labels(&clip.rounded()).unwrap(), "0,0,0,10,0,100\n");
    }

    #[test]
    fn lenient_parse_accounts_for_every_row() {
        let text = "0,0,0,0,0,100\n0,0,0,1,0,100\nbad\n\n2,1,1,200,0,5\n3,1,1,20,0,5\n";
        let (clip, errors) = parse_labels_lenient(text, 13);
        assert_eq!(clip.len() + errors.len(), 5);
        let rows: Vec<_> = errors.iter().map(|e| e.row).collect();
        assert_eq!(rows, vec![2, 3, 5]);
    }

    #[test]
    fn validation_findings() {
        assert!(validate_file("10, 1, 1, -50, 30, 181\n", 13).is_conformant());

        let report = validate_file("0,0,0,181,0,100\n", 13);
        assert_eq!(report.error_count(), 1);
        assert_eq!(report.findings[0].row, 1);
        assert!(report.findings[0].message.contains("azimuth"));

        let report = validate_file("7,2,1,0,0,100\n7,2,1,10,0,100\n", 13);
        assert_eq!(report.findings.len(), 1);
        assert_eq!(report.findings[0].row, 2);
        assert!(report.findings[0].message.contains("duplicate"));

        let report = validate_file("5,0,0,0,0,100\n4,0,0,0,0,100\n", 13);
        assert_eq!(report.error_count(), 0);
        assert_eq!(report.warning_count(), 1);
    }
}
