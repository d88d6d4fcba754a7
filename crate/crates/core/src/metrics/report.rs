//! Human-readable score report.
//!
//! Layout: one `KEY value` line per overall metric, a blank line, then one
//! row per class. Percentages and angles carry one decimal, `ER20` and
//! `E_SELD` three. Classes left out of the macro averages show `-`.

use std::fmt::Write as _;

use super::SeldScores;

pub fn format_report(scores: &SeldScores, class_names: Option<&[&str]>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "ER20    {:.3}", scores.er20);
    let _ = writeln!(out, "F20     {:.1}%", scores.f20 * 100.0);
    let _ = writeln!(out, "LE_CD   {:.1}°", scores.le_cd);
    let _ = writeln!(out, "LR_CD   {:.1}%", scores.lr_cd * 100.0);
    let _ = writeln!(out, "E_SELD  {:.3}", scores.e_seld);
    out.push('\n');
    let _ = writeln!(
        out,
        "{:<5} {:<20} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7}",
        "class", "name", "F20", "LE_CD", "LR_CD", "refs", "TP", "FP", "FN"
    );
    for c in &scores.per_class {
        let name = class_names
            .and_then(|names| names.get(c.class).copied())
            .unwrap_or("");
        let (f, le, lr) = if c.included {
            (
                format!("{:.1}%", c.f20 * 100.0),
                format!("{:.1}°", c.le_cd),
                format!("{:.1}%", c.lr_cd * 100.0),
            )
        } else {
            ("-".into(), "-".into(), "-".into())
        };
        let _ = writeln!(
            out,
            "{:<5} {:<20} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7}",
            c.class,
            name,
            f,
            le,
            lr,
            c.references,
            c.true_positives,
            c.false_positives,
            c.false_negatives
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::ClipAnnotation;
    use crate::labels::parse_labels;
    use crate::metrics::{evaluate_clip, MetricConfig};

    #[test]
    fn perfect_report_lines() {
        let reference = parse_labels("0,0,0,10,0,100\n1,0,0,12,0,100\n", 13).unwrap();
        let scores = evaluate_clip(&reference, &reference, &MetricConfig::new(13)).unwrap();
        let text = format_report(&scores, Some(&crate::STARSS23_CLASSES));
        assert!(text.starts_with(
            "ER20    0.000\nF20     100.0%\nLE_CD   0.0°\nLR_CD   100.0%\nE_SELD  0.000\n"
        ));
        assert!(text.contains("female_speech"));
        assert_eq!(text.lines().count(), 5 + 1 + 1 + 13);
        let empty = evaluate_clip(
            &reference,
            &ClipAnnotation::empty(13),
            &MetricConfig::new(13),
        )
        .unwrap();
        assert!(format_report(&empty, None).contains("LE_CD   180.0°"));
    }
}
