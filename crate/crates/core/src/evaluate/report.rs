//! Plain-text tables for metrics and width statistics.

use super::metrics::{ClassMetrics, ConfusionMatrix, Score};
use super::width::{WidthStats, WidthSummary};
use std::fmt::Write;

fn score_row(out: &mut String, label: &str, s: &Score) {
    let c = s.counts;
    writeln!(
        out,
        "{label:<14} {:>6} {:>6} {:>6} {:>9.4} {:>9.4} {:>9.4}",
        c.tp, c.fp, c.fn_, s.precision, s.recall, s.f1
    )
    .unwrap();
}

pub fn metrics_table(m: &ClassMetrics) -> String {
    let mut out = String::new();
    writeln!(out, "{:<14} {:>6} {:>6} {:>6} {:>9} {:>9} {:>9}", "class", "TP", "FP", "FN", "precision", "recall", "F1")
        .unwrap();
    for (cls, s) in &m.per_class {
        score_row(&mut out, cls.name(), s);
    }
    score_row(&mut out, "micro", &m.micro);
    out
}

pub fn confusion_table(cm: &ConfusionMatrix) -> String {
    let mut out = String::new();
    write!(out, "{:<14}", "truth\\pred").unwrap();
    for l in &cm.labels {
        write!(out, " {:>12}", l).unwrap();
    }
    out.push('\n');
    for (label, row) in cm.labels.iter().zip(&cm.cells) {
        write!(out, "{label:<14}").unwrap();
        for v in row {
            write!(out, " {v:>12}").unwrap();
        }
        out.push('\n');
    }
    out
}

fn width_row(out: &mut String, label: &str, s: &WidthStats) {
    writeln!(
        out,
        "{label:<14} {:>6} {:>12.3} {:>10.3} {:>12.3} {:>10.3}",
        s.count, s.mean_diff_px, s.sd_px, s.mean_diff_pct, s.sd_pct
    )
    .unwrap();
}

pub fn width_table(w: &WidthSummary) -> String {
    let mut out = String::new();
    writeln!(out, "{:<14} {:>6} {:>12} {:>10} {:>12} {:>10}", "class", "n", "mean diff px", "SD px", "mean diff %", "SD %")
        .unwrap();
    for (cls, s) in &w.per_class {
        width_row(&mut out, cls.name(), s);
    }
    width_row(&mut out, "total", &w.total);
    out
}
