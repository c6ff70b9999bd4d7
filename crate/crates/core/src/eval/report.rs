use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{MeanStd, MetricsReport, Result, SweepOutcome, Task};
use crate::fsutil::write_atomic;
use crate::mpnn::Variant;

fn row_label(r: &MetricsReport) -> String {
    match (r.cell.metric, r.cell.threshold_rule) {
        (Some(m), Some(t)) => format!("{} ({m}, τ={t})", r.cell.input_mode),
        _ => r.cell.input_mode.to_string(),
    }
}

fn table(out: &mut String, title: &str, reports: &[MetricsReport], value: impl Fn(&MetricsReport) -> Option<String>) {
    let variants: Vec<Variant> = {
        let mut v: Vec<Variant> = reports.iter().map(|r| r.cell.variant).collect();
        v.sort();
        v.dedup();
        v
    };
    let mut rows: BTreeMap<(String, String), BTreeMap<Variant, String>> = BTreeMap::new();
    for r in reports {
        let key = (r.cell.input_mode.as_str().to_string(), row_label(r));
        if let Some(v) = value(r) {
            rows.entry(key).or_default().insert(r.cell.variant, v);
        }
    }
    if rows.is_empty() {
        return;
    }
    let _ = writeln!(out, "### {title}\n");
    let _ = write!(out, "| input |");
    for v in &variants {
        let _ = write!(out, " {} |", v.as_str().to_uppercase());
    }
    let _ = write!(out, "\n|---|");
    for _ in &variants {
        let _ = write!(out, "---|");
    }
    out.push('\n');
    for ((_, label), cells) in rows {
        let _ = write!(out, "| {label} |");
        for v in &variants {
            let _ = write!(out, " {} |", cells.get(v).map_or("n/a", String::as_str));
        }
        out.push('\n');
    }
    out.push('\n');
}

/// Markdown tables with one row per input configuration and one column per
/// model variant.
pub fn summary_markdown(outcome: &SweepOutcome) -> String {
    let mut out = String::from("# Results\n\n");
    let fmt = |m: &MeanStd| m.to_string();
    for task in [Task::Binary, Task::Multiclass] {
        let reports: Vec<MetricsReport> = outcome.reports.iter().filter(|r| r.task == task).cloned().collect();
        if reports.is_empty() {
            continue;
        }
        let _ = writeln!(out, "## {task}\n");
        table(&mut out, "Accuracy", &reports, |r| Some(fmt(&r.accuracy)));
        match task {
            Task::Binary => {
                table(&mut out, "F1", &reports, |r| r.f1.as_ref().map(fmt));
                table(&mut out, "AUC (pooled over seeds)", &reports, |r| r.auc.map(|a| format!("{a:.3}")));
            }
            Task::Multiclass => table(&mut out, "Macro-F1", &reports, |r| r.macro_f1.as_ref().map(fmt)),
        }
        table(&mut out, "Selected hyperparameters (hidden, lr)", &reports, |r| {
            Some(format!("{}, {:e}", r.hidden_dim, r.learning_rate))
        });
    }
    if !outcome.failures.is_empty() {
        out.push_str("## Failed cells\n\n");
        for f in &outcome.failures {
            let _ = writeln!(out, "- {}: {}", f.cell, f.message);
        }
        out.push('\n');
    }
    out
}

fn confusion_csv(r: &MetricsReport) -> String {
    let mut s = String::from("label");
    for c in &r.class_names {
        let _ = write!(s, ",{c}");
    }
    s.push('\n');
    for (name, row) in r.class_names.iter().zip(&r.confusion) {
        s.push_str(name);
        for v in row {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    s
}

fn roc_csv(r: &MetricsReport) -> String {
    let mut s = String::from("fpr,tpr\n");
    for (x, y) in &r.roc_points {
        let _ = writeln!(s, "{x},{y}");
    }
    s
}

/// Write `report.json`, `summary.md`, `confusion_<cell>.csv` for every
/// report and `roc_<cell>.csv` for binary reports.
pub fn write_reports(outcome: &SweepOutcome, dir: &Path) -> Result<()> {
    let mut json = serde_json::to_vec_pretty(outcome)?;
    json.push(b'\n');
    write_atomic(&dir.join("report.json"), &json)?;
    write_atomic(&dir.join("summary.md"), summary_markdown(outcome).as_bytes())?;
    for r in &outcome.reports {
        let slug = r.cell.slug();
        write_atomic(&dir.join(format!("confusion_{slug}.csv")), confusion_csv(r).as_bytes())?;
        if r.task == Task::Binary && !r.roc_points.is_empty() {
            write_atomic(&dir.join(format!("roc_{slug}.csv")), roc_csv(r).as_bytes())?;
        }
    }
    Ok(())
}
