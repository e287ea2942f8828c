use std::fmt::Write as _;

use super::metrics::Metrics;
use super::MetricsReport;

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"))
}

type Row = (&'static str, fn(&Metrics) -> Option<f64>);

/// Metrics as rows (F1, Acc, AP, Recall) and models as columns.
pub fn format_table(columns: &[(String, Metrics)]) -> String {
    let rows: [Row; 4] = [
        ("F1", |m| Some(m.f1)),
        ("Acc", |m| Some(m.accuracy)),
        ("AP", |m| m.ap),
        ("Recall", |m| Some(m.recall)),
    ];
    let width = columns.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max(6);
    let mut out = format!("{:<8}", "Metric");
    for (name, _) in columns {
        write!(out, " | {name:>width$}").expect("string write");
    }
    out.push('\n');
    out.push_str(&"-".repeat(8));
    for _ in columns {
        write!(out, "-+-{}", "-".repeat(width)).expect("string write");
    }
    out.push('\n');
    for (label, get) in rows {
        write!(out, "{label:<8}").expect("string write");
        for (_, m) in columns {
            write!(out, " | {:>width$}", cell(get(m))).expect("string write");
        }
        out.push('\n');
    }
    out
}

/// Per-epoch CSV: one row per seed and epoch.
pub fn epochs_csv(report: &MetricsReport) -> String {
    let mut out = String::from(
        "seed,epoch,loss,valid_f1,valid_acc,valid_ap,valid_recall,test_f1,test_acc,test_ap,test_recall\n",
    );
    let opt = |v: Option<f64>| v.map_or_else(String::new, |v| format!("{v}"));
    for s in &report.seeds {
        for e in &s.epochs {
            write!(out, "{},{},{}", s.seed, e.epoch, e.loss).expect("string write");
            for m in [&e.valid, &e.test] {
                match m {
                    Some(m) => write!(out, ",{},{},{},{}", m.f1, m.accuracy, opt(m.ap), m.recall),
                    None => write!(out, ",,,,"),
                }
                .expect("string write");
            }
            out.push('\n');
        }
    }
    out
}
