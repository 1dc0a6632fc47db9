//! Report rendering: JSON Lines records and fixed-width tables.
//!
//! Row records carry, in order: `record`, `leg`, `test`, `eligible`,
//! `applicable`, `pass_count`, `threshold`, `verdict`, `mean_proportion`,
//! `uniformity_p`, `underflows`. Nothing time-dependent is written, so equal
//! inputs give byte-identical reports.

use std::fmt::Write as _;

use serde::Serialize;

use crate::signal::SweepPoint;
use crate::sts::{RowVerdict, SuiteReport, Verdict};

#[derive(Serialize)]
struct RowRecord<'a> {
    record: &'static str,
    leg: &'a str,
    test: &'static str,
    eligible: usize,
    applicable: usize,
    pass_count: usize,
    threshold: usize,
    verdict: &'static str,
    mean_proportion: f64,
    uniformity_p: Option<f64>,
    underflows: usize,
}

#[derive(Serialize)]
struct OverallRecord<'a> {
    record: &'static str,
    leg: &'a str,
    verdict: &'static str,
    stream_count: usize,
    stream_length_bits: usize,
    alpha: f64,
    underflows: usize,
}

#[derive(Serialize)]
struct SweepRecord {
    record: &'static str,
    amplitude_vpp_mv: f64,
    mean_rho: f64,
    rhos: Vec<f64>,
}

pub fn verdict_label(v: Verdict) -> &'static str {
    match v {
        Verdict::Success => "Success",
        Verdict::Failure => "Failure",
    }
}

/// Appends one row record per test plus an overall record.
pub fn push_suite_records(out: &mut String, leg: &str, report: &SuiteReport) {
    for s in &report.summaries {
        let rec = RowRecord {
            record: "row",
            leg,
            test: s.test.name(),
            eligible: s.eligible,
            applicable: s.applicable,
            pass_count: s.pass_count,
            threshold: s.threshold,
            verdict: s.verdict.label(),
            mean_proportion: s.mean_proportion,
            uniformity_p: s.uniformity_p,
            underflows: s.underflows,
        };
        push_json(out, &rec);
    }
    push_json(
        out,
        &OverallRecord {
            record: "overall",
            leg,
            verdict: verdict_label(report.overall),
            stream_count: report.stream_count,
            stream_length_bits: report.stream_length_bits,
            alpha: report.alpha,
            underflows: report.underflow_count(),
        },
    );
}

pub fn push_sweep_records(out: &mut String, points: &[SweepPoint]) {
    for p in points {
        push_json(
            out,
            &SweepRecord {
                record: "sweep",
                amplitude_vpp_mv: vpp_mv(p.amplitude),
                mean_rho: p.mean_rho,
                rhos: p.rhos.clone(),
            },
        );
    }
}

pub fn push_json<T: Serialize>(out: &mut String, value: &T) {
    out.push_str(&serde_json::to_string(value).expect("report records serialise"));
    out.push('\n');
}

fn vpp_mv(amplitude_v: f64) -> f64 {
    (amplitude_v * 2000.0 * 1e6).round() / 1e6
}

/// Side-by-side verdict table in the standard row order.
pub fn suite_table(title: &str, columns: &[(&str, &SuiteReport)]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{title}");
    let _ = write!(out, "{:<26}", "Test Category");
    for (name, _) in columns {
        let _ = write!(out, "{name:>18}");
    }
    out.push('\n');
    let rows = columns.first().map_or(0, |(_, r)| r.summaries.len());
    for i in 0..rows {
        let _ = write!(out, "{:<26}", columns[0].1.summaries[i].test.name());
        for (_, r) in columns {
            let s = &r.summaries[i];
            let cell = match s.verdict {
                RowVerdict::NotApplicable => "-".to_string(),
                v => format!("{} {:>3}/{:<3}", v.label(), s.pass_count, s.eligible),
            };
            let _ = write!(out, "{cell:>18}");
        }
        out.push('\n');
    }
    let _ = write!(out, "{:<26}", "Overall Result");
    for (_, r) in columns {
        let _ = write!(out, "{:>18}", verdict_label(r.overall));
    }
    out.push('\n');
    out
}

/// Tab-separated sweep data: amplitude (mVpp), mean rho, one column per repeat.
pub fn sweep_tsv(points: &[SweepPoint]) -> String {
    let mut out = String::from("amplitude_vpp_mv\tmean_rho");
    let repeats = points.first().map_or(0, |p| p.rhos.len());
    for r in 1..=repeats {
        let _ = write!(out, "\trho_{r}");
    }
    out.push('\n');
    for p in points {
        let _ = write!(out, "{:.0}\t{:.6}", vpp_mv(p.amplitude), p.mean_rho);
        for r in &p.rhos {
            let _ = write!(out, "\t{r:.6}");
        }
        out.push('\n');
    }
    out
}
