//! CSV outputs of simulations, optimizations, evaluations and network runs.

use std::path::Path;

use super::{grid_meta, render_table, write_text};
use crate::cascade::SnrReport;
use crate::error::Result;
use crate::network::{NetworkReport, SweepRow};
use crate::optimizer::{Status, TraceRow};
use crate::surrogate::{BucketStat, EvalReport};

fn num(v: f64) -> String {
    v.to_string()
}

pub fn render_snr_report(report: &SnrReport) -> String {
    let grid = report.received_psd.grid();
    let rows: Vec<Vec<String>> = (0..grid.len())
        .map(|i| {
            vec![
                i.to_string(),
                format!("{:.4}", grid.frequencies_thz()[i]),
                num(report.received_psd.dbm()[i]),
                num(report.noise.ase_w[i]),
                num(report.noise.nli_w[i]),
                num(report.snr_db[i]),
            ]
        })
        .collect();
    let mut meta = vec![
        grid_meta(grid),
        format!(
            "summary min_snr_db={} excursion_db={}",
            report.min_snr_db(),
            report.excursion_db()
        ),
    ];
    meta.extend(report.warnings.iter().map(|w| format!("warning {w}")));
    render_table(
        "snr-report",
        &meta,
        &["channel", "frequency_thz", "received_dbm", "ase_w", "nli_w", "snr_db"],
        &rows,
    )
}

pub fn write_snr_report(path: &Path, report: &SnrReport) -> Result<()> {
    write_text(path, &render_snr_report(report))
}

pub fn render_trace(trace: &[TraceRow]) -> String {
    let rows: Vec<Vec<String>> = trace
        .iter()
        .map(|r| {
            vec![
                r.iteration.to_string(),
                num(r.cost),
                num(r.min_snr_db),
                num(r.excursion_db),
            ]
        })
        .collect();
    render_table(
        "trace",
        &[],
        &["iteration", "cost", "min_snr_db", "excursion_db"],
        &rows,
    )
}

pub fn write_trace(path: &Path, trace: &[TraceRow]) -> Result<()> {
    write_text(path, &render_trace(trace))
}

pub fn status_name(status: Status) -> String {
    match status {
        Status::Converged => "converged".into(),
        Status::BudgetExhausted => "budget-exhausted".into(),
        Status::Aborted { iteration } => format!("aborted@{iteration}"),
    }
}

fn buckets(kind: &str, key: &str, report: &EvalReport, stats: &[BucketStat]) -> String {
    let rows: Vec<Vec<String>> = stats
        .iter()
        .map(|b| vec![num(b.center), num(b.mse), b.count.to_string()])
        .collect();
    render_table(
        kind,
        &[format!("model kind={} mode={}", report.kind.name(), report.mode)],
        &[key, "mse_db2", "count"],
        &rows,
    )
}

/// Writes `<stem>_gav.csv`, `<stem>_pout.csv`, `<stem>_channel.csv` and
/// `<stem>_mae_pdf.csv` into `dir`.
pub fn write_eval_report(dir: &Path, stem: &str, report: &EvalReport) -> Result<()> {
    let meta = vec![format!(
        "model kind={} mode={} overall_mse_db2={}",
        report.kind.name(),
        report.mode,
        report.overall_mse()
    )];
    write_text(
        &dir.join(format!("{stem}_gav.csv")),
        &buckets("eval-gav", "gav_center_db", report, &report.mse_per_gav),
    )?;
    write_text(
        &dir.join(format!("{stem}_pout.csv")),
        &buckets("eval-pout", "total_output_dbm", report, &report.mse_per_pout),
    )?;
    let rows: Vec<Vec<String>> = report
        .mse_per_channel
        .iter()
        .enumerate()
        .map(|(i, m)| vec![i.to_string(), num(*m)])
        .collect();
    write_text(
        &dir.join(format!("{stem}_channel.csv")),
        &render_table("eval-channel", &meta, &["channel", "mse_db2"], &rows),
    )?;
    let h = &report.mae_pdf;
    let rows: Vec<Vec<String>> = h
        .density
        .iter()
        .zip(h.edges.windows(2))
        .map(|(d, e)| vec![num(e[0]), num(e[1]), num(*d)])
        .collect();
    write_text(
        &dir.join(format!("{stem}_mae_pdf.csv")),
        &render_table("eval-mae-pdf", &meta, &["mae_low_db", "mae_high_db", "density"], &rows),
    )
}

pub fn render_network_report(report: &NetworkReport) -> String {
    let mut rows = Vec::new();
    for l in &report.links {
        match &l.runs {
            Ok(runs) => {
                for r in runs {
                    rows.push(vec![
                        l.link_id.to_string(),
                        num(l.distance_km),
                        l.n_spans.to_string(),
                        r.gff.name().to_string(),
                        r.strategy.name().to_string(),
                        num(r.min_snr_db),
                        num(r.excursion_db),
                        status_name(r.status),
                        String::new(),
                    ]);
                }
            }
            Err(e) => rows.push(vec![
                l.link_id.to_string(),
                num(l.distance_km),
                l.n_spans.to_string(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                "failed".into(),
                e.clone(),
            ]),
        }
    }
    render_table(
        "network",
        &[format!("launch_power_dbm={}", report.launch_power_dbm)],
        &[
            "link",
            "distance_km",
            "spans",
            "gff",
            "strategy",
            "min_snr_db",
            "excursion_db",
            "status",
            "error",
        ],
        &rows,
    )
}

/// Optimized input of every run, one row per (link, gff, strategy).
pub fn render_network_profiles(report: &NetworkReport) -> String {
    let mut rows = Vec::new();
    let mut n = 0;
    for l in &report.links {
        for r in l.runs.iter().flatten() {
            n = r.profile_dbm.len();
            let mut row = vec![
                l.link_id.to_string(),
                r.gff.name().to_string(),
                r.strategy.name().to_string(),
            ];
            row.extend(r.profile_dbm.iter().map(|v| num(*v)));
            rows.push(row);
        }
    }
    let names: Vec<String> = (0..n).map(|i| format!("input_dbm_{i:02}")).collect();
    let mut header = vec!["link", "gff", "strategy"];
    header.extend(names.iter().map(String::as_str));
    render_table("network-profiles", &[], &header, &rows)
}

pub fn render_sweep(rows: &[SweepRow]) -> String {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                num(r.power_dbm),
                r.strategy.name().to_string(),
                num(r.min_snr_db),
                num(r.excursion_db),
            ]
        })
        .collect();
    render_table(
        "sweep",
        &[],
        &["power_dbm", "strategy", "min_snr_db", "excursion_db"],
        &body,
    )
}
