//! Minimal SVG line charts over the CSV outputs.

use std::collections::BTreeMap;
use std::fmt::Write;
use std::path::Path;

use anyhow::{anyhow, bail, Result};
use wdmopt::io::{parse_table, Table};

const W: f64 = 720.0;
const H: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;
const COLORS: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

struct Chart {
    title: String,
    x_label: String,
    y_label: String,
    series: Vec<(String, Vec<(f64, f64)>)>,
    markers_only: bool,
}

fn kind_of(text: &str) -> Result<String> {
    let first = text.lines().next().unwrap_or_default();
    first
        .strip_prefix('#')
        .and_then(|t| t.split_whitespace().next())
        .map(str::to_string)
        .ok_or_else(|| anyhow!("not a versioned table (missing '# <kind> v1' line)"))
}

fn num(t: &Table, row: &[String], col: &str, path: &Path) -> Result<f64> {
    let c = t.column(col, path)?;
    row[c]
        .parse::<f64>()
        .map_err(|_| anyhow!("column {col}: '{}' is not a number", row[c]))
}

fn grouped(
    t: &Table,
    path: &Path,
    key: impl Fn(&[String]) -> String,
    x: &str,
    y: &str,
) -> Result<Vec<(String, Vec<(f64, f64)>)>> {
    let mut map: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for row in &t.rows {
        let (Ok(xv), Ok(yv)) = (num(t, row, x, path), num(t, row, y, path)) else {
            continue;
        };
        map.entry(key(row)).or_default().push((xv, yv));
    }
    Ok(map
        .into_iter()
        .map(|(k, mut v)| {
            v.sort_by(|a, b| a.0.total_cmp(&b.0));
            (k, v)
        })
        .collect())
}

fn chart_for(text: &str, path: &Path) -> Result<Chart> {
    let kind = kind_of(text)?;
    let t = parse_table(text, &kind, path)?;
    let col = |name: &str| t.column(name, path);
    Ok(match kind.as_str() {
        "snr-report" => Chart {
            title: "Received SNR per channel".into(),
            x_label: "frequency (THz)".into(),
            y_label: "SNR (dB)".into(),
            series: grouped(&t, path, |_| "SNR".into(), "frequency_thz", "snr_db")?,
            markers_only: false,
        },
        "spectrum" => Chart {
            title: "Input spectrum".into(),
            x_label: "frequency (THz)".into(),
            y_label: "power (dBm)".into(),
            series: grouped(&t, path, |_| "PSD".into(), "frequency_thz", "power_dbm")?,
            markers_only: false,
        },
        "trace" => Chart {
            title: "Optimization trace".into(),
            x_label: "iteration".into(),
            y_label: "min SNR (dB)".into(),
            series: grouped(&t, path, |_| "min SNR".into(), "iteration", "min_snr_db")?,
            markers_only: false,
        },
        "sweep" => {
            let s = col("strategy")?;
            Chart {
                title: "Min SNR vs launch power".into(),
                x_label: "launch power (dBm)".into(),
                y_label: "min SNR (dB)".into(),
                series: grouped(&t, path, |r| r[s].clone(), "power_dbm", "min_snr_db")?,
                markers_only: false,
            }
        }
        "network" => {
            let (s, g) = (col("strategy")?, col("gff")?);
            Chart {
                title: "Min SNR vs link distance".into(),
                x_label: "distance (km)".into(),
                y_label: "min SNR (dB)".into(),
                series: grouped(
                    &t,
                    path,
                    |r| format!("{} / gff {}", r[s], r[g]),
                    "distance_km",
                    "min_snr_db",
                )?,
                markers_only: true,
            }
        }
        "eval-gav" => Chart {
            title: "Surrogate MSE vs average gain".into(),
            x_label: "G_av (dB)".into(),
            y_label: "MSE (dB^2)".into(),
            series: grouped(&t, path, |_| "MSE".into(), "gav_center_db", "mse_db2")?,
            markers_only: false,
        },
        "eval-mae-pdf" => Chart {
            title: "MAE density".into(),
            x_label: "MAE (dB)".into(),
            y_label: "density".into(),
            series: grouped(&t, path, |_| "pdf".into(), "mae_low_db", "density")?,
            markers_only: false,
        },
        other => bail!("no chart for '{other}' tables"),
    })
}

fn nice_range(lo: f64, hi: f64) -> (f64, f64) {
    if !(hi > lo) {
        return (lo - 1.0, hi + 1.0);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// SVG chart for a CSV produced by this tool.
pub fn render(text: &str, path: &Path) -> Result<String> {
    let chart = chart_for(text, path)?;
    let pts: Vec<(f64, f64)> = chart.series.iter().flat_map(|s| s.1.iter().copied()).collect();
    if pts.is_empty() {
        bail!("{}: no numeric rows to plot", path.display());
    }
    let (x0, x1) = nice_range(
        pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min),
        pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max),
    );
    let (y0, y1) = nice_range(
        pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min),
        pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max),
    );
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#
    )?;
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#)?;
    writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        LEFT + pw / 2.0,
        esc(&chart.title)
    )?;
    writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    )?;
    for i in 0..=5 {
        let f = i as f64 / 5.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let (px, py) = (sx(xv), sy(yv));
        writeln!(
            s,
            r##"<line x1="{px:.1}" y1="{TOP}" x2="{px:.1}" y2="{:.1}" stroke="#ddd"/><text x="{px:.1}" y="{:.1}" text-anchor="middle">{xv:.3}</text>"##,
            TOP + ph,
            TOP + ph + 16.0
        )?;
        writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{py:.1}" x2="{:.1}" y2="{py:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{yv:.3}</text>"##,
            LEFT + pw,
            LEFT - 6.0,
            py + 4.0
        )?;
    }
    writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        H - 12.0,
        esc(&chart.x_label)
    )?;
    writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        esc(&chart.y_label)
    )?;
    for (k, (name, points)) in chart.series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        if !chart.markers_only && points.len() > 1 {
            let d: Vec<String> = points
                .iter()
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                d.join(" ")
            )?;
        }
        for &(x, y) in points {
            writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#,
                sx(x),
                sy(y)
            )?;
        }
        let ly = TOP + 10.0 + 16.0 * k as f64;
        writeln!(
            s,
            r#"<rect x="{:.1}" y="{:.1}" width="10" height="10" fill="{color}"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            W - RIGHT + 12.0,
            ly - 9.0,
            W - RIGHT + 27.0,
            ly,
            esc(name)
        )?;
    }
    s.push_str("</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_chart_has_one_series_per_strategy() {
        let text = "# sweep v1\npower_dbm,strategy,min_snr_db,excursion_db\n15,a,10,1\n16,a,11,1\n15,b,9,2\n16,b,9.5,2\n";
        let svg = render(text, Path::new("s.csv")).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.starts_with("<svg"));
    }

    #[test]
    fn unknown_kinds_are_rejected() {
        assert!(render("# dataset v1\na\n1\n", Path::new("d.csv")).is_err());
        assert!(render("a,b\n1,2\n", Path::new("x.csv")).is_err());
    }
}
