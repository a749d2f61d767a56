//! File formats.
//!
//! Tables are CSV preceded by a version line `# <kind> v<N>`; further `#`
//! lines carry metadata. Configuration is TOML with a top-level `version`,
//! trained models are JSON with `format` and `version` fields. Readers reject
//! unknown versions.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;

mod link;
mod reports;

pub use link::{parse_b2b, parse_link, parse_topology, read_b2b, read_link, read_topology, render_topology};
pub use reports::{
    render_network_profiles, render_network_report, render_snr_report, render_sweep, render_trace,
    status_name, write_eval_report, write_snr_report, write_trace,
};

use crate::error::{Error, Result};
use crate::oracle::{sum_of_gaussians, CharacterizationSample, Dataset, GaussianTerm, OracleParams};
use crate::spectral::{ChannelGrid, PowerSpectrum};
use crate::surrogate::{SurrogateModel, MODEL_FORMAT, MODEL_VERSION};

pub const TABLE_VERSION: u32 = 1;
pub const CONFIG_VERSION: i64 = 1;

pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

/// A parsed table: metadata lines (without `# `), header and string rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub meta: Vec<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn column(&self, name: &str, path: &Path) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::format(path, format!("missing column '{name}'")))
    }

    /// Value of a `key=value` metadata entry.
    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta.iter().find_map(|m| {
            m.split_whitespace()
                .find_map(|kv| kv.strip_prefix(key)?.strip_prefix('='))
        })
    }
}

pub(crate) fn parse_f64(s: &str, path: &Path, line: usize) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::format(path, format!("row {line}: '{s}' is not a number")))
}

/// Parses a versioned CSV table of the given kind.
pub fn parse_table(text: &str, kind: &str, path: &Path) -> Result<Table> {
    let mut lines = text.lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::format(path, "empty file"))?;
    let tag = first
        .strip_prefix('#')
        .map(str::trim)
        .ok_or_else(|| Error::format(path, format!("expected a '# {kind} v{TABLE_VERSION}' header line")))?;
    let (found_kind, version) = tag
        .split_once(char::is_whitespace)
        .ok_or_else(|| Error::format(path, format!("malformed header line '{first}'")))?;
    if found_kind != kind {
        return Err(Error::format(
            path,
            format!("expected a {kind} file, found {found_kind}"),
        ));
    }
    if version.trim() != format!("v{TABLE_VERSION}") {
        return Err(Error::UnsupportedVersion {
            path: path.to_path_buf(),
            found: version.trim().to_string(),
            expected: format!("v{TABLE_VERSION}"),
        });
    }
    let mut meta = Vec::new();
    let mut body = String::new();
    for line in lines {
        if let Some(m) = line.strip_prefix('#') {
            meta.push(m.trim().to_string());
        } else if !line.trim().is_empty() {
            body.push_str(line);
            body.push('\n');
        }
    }
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(body.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| Error::format(path, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let rows = reader
        .records()
        .map(|r| {
            r.map(|r| r.iter().map(str::to_string).collect())
                .map_err(|e| Error::format(path, e.to_string()))
        })
        .collect::<Result<_>>()?;
    Ok(Table { meta, header, rows })
}

pub fn read_table(path: &Path, kind: &str) -> Result<Table> {
    parse_table(&read_text(path)?, kind, path)
}

/// Renders a versioned CSV table. Floats use the shortest round-trip form.
pub fn render_table(kind: &str, meta: &[String], header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = format!("# {kind} v{TABLE_VERSION}\n");
    for m in meta {
        out.push_str(&format!("# {m}\n"));
    }
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    out.push_str(&String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf-8"));
    out
}

pub fn write_table(
    path: &Path,
    kind: &str,
    meta: &[String],
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<()> {
    write_text(path, &render_table(kind, meta, header, rows))
}

pub(crate) fn grid_meta(grid: &ChannelGrid) -> String {
    format!(
        "grid count={} start_thz={} spacing_ghz={} symbol_rate_gbd={}",
        grid.len(),
        grid.start_thz(),
        grid.spacing_ghz(),
        grid.symbol_rate_gbd()
    )
}

fn grid_from_meta(table: &Table, path: &Path) -> Result<ChannelGrid> {
    let get = |k: &str| -> Result<f64> {
        let v = table
            .meta_value(k)
            .ok_or_else(|| Error::format(path, format!("missing grid metadata '{k}'")))?;
        parse_f64(v, path, 0)
    };
    ChannelGrid::uniform(
        get("count")? as usize,
        get("start_thz")?,
        get("spacing_ghz")?,
        get("symbol_rate_gbd")?,
    )
}

// ---------------------------------------------------------------- grid

pub fn render_grid(grid: &ChannelGrid) -> String {
    render_table(
        "grid",
        &[],
        &["count", "start_thz", "spacing_ghz", "symbol_rate_gbd"],
        &[vec![
            grid.len().to_string(),
            grid.start_thz().to_string(),
            grid.spacing_ghz().to_string(),
            grid.symbol_rate_gbd().to_string(),
        ]],
    )
}

pub fn read_grid(path: &Path) -> Result<ChannelGrid> {
    let t = read_table(path, "grid")?;
    let row = t
        .rows
        .first()
        .ok_or_else(|| Error::format(path, "grid file has no data row"))?;
    let get = |name: &str| -> Result<f64> { parse_f64(&row[t.column(name, path)?], path, 1) };
    ChannelGrid::uniform(
        get("count")? as usize,
        get("start_thz")?,
        get("spacing_ghz")?,
        get("symbol_rate_gbd")?,
    )
}

// ---------------------------------------------------------------- spectrum

pub fn render_spectrum(spectrum: &PowerSpectrum) -> String {
    let rows: Vec<Vec<String>> = spectrum
        .grid()
        .frequencies_thz()
        .iter()
        .zip(spectrum.dbm())
        .map(|(f, p)| vec![format!("{f:.4}"), p.to_string()])
        .collect();
    render_table(
        "spectrum",
        &[grid_meta(spectrum.grid())],
        &["frequency_thz", "power_dbm"],
        &rows,
    )
}

pub fn write_spectrum(path: &Path, spectrum: &PowerSpectrum) -> Result<()> {
    write_text(path, &render_spectrum(spectrum))
}

/// Reads a spectrum whose frequencies must match `grid` to 1 MHz.
pub fn read_spectrum(path: &Path, grid: &Arc<ChannelGrid>) -> Result<PowerSpectrum> {
    let t = read_table(path, "spectrum")?;
    let fc = t.column("frequency_thz", path)?;
    let pc = t.column("power_dbm", path)?;
    if t.rows.len() != grid.len() {
        return Err(Error::format(
            path,
            format!("{} rows for a {}-channel grid", t.rows.len(), grid.len()),
        ));
    }
    let mut values = Vec::with_capacity(t.rows.len());
    for (i, (row, f)) in t.rows.iter().zip(grid.frequencies_thz()).enumerate() {
        let freq = parse_f64(&row[fc], path, i + 1)?;
        if (freq - f).abs() > 1e-6 {
            return Err(Error::format(
                path,
                format!("row {}: frequency {freq} THz is not on the grid ({f} THz)", i + 1),
            ));
        }
        values.push(parse_f64(&row[pc], path, i + 1)?);
    }
    PowerSpectrum::from_dbm(grid.clone(), values)
}

// ---------------------------------------------------------------- dataset

pub fn render_dataset(dataset: &Dataset) -> String {
    let n = dataset.grid.len();
    let mut header: Vec<String> = ["unit_id", "profile_id", "total_input_dbm", "total_output_dbm"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for prefix in ["pin_dbm", "gain_db", "nf_db"] {
        header.extend((0..n).map(|i| format!("{prefix}_{i:02}")));
    }
    let header_ref: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = dataset
        .samples
        .iter()
        .map(|s| {
            let mut r = vec![
                s.unit_id.clone(),
                s.profile_id.to_string(),
                s.total_input_dbm.to_string(),
                s.total_output_dbm.to_string(),
            ];
            for v in s.input_dbm.iter().chain(&s.gain_db).chain(&s.nf_db) {
                r.push(v.to_string());
            }
            r
        })
        .collect();
    render_table(
        "dataset",
        &[
            grid_meta(&dataset.grid),
            format!("skipped={}", dataset.skipped),
            format!("columns: per-channel input power (dBm), gain (dB) and NF (dB) for channels 00..{:02}", n - 1),
        ],
        &header_ref,
        &rows,
    )
}

pub fn write_dataset(path: &Path, dataset: &Dataset) -> Result<()> {
    write_text(path, &render_dataset(dataset))
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let t = read_table(path, "dataset")?;
    let grid = Arc::new(grid_from_meta(&t, path)?);
    let n = grid.len();
    if t.header.len() != 4 + 3 * n {
        return Err(Error::format(
            path,
            format!("expected {} columns, found {}", 4 + 3 * n, t.header.len()),
        ));
    }
    let skipped = t
        .meta_value("skipped")
        .map(|v| parse_f64(v, path, 0))
        .transpose()?
        .unwrap_or(0.0) as usize;
    let samples = t
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            if r.len() != t.header.len() {
                return Err(Error::format(path, format!("row {} has {} fields", i + 1, r.len())));
            }
            let nums = r[2..]
                .iter()
                .map(|v| parse_f64(v, path, i + 1))
                .collect::<Result<Vec<f64>>>()?;
            Ok(CharacterizationSample {
                unit_id: r[0].clone(),
                profile_id: r[1]
                    .parse()
                    .map_err(|_| Error::format(path, format!("row {}: bad profile id", i + 1)))?,
                total_input_dbm: nums[0],
                total_output_dbm: nums[1],
                input_dbm: nums[2..2 + n].to_vec(),
                gain_db: nums[2 + n..2 + 2 * n].to_vec(),
                nf_db: nums[2 + 2 * n..].to_vec(),
            })
        })
        .collect::<Result<_>>()?;
    Ok(Dataset {
        grid,
        samples,
        skipped,
    })
}

// ---------------------------------------------------------------- oracle

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct GridToml {
    pub count: usize,
    pub start_thz: f64,
    pub spacing_ghz: f64,
    pub symbol_rate_gbd: f64,
}

impl GridToml {
    pub(crate) fn build(&self) -> Result<ChannelGrid> {
        ChannelGrid::uniform(self.count, self.start_thz, self.spacing_ghz, self.symbol_rate_gbd)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpectrumToml {
    #[serde(default)]
    gaussians: Vec<GaussianTerm>,
    #[serde(default)]
    values: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OracleToml {
    version: i64,
    unit_id: String,
    length_m: f64,
    background_loss_db_per_m: f64,
    max_total_output_dbm: f64,
    grid: GridToml,
    absorption: SpectrumToml,
    emission: SpectrumToml,
}

pub(crate) fn check_config_version(version: i64, path: &Path) -> Result<()> {
    if version != CONFIG_VERSION {
        return Err(Error::UnsupportedVersion {
            path: path.to_path_buf(),
            found: version.to_string(),
            expected: CONFIG_VERSION.to_string(),
        });
    }
    Ok(())
}

fn spectrum_values(s: &SpectrumToml, grid: &ChannelGrid, what: &str, path: &Path) -> Result<Vec<f64>> {
    match (s.gaussians.is_empty(), s.values.is_empty()) {
        (false, true) => Ok(sum_of_gaussians(&s.gaussians, grid)),
        (true, false) => Ok(s.values.clone()),
        _ => Err(Error::format(
            path,
            format!("[{what}] needs exactly one of 'gaussians' or 'values'"),
        )),
    }
}

pub fn parse_oracle_params(text: &str, path: impl AsRef<Path>) -> Result<OracleParams> {
    let path = path.as_ref();
    let raw: OracleToml = toml::from_str(text).map_err(|e| Error::format(path, e.to_string()))?;
    check_config_version(raw.version, path)?;
    let grid = Arc::new(raw.grid.build()?);
    let params = OracleParams {
        unit_id: raw.unit_id,
        absorption: spectrum_values(&raw.absorption, &grid, "absorption", path)?,
        emission: spectrum_values(&raw.emission, &grid, "emission", path)?,
        grid,
        length_m: raw.length_m,
        background_loss: raw.background_loss_db_per_m,
        max_total_output_dbm: raw.max_total_output_dbm,
    };
    params.validate()?;
    Ok(params)
}

pub fn read_oracle_params(path: &Path) -> Result<OracleParams> {
    parse_oracle_params(&read_text(path)?, path)
}

// ---------------------------------------------------------------- models

pub fn parse_model(text: &str, path: &Path) -> Result<SurrogateModel> {
    #[derive(Deserialize)]
    struct Head {
        format: String,
        version: u32,
    }
    let head: Head = serde_json::from_str(text).map_err(|e| Error::format(path, e.to_string()))?;
    if head.format != MODEL_FORMAT {
        return Err(Error::format(
            path,
            format!("not a surrogate model file (format '{}')", head.format),
        ));
    }
    if head.version != MODEL_VERSION {
        return Err(Error::UnsupportedVersion {
            path: path.to_path_buf(),
            found: head.version.to_string(),
            expected: MODEL_VERSION.to_string(),
        });
    }
    let model: SurrogateModel =
        serde_json::from_str(text).map_err(|e| Error::format(path, e.to_string()))?;
    let n = model.grid.len();
    let net = &model.net;
    if net.input_dim != n + 2
        || net.output_dim != n
        || net.w1.len() != net.hidden_dim * net.input_dim
        || net.w2.len() != net.output_dim * net.hidden_dim
        || net.b1.len() != net.hidden_dim
        || net.b2.len() != net.output_dim
        || model.input_scaler.mean.len() != n + 2
        || model.input_scaler.scale.len() != n + 2
        || model.output_scaler.mean.len() != n
        || model.output_scaler.scale.len() != n
    {
        return Err(Error::format(path, "weight or scaler dimensions are inconsistent"));
    }
    Ok(model)
}

pub fn read_model(path: &Path) -> Result<SurrogateModel> {
    parse_model(&read_text(path)?, path)
}

pub fn write_model(path: &Path, model: &SurrogateModel) -> Result<()> {
    let text = serde_json::to_string_pretty(model).expect("model serializes");
    write_text(path, &text)
}

/// Resolves `p` against the directory of `base` unless it is absolute.
pub(crate) fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.parent().unwrap_or(Path::new(".")).join(p)
    }
}
