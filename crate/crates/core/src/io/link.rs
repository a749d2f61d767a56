//! Link configuration, back-to-back profiles and topologies.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;

use super::{
    check_config_version, parse_f64, read_model, read_oracle_params, read_table, read_text,
    render_table, resolve, GridToml, Table,
};
use crate::amplifier::{AmplifierModel, OracleAmplifier, StubAmplifier, StubNoise, SurrogateAmplifier};
use crate::cascade::{interpolate_b2b, GffMode, LinkConfig, SpanConfig};
use crate::error::{Error, Result};
use crate::fiber::FiberParams;
use crate::network::{Topology, TopologyLink};
use crate::spectral::ChannelGrid;

#[derive(Deserialize)]
#[serde(untagged)]
enum B2bToml {
    Flat(f64),
    File(String),
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum AmplifierToml {
    Surrogate { gain_model: String, nf_model: String },
    Oracle { params: String },
    Stub {
        /// Constant NF; omitted means noiseless.
        nf_db: Option<f64>,
        shape_db: Option<Vec<f64>>,
    },
}

#[derive(Deserialize, Default, Clone)]
#[serde(deny_unknown_fields)]
struct FiberToml {
    attenuation_db_per_km: Option<f64>,
    beta2_ps2_per_km: Option<f64>,
    gamma_per_w_km: Option<f64>,
    raman_slope: Option<f64>,
    raman_peak_shift_thz: Option<f64>,
    connector_loss_db: Option<f64>,
    max_step_km: Option<f64>,
}

impl FiberToml {
    fn apply(&self, p: &mut FiberParams) {
        let set = |dst: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *dst = v;
            }
        };
        set(&mut p.attenuation_db_per_km, self.attenuation_db_per_km);
        set(&mut p.beta2_ps2_per_km, self.beta2_ps2_per_km);
        set(&mut p.gamma_per_w_km, self.gamma_per_w_km);
        set(&mut p.raman_slope, self.raman_slope);
        set(&mut p.raman_peak_shift_thz, self.raman_peak_shift_thz);
        set(&mut p.connector_loss_db, self.connector_loss_db);
        set(&mut p.max_step_km, self.max_step_km);
    }
}

fn yes() -> bool {
    true
}

fn no_gff() -> GffMode {
    GffMode::None
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpanToml {
    amplifier: String,
    target_output_dbm: f64,
    length_km: f64,
    #[serde(default = "yes")]
    include_srs: bool,
    #[serde(default = "yes")]
    include_nli: bool,
    #[serde(default = "no_gff")]
    gff: GffMode,
    #[serde(default)]
    fiber: FiberToml,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkToml {
    version: i64,
    first_edfa_total_input_dbm: f64,
    b2b: B2bToml,
    grid: Option<GridToml>,
    amplifiers: BTreeMap<String, AmplifierToml>,
    #[serde(default)]
    fiber: FiberToml,
    span: Vec<SpanToml>,
}

fn agree(grid: &mut Option<ChannelGrid>, other: &ChannelGrid, path: &Path, who: &str) -> Result<()> {
    match grid {
        Some(g) if g != other => Err(Error::format(
            path,
            format!("amplifier '{who}' uses a different channel grid"),
        )),
        Some(_) => Ok(()),
        None => {
            *grid = Some(other.clone());
            Ok(())
        }
    }
}

/// Parses a link configuration; relative file references resolve against
/// the directory of `path`.
pub fn parse_link(text: &str, path: &Path) -> Result<LinkConfig> {
    let raw: LinkToml = toml::from_str(text).map_err(|e| Error::format(path, e.to_string()))?;
    check_config_version(raw.version, path)?;

    let mut grid = raw.grid.as_ref().map(GridToml::build).transpose()?;
    let mut built: BTreeMap<String, Arc<dyn AmplifierModel>> = BTreeMap::new();
    let mut models = BTreeMap::new();
    let mut load = |p: PathBuf| -> Result<Arc<crate::surrogate::SurrogateModel>> {
        if let Some(m) = models.get(&p) {
            return Ok(Arc::clone(m));
        }
        let m = Arc::new(read_model(&p)?);
        models.insert(p, m.clone());
        Ok(m)
    };
    let mut stubs = Vec::new();
    for (id, amp) in &raw.amplifiers {
        match amp {
            AmplifierToml::Surrogate { gain_model, nf_model } => {
                let a = SurrogateAmplifier::new(
                    load(resolve(path, gain_model))?,
                    load(resolve(path, nf_model))?,
                )?;
                agree(&mut grid, a.grid(), path, id)?;
                built.insert(id.clone(), Arc::new(a));
            }
            AmplifierToml::Oracle { params } => {
                let a = OracleAmplifier::new(read_oracle_params(&resolve(path, params))?)?;
                agree(&mut grid, a.grid(), path, id)?;
                built.insert(id.clone(), Arc::new(a));
            }
            AmplifierToml::Stub { nf_db, shape_db } => stubs.push((id, nf_db, shape_db)),
        }
    }
    let grid = grid.ok_or_else(|| {
        Error::format(path, "no channel grid: add a [grid] table or a model-based amplifier")
    })?;
    for (id, nf_db, shape_db) in stubs {
        let noise = nf_db.map_or(StubNoise::Noiseless, StubNoise::Constant);
        let shape = shape_db.clone().unwrap_or_else(|| vec![0.0; grid.len()]);
        built.insert(id.clone(), Arc::new(StubAmplifier::new(grid.clone(), shape, noise)?));
    }
    let grid = Arc::new(grid);

    let b2b_snr_db = match &raw.b2b {
        B2bToml::Flat(v) => vec![*v; grid.len()],
        B2bToml::File(p) => read_b2b(&resolve(path, p), &grid)?,
    };

    let spans = raw
        .span
        .iter()
        .map(|s| {
            let mut fiber = FiberParams::ssmf(s.length_km);
            raw.fiber.apply(&mut fiber);
            s.fiber.apply(&mut fiber);
            SpanConfig {
                amplifier: s.amplifier.clone(),
                target_output_dbm: s.target_output_dbm,
                fiber,
                include_srs: s.include_srs,
                include_nli: s.include_nli,
                gff: s.gff,
            }
        })
        .collect();
    let link = LinkConfig {
        grid,
        spans,
        first_edfa_total_input_dbm: raw.first_edfa_total_input_dbm,
        b2b_snr_db,
        amplifiers: built,
    };
    link.validate().map_err(|e| Error::format(path, e.to_string()))?;
    Ok(link)
}

pub fn read_link(path: &Path) -> Result<LinkConfig> {
    parse_link(&read_text(path)?, path)
}

// ---------------------------------------------------------------- b2b

fn b2b_from_table(t: &Table, path: &Path, grid: &ChannelGrid) -> Result<Vec<f64>> {
    let fc = t.column("frequency_thz", path)?;
    let sc = t.column("snr_db", path)?;
    let mut freqs = Vec::with_capacity(t.rows.len());
    let mut snr = Vec::with_capacity(t.rows.len());
    for (i, row) in t.rows.iter().enumerate() {
        freqs.push(parse_f64(&row[fc], path, i + 1)?);
        snr.push(parse_f64(&row[sc], path, i + 1)?);
    }
    interpolate_b2b(&freqs, &snr, grid).map_err(|e| Error::format(path, e.to_string()))
}

/// Reads measured back-to-back SNR points and spreads them over `grid`.
pub fn read_b2b(path: &Path, grid: &ChannelGrid) -> Result<Vec<f64>> {
    b2b_from_table(&read_table(path, "b2b")?, path, grid)
}

pub fn parse_b2b(text: &str, path: &Path, grid: &ChannelGrid) -> Result<Vec<f64>> {
    b2b_from_table(&super::parse_table(text, "b2b", path)?, path, grid)
}

// ---------------------------------------------------------------- topology

pub fn parse_topology(text: &str, path: &Path) -> Result<Topology> {
    let t = super::parse_table(text, "topology", path)?;
    let ic = t.column("id", path)?;
    let ac = t.column("node_a", path)?;
    let bc = t.column("node_b", path)?;
    let tc = t.column("total_km", path)?;
    let sc = t.column("spans_km", path)?;
    let mut links = Vec::with_capacity(t.rows.len());
    for (i, row) in t.rows.iter().enumerate() {
        let id = row[ic]
            .parse::<u32>()
            .map_err(|_| Error::format(path, format!("row {}: bad link id '{}'", i + 1, row[ic])))?;
        let spans_km = row[sc]
            .split(',')
            .map(|s| parse_f64(s, path, i + 1))
            .collect::<Result<Vec<_>>>()?;
        links.push(TopologyLink {
            id,
            node_a: row[ac].clone(),
            node_b: row[bc].clone(),
            total_km: parse_f64(&row[tc], path, i + 1)?,
            spans_km,
        });
    }
    Topology::new(links)
}

pub fn read_topology(path: &Path) -> Result<Topology> {
    parse_topology(&read_text(path)?, path)
}

pub fn render_topology(topology: &Topology) -> String {
    let rows: Vec<Vec<String>> = topology
        .links
        .iter()
        .map(|l| {
            vec![
                l.id.to_string(),
                l.node_a.clone(),
                l.node_b.clone(),
                l.total_km.to_string(),
                l.spans_km
                    .iter()
                    .map(|s| s.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
            ]
        })
        .collect();
    render_table(
        "topology",
        &[],
        &["id", "node_a", "node_b", "total_km", "spans_km"],
        &rows,
    )
}
