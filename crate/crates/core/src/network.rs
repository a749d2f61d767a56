//! Network-wide runs: every link of a topology is built from a span
//! template, optimized under each strategy and GFF mode, and compared.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::amplifier::AmplifierModel;
use crate::cascade::{simulate, GffMode, LinkConfig, SpanConfig};
use crate::error::{Error, Result};
use crate::fiber::FiberParams;
use crate::optimizer::{optimize, OptimizationResult, OptimizationSpec, Status, Strategy};
use crate::spectral::ChannelGrid;

/// Allowed mismatch between a link's total and the sum of its spans, km.
pub const SPAN_SUM_TOLERANCE_KM: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct TopologyLink {
    pub id: u32,
    pub node_a: String,
    pub node_b: String,
    pub total_km: f64,
    pub spans_km: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub nodes: Vec<String>,
    pub links: Vec<TopologyLink>,
}

impl Topology {
    /// Collects node labels and sorts links by id.
    pub fn new(mut links: Vec<TopologyLink>) -> Result<Self> {
        links.sort_by_key(|l| l.id);
        let mut nodes: Vec<String> = links
            .iter()
            .flat_map(|l| [l.node_a.clone(), l.node_b.clone()])
            .collect();
        nodes.sort();
        nodes.dedup();
        let t = Self { nodes, links };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, l) in self.links.iter().enumerate() {
            let bad = |reason: String| Err(Error::InvalidTopology { link: l.id, reason });
            if i > 0 && self.links[i - 1].id == l.id {
                return bad("duplicate link id".into());
            }
            if l.spans_km.is_empty() {
                return bad("no spans".into());
            }
            if l.spans_km.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
                return bad("span lengths must be positive".into());
            }
            let sum: f64 = l.spans_km.iter().sum();
            if (sum - l.total_km).abs() > SPAN_SUM_TOLERANCE_KM {
                return bad(format!(
                    "spans sum to {sum} km but the total is {} km",
                    l.total_km
                ));
            }
        }
        Ok(())
    }

    pub fn link(&self, id: u32) -> Option<&TopologyLink> {
        self.links.iter().find(|l| l.id == id)
    }
}

/// Splits `total_km` into spans drawn uniformly from `[min_km, max_km]`,
/// using as few spans as possible.
pub fn random_spans(total_km: f64, min_km: f64, max_km: f64, seed: u64) -> Result<Vec<f64>> {
    if !(min_km > 0.0 && max_km >= min_km && total_km >= min_km) {
        return Err(Error::InvalidTopology {
            link: 0,
            reason: format!("cannot split {total_km} km into spans of {min_km}-{max_km} km"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = (total_km / max_km).ceil().max(1.0) as usize;
    if count as f64 * min_km > total_km + 1e-9 {
        return Err(Error::InvalidTopology {
            link: 0,
            reason: format!("cannot split {total_km} km into spans of {min_km}-{max_km} km"),
        });
    }
    loop {
        let mut spans: Vec<f64> = (0..count - 1)
            .map(|_| rng.gen_range(min_km..=max_km).round())
            .collect();
        let last = total_km - spans.iter().sum::<f64>();
        if (min_km..=max_km).contains(&last) {
            spans.push(last);
            return Ok(spans);
        }
    }
}

/// Everything except the span lengths needed to build a link.
#[derive(Debug, Clone)]
pub struct LinkTemplate {
    pub grid: Arc<ChannelGrid>,
    pub amplifier_id: String,
    pub amplifier: Arc<dyn AmplifierModel>,
    /// Fiber parameters; the length is replaced per span.
    pub fiber: FiberParams,
    pub first_edfa_total_input_dbm: f64,
    pub b2b_snr_db: Vec<f64>,
}

impl LinkTemplate {
    /// Template taken from the first span of an existing link.
    pub fn from_link(link: &LinkConfig) -> Result<Self> {
        let first = link
            .spans
            .first()
            .ok_or_else(|| Error::InvalidLink("a link needs at least one span".into()))?;
        let amplifier = link.amplifiers.get(&first.amplifier).cloned().ok_or_else(|| {
            Error::InvalidLink(format!("unknown amplifier '{}'", first.amplifier))
        })?;
        Ok(Self {
            grid: link.grid.clone(),
            amplifier_id: first.amplifier.clone(),
            amplifier,
            fiber: first.fiber.clone(),
            first_edfa_total_input_dbm: link.first_edfa_total_input_dbm,
            b2b_snr_db: link.b2b_snr_db.clone(),
        })
    }

    pub fn build(&self, spans_km: &[f64], launch_dbm: f64, gff: GffMode) -> LinkConfig {
        let mut amplifiers = BTreeMap::new();
        amplifiers.insert(self.amplifier_id.clone(), self.amplifier.clone());
        let spans = spans_km
            .iter()
            .map(|&l| {
                let mut fiber = self.fiber.clone();
                fiber.length_km = l;
                let mut s = SpanConfig::new(self.amplifier_id.clone(), launch_dbm, fiber);
                s.gff = gff;
                s
            })
            .collect();
        LinkConfig {
            grid: self.grid.clone(),
            spans,
            first_edfa_total_input_dbm: self.first_edfa_total_input_dbm,
            b2b_snr_db: self.b2b_snr_db.clone(),
            amplifiers,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSettings {
    pub launch_power_dbm: f64,
    pub strategies: Vec<Strategy>,
    pub gff_modes: Vec<GffMode>,
    /// Iterations, learning rate, temperature and seed for every run.
    pub spec: OptimizationSpec,
    /// Start the full-model strategy from the best profile found by the
    /// other strategies of the same link.
    pub warm_start: bool,
}

impl Default for NetworkSettings {
    fn default() -> Self {
        Self {
            launch_power_dbm: 18.0,
            strategies: Strategy::ALL.to_vec(),
            gff_modes: vec![GffMode::None, GffMode::Ideal],
            spec: OptimizationSpec::new(Strategy::FlatSnrFull),
            warm_start: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub strategy: Strategy,
    pub gff: GffMode,
    pub min_snr_db: f64,
    pub excursion_db: f64,
    /// Optimized input, dBm.
    pub profile_dbm: Vec<f64>,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkOutcome {
    pub link_id: u32,
    pub distance_km: f64,
    pub n_spans: usize,
    /// One entry per (gff mode, strategy), or the error that stopped the link.
    pub runs: std::result::Result<Vec<RunResult>, String>,
}

impl LinkOutcome {
    pub fn run(&self, strategy: Strategy, gff: GffMode) -> Option<&RunResult> {
        self.runs
            .as_ref()
            .ok()?
            .iter()
            .find(|r| r.strategy == strategy && r.gff == gff)
    }

    /// Min-SNR of the full-model strategy minus that of `strategy`, dB.
    pub fn penalty_db(&self, strategy: Strategy, gff: GffMode) -> Option<f64> {
        Some(self.run(Strategy::FlatSnrFull, gff)?.min_snr_db - self.run(strategy, gff)?.min_snr_db)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkReport {
    pub launch_power_dbm: f64,
    pub links: Vec<LinkOutcome>,
}

impl NetworkReport {
    pub fn failures(&self) -> impl Iterator<Item = (u32, &str)> {
        self.links
            .iter()
            .filter_map(|l| l.runs.as_ref().err().map(|e| (l.link_id, e.as_str())))
    }
}

fn run_strategies(
    link: &LinkConfig,
    strategies: &[Strategy],
    base: &OptimizationSpec,
    warm_start: bool,
) -> Result<Vec<OptimizationResult>> {
    let mut ordered: Vec<Strategy> = strategies.to_vec();
    // The full-model run goes last so it can start from the others.
    ordered.sort_by_key(|s| *s == Strategy::FlatSnrFull);
    let mut done: Vec<OptimizationResult> = Vec::with_capacity(ordered.len());
    for &strategy in &ordered {
        let mut spec = base.clone();
        spec.strategy = strategy;
        spec.cost = strategy.default_cost();
        spec.initial = None;
        if strategy == Strategy::FlatSnrFull && warm_start {
            let best = done
                .iter()
                .filter(|r| r.cost == spec.cost)
                .min_by(|a, b| a.full_cost.total_cmp(&b.full_cost));
            spec.initial = best.map(|r| r.input.values().to_vec());
        }
        done.push(optimize(link, &spec)?);
    }
    let mut out = Vec::with_capacity(strategies.len());
    for s in strategies {
        let i = ordered.iter().position(|o| o == s).expect("strategy was run");
        out.push(done[i].clone());
    }
    Ok(out)
}

fn run_link(l: &TopologyLink, template: &LinkTemplate, settings: &NetworkSettings) -> LinkOutcome {
    let runs = (|| -> Result<Vec<RunResult>> {
        let mut runs = Vec::new();
        for &gff in &settings.gff_modes {
            let link = template.build(&l.spans_km, settings.launch_power_dbm, gff);
            for r in run_strategies(&link, &settings.strategies, &settings.spec, settings.warm_start)? {
                runs.push(RunResult {
                    strategy: r.strategy,
                    gff,
                    min_snr_db: r.report.min_snr_db(),
                    excursion_db: r.report.excursion_db(),
                    profile_dbm: r.input.values().to_vec(),
                    status: r.status,
                });
            }
        }
        Ok(runs)
    })();
    LinkOutcome {
        link_id: l.id,
        distance_km: l.total_km,
        n_spans: l.spans_km.len(),
        runs: runs.map_err(|e| e.to_string()),
    }
}

/// Optimizes every link independently (in parallel) under each strategy
/// and GFF mode. Failures are recorded per link.
pub fn run_network(topology: &Topology, template: &LinkTemplate, settings: &NetworkSettings) -> NetworkReport {
    let links = topology
        .links
        .par_iter()
        .map(|l| run_link(l, template, settings))
        .collect();
    NetworkReport {
        launch_power_dbm: settings.launch_power_dbm,
        links,
    }
}

/// Re-simulates a stored run; returns the min-SNR of its profile.
pub fn resimulate(
    template: &LinkTemplate,
    l: &TopologyLink,
    launch_dbm: f64,
    run: &RunResult,
) -> Result<f64> {
    let link = template.build(&l.spans_km, launch_dbm, run.gff);
    let input = crate::spectral::PowerSpectrum::from_dbm(link.grid.clone(), run.profile_dbm.clone())?;
    Ok(simulate(&link, &input)?.min_snr_db())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub power_dbm: f64,
    pub strategy: Strategy,
    pub min_snr_db: f64,
    pub excursion_db: f64,
}

/// Min-SNR per (launch power, strategy). Every span target is set to the
/// swept power.
pub fn sweep_launch_power(
    link: &LinkConfig,
    powers_dbm: &[f64],
    strategies: &[Strategy],
    spec: &OptimizationSpec,
    warm_start: bool,
) -> Result<Vec<SweepRow>> {
    let per_power: Vec<Result<Vec<SweepRow>>> = powers_dbm
        .par_iter()
        .map(|&p| {
            let l = link.with_launch_power(p);
            let results = run_strategies(&l, strategies, spec, warm_start)?;
            Ok(results
                .into_iter()
                .map(|r| SweepRow {
                    power_dbm: p,
                    strategy: r.strategy,
                    min_snr_db: r.report.min_snr_db(),
                    excursion_db: r.report.excursion_db(),
                })
                .collect())
        })
        .collect();
    let mut rows = Vec::new();
    for r in per_power {
        rows.extend(r?);
    }
    Ok(rows)
}

/// Launch power with the best min-SNR for `strategy`.
pub fn optimum_power(rows: &[SweepRow], strategy: Strategy) -> Option<f64> {
    rows.iter()
        .filter(|r| r.strategy == strategy)
        .max_by(|a, b| a.min_snr_db.total_cmp(&b.min_snr_db))
        .map(|r| r.power_dbm)
}

/// True when the min-SNR sequence of `strategy` (ordered by power) rises
/// then falls at most once, within `tol` dB.
pub fn is_unimodal(rows: &[SweepRow], strategy: Strategy, tol: f64) -> bool {
    let mut pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.strategy == strategy)
        .map(|r| (r.power_dbm, r.min_snr_db))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut falling = false;
    for w in pts.windows(2) {
        let d = w[1].1 - w[0].1;
        if d < -tol {
            falling = true;
        } else if d > tol && falling {
            return false;
        }
    }
    true
}
