//! `wdmopt`: dataset generation, surrogate training, link simulation,
//! launch-profile optimization and network runs.

mod plot;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use wdmopt::cascade::{simulate, GffMode, LinkConfig};
use wdmopt::io;
use wdmopt::network::{
    is_unimodal, optimum_power, run_network, sweep_launch_power, LinkTemplate, NetworkSettings,
};
use wdmopt::optimizer::{optimize, Cost, OptimizationSpec, Strategy};
use wdmopt::oracle::{generate_dataset, perturb_unit, DatasetConfig};
use wdmopt::surrogate::{evaluate, train, EvalMode, ModelKind, TrainConfig};
use wdmopt::PowerSpectrum;

const SCHEMAS: &str = "\
FILE FORMATS
  Every table is CSV whose first line is '# <kind> v1'; further '#' lines
  carry metadata. Readers reject other kinds and versions.

  spectrum      frequency_thz,power_dbm            (one row per channel)
  b2b           frequency_thz,snr_db               (measured points, any count;
                                                    linear in dB between points,
                                                    held constant outside)
  dataset       unit_id,profile_id,total_input_dbm,total_output_dbm,
                pin_dbm_00..,gain_db_00..,nf_db_00..
  topology      id,node_a,node_b,total_km,spans_km (spans quoted, comma separated)
  snr-report    channel,frequency_thz,received_dbm,ase_w,nli_w,snr_db
  trace         iteration,cost,min_snr_db,excursion_db
  sweep         power_dbm,strategy,min_snr_db,excursion_db
  network       link,distance_km,spans,gff,strategy,min_snr_db,excursion_db,status,error
  eval-*        per-G_av / per-output-power / per-channel MSE and the MAE density

  Oracle parameters (TOML): version = 1, unit_id, length_m,
  background_loss_db_per_m, max_total_output_dbm, [grid] count/start_thz/
  spacing_ghz/symbol_rate_gbd, [absorption] and [emission] each with either
  gaussians = [{ amplitude, center_thz, width_thz }, ...] or values = [...].

  Link configuration (TOML):
    version = 1
    first_edfa_total_input_dbm = -2.0
    b2b = \"b2b.csv\"              # or a constant in dB
    [grid]                         # optional when a model-based amplifier is present
    [amplifiers.A1]
    kind = \"surrogate\"            # gain_model, nf_model (JSON model files)
                                   # kind = \"oracle\": params = <oracle toml>
                                   # kind = \"stub\": nf_db (omit for noiseless), shape_db
    [fiber]                        # defaults for every span (standard SMF if omitted):
                                   # attenuation_db_per_km, beta2_ps2_per_km, gamma_per_w_km,
                                   # raman_slope, raman_peak_shift_thz, connector_loss_db,
                                   # max_step_km
    [[span]]
    amplifier = \"A1\"
    target_output_dbm = 18.0
    length_km = 80.0
    include_srs = true
    include_nli = true
    gff = \"none\"                 # or \"ideal\"
    fiber = { ... }                # optional per-span overrides
  Relative paths resolve against the directory of the file naming them.

  Models are JSON with format = \"wdmopt-surrogate\" and version = 1.

ENVIRONMENT
  WDMOPT_CONFIG_DIR  directory holding default_link.toml, german_topology.csv
                     and the shipped models (defaults to the bundled fixtures)";

#[derive(Parser)]
#[command(name = "wdmopt", version, about = "Launch-profile optimization for WDM links with non-flat EDFAs", after_long_help = SCHEMAS)]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Directory with the default configuration files.
    #[arg(long, global = true, env = "WDMOPT_CONFIG_DIR")]
    config_dir: Option<PathBuf>,

    /// Log progress to standard error.
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Characterize a synthetic amplifier over random input profiles.
    GenDataset(GenDataset),
    /// Train a gain or NF surrogate on a dataset.
    Train(TrainArgs),
    /// Score a trained model on a dataset.
    EvalModel(EvalArgs),
    /// Simulate a link and report per-channel SNR.
    Predict(PredictArgs),
    /// Optimize the input profile of a link.
    Optimize(OptimizeArgs),
    /// Optimize at several launch powers.
    SweepPower(SweepArgs),
    /// Optimize every link of a topology.
    Network(NetworkArgs),
    /// Render a CSV output as an SVG chart.
    Plot(PlotArgs),
}

#[derive(Args)]
struct GenDataset {
    #[arg(long)]
    oracle: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 125)]
    profiles: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Characterize a perturbed unit of the same make (relative magnitude).
    #[arg(long)]
    perturb: Option<f64>,
    /// Seed of the unit perturbation.
    #[arg(long, default_value_t = 1)]
    unit_seed: u64,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    kind: ModelKind,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value = "intra")]
    mode: EvalMode,
    /// Directory for the evaluation CSVs.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct LinkArg {
    /// Link configuration (defaults to default_link.toml in the config directory).
    #[arg(long)]
    link: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    link: LinkArg,
    /// Spectrum file, or 'flat'.
    #[arg(long, default_value = "flat")]
    input: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct OptOptions {
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Uniform jitter on the starting profile, dB.
    #[arg(long, default_value_t = 0.0)]
    jitter: f64,
}

impl OptOptions {
    fn spec(&self, strategy: Strategy) -> OptimizationSpec {
        let mut s = OptimizationSpec::new(strategy);
        if let Some(v) = self.iterations {
            s.iterations = v;
        }
        if let Some(v) = self.learning_rate {
            s.learning_rate = v;
        }
        if let Some(v) = self.temperature {
            s.softmin_temperature = v;
        }
        s.seed = self.seed;
        s.initial_jitter_db = self.jitter;
        s
    }
}

#[derive(Args)]
struct OptimizeArgs {
    #[command(flatten)]
    link: LinkArg,
    #[arg(long)]
    strategy: Strategy,
    /// Defaults to the strategy's own cost.
    #[arg(long)]
    cost: Option<Cost>,
    /// Optimized profile (spectrum file).
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    trace: Option<PathBuf>,
    /// SNR report of the optimized profile.
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    opt: OptOptions,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    link: LinkArg,
    /// Launch powers, dBm.
    #[arg(long, value_delimiter = ',', default_value = "15,16,17,18")]
    powers: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "flat-input-reference,flat-snr-linear,flat-snr-full")]
    strategies: Vec<Strategy>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    opt: OptOptions,
}

#[derive(Args)]
struct NetworkArgs {
    /// Topology file (defaults to german_topology.csv in the config directory).
    #[arg(long)]
    topology: Option<PathBuf>,
    /// Link whose first span supplies amplifier, fiber and B2B profile.
    #[command(flatten)]
    link: LinkArg,
    #[arg(long, value_delimiter = ',', default_value = "flat-input-reference,flat-received-power,flat-snr-linear,flat-snr-srs,flat-snr-full")]
    strategies: Vec<Strategy>,
    #[arg(long, value_delimiter = ',', default_value = "none,ideal")]
    gff: Vec<GffMode>,
    #[arg(long, default_value_t = 18.0)]
    launch_power: f64,
    /// Start the full-model run from scratch instead of the best other profile.
    #[arg(long)]
    no_warm_start: bool,
    /// Only run these link ids.
    #[arg(long, value_delimiter = ',')]
    links: Option<Vec<u32>>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    opt: OptOptions,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn bundled_config_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

struct Ctx {
    config_dir: PathBuf,
}

impl Ctx {
    fn link_path(&self, arg: &LinkArg) -> PathBuf {
        arg.link
            .clone()
            .unwrap_or_else(|| self.config_dir.join("default_link.toml"))
    }

    fn load_link(&self, arg: &LinkArg) -> Result<LinkConfig> {
        let path = self.link_path(arg);
        io::read_link(&path).with_context(|| format!("loading link {}", path.display()))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.verbose {
            log::LevelFilter::Info
        } else {
            log::LevelFilter::Warn
        })
        .format_timestamp(None)
        .init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::FAILURE;
        }
    }
    let ctx = Ctx {
        config_dir: cli.config_dir.clone().unwrap_or_else(bundled_config_dir),
    };
    match run(&ctx, cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let chain: Vec<String> = e.chain().map(|c| c.to_string()).collect();
            eprintln!("error: {}", chain.join(": "));
            ExitCode::FAILURE
        }
    }
}

fn run(ctx: &Ctx, command: Command) -> Result<()> {
    match command {
        Command::GenDataset(a) => gen_dataset(a),
        Command::Train(a) => train_model(a),
        Command::EvalModel(a) => eval_model(a),
        Command::Predict(a) => predict(ctx, a),
        Command::Optimize(a) => optimize_link(ctx, a),
        Command::SweepPower(a) => sweep(ctx, a),
        Command::Network(a) => network(ctx, a),
        Command::Plot(a) => {
            let text = fs::read_to_string(&a.report)
                .with_context(|| format!("plot: reading {}", a.report.display()))?;
            let svg = plot::render(&text, &a.report).context("plot")?;
            io::write_text(&a.out, &svg).context("plot: writing SVG")?;
            println!("wrote {}", a.out.display());
            Ok(())
        }
    }
}

fn gen_dataset(a: GenDataset) -> Result<()> {
    let mut params = io::read_oracle_params(&a.oracle).context("gen-dataset: oracle parameters")?;
    if let Some(m) = a.perturb {
        params = perturb_unit(&params, a.unit_seed, m).context("gen-dataset: perturbing unit")?;
        params.unit_id = format!("{}-p{}", params.unit_id, a.unit_seed);
    }
    let config = DatasetConfig::new(a.seed, a.profiles);
    let ds = generate_dataset(&params, &config).context("gen-dataset")?;
    io::write_dataset(&a.out, &ds).context("gen-dataset: writing dataset")?;
    println!(
        "{} samples ({} profiles x {} operating points, {} infeasible skipped) -> {}",
        ds.len(),
        a.profiles,
        config.total_inputs_dbm.len() * config.total_outputs_dbm.len(),
        ds.skipped,
        a.out.display()
    );
    Ok(())
}

fn train_model(a: TrainArgs) -> Result<()> {
    let ds = io::read_dataset(&a.dataset).context("train: dataset")?;
    let mut cfg = TrainConfig::new(a.seed);
    if let Some(h) = a.hidden {
        cfg.hidden_dim = h;
    }
    if let Some(e) = a.epochs {
        cfg.max_epochs = e;
    }
    if let Some(p) = a.patience {
        cfg.patience = p;
    }
    let (model, report) = train(&ds, a.kind, &cfg).context("train")?;
    io::write_model(&a.out, &model).context("train: writing model")?;
    println!(
        "{} model: {} epochs (best {}), validation MSE {:.5} dB^2 -> {}",
        a.kind,
        report.epochs_run,
        report.best_epoch,
        report.validation_mse,
        a.out.display()
    );
    Ok(())
}

fn eval_model(a: EvalArgs) -> Result<()> {
    let model = io::read_model(&a.model).context("eval-model: model")?;
    let ds = io::read_dataset(&a.dataset).context("eval-model: dataset")?;
    let report = evaluate(&model, &ds, a.mode).context("eval-model")?;
    let stem = format!("eval_{}_{}", model.kind.name(), a.mode);
    io::write_eval_report(&a.out, &stem, &report).context("eval-model: writing CSVs")?;
    println!("overall MSE {:.5} dB^2 over {} samples", report.overall_mse(), report.samples.len());
    for b in &report.mse_per_gav {
        println!("  G_av {:>5.1} dB: MSE {:.5} dB^2 (n = {})", b.center, b.mse, b.count);
    }
    println!("wrote {}/{stem}_*.csv", a.out.display());
    Ok(())
}

fn load_input(link: &LinkConfig, input: &str) -> Result<PowerSpectrum> {
    if input == "flat" {
        Ok(link.flat_input())
    } else {
        io::read_spectrum(Path::new(input), &link.grid).with_context(|| format!("input spectrum {input}"))
    }
}

fn predict(ctx: &Ctx, a: PredictArgs) -> Result<()> {
    let link = ctx.load_link(&a.link).context("predict")?;
    let input = load_input(&link, &a.input).context("predict")?;
    let report = simulate(&link, &input).context("predict: simulation")?;
    for w in &report.warnings {
        warn!("{w}");
    }
    let text = io::render_snr_report(&report);
    match &a.out {
        Some(p) => io::write_text(p, &text).context("predict: writing report")?,
        None => print!("{text}"),
    }
    if a.out.is_some() {
        println!(
            "min SNR {:.3} dB, excursion {:.3} dB",
            report.min_snr_db(),
            report.excursion_db()
        );
    }
    Ok(())
}

fn optimize_link(ctx: &Ctx, a: OptimizeArgs) -> Result<()> {
    let link = ctx.load_link(&a.link).context("optimize")?;
    let mut spec = a.opt.spec(a.strategy);
    if let Some(c) = a.cost {
        spec.cost = c;
    }
    let res = optimize(&link, &spec).context("optimize")?;
    io::write_spectrum(&a.out, &res.input).context("optimize: writing profile")?;
    if let Some(t) = &a.trace {
        io::write_trace(t, &res.trace).context("optimize: writing trace")?;
    }
    if let Some(r) = &a.report {
        io::write_snr_report(r, &res.report).context("optimize: writing report")?;
    }
    let flat = simulate(&link, &link.flat_input()).context("optimize: flat reference")?;
    println!(
        "{} ({}): min SNR {:.3} dB (flat {:.3} dB), excursion {:.3} dB (flat {:.3} dB), {} iterations, {}",
        a.strategy,
        spec.cost,
        res.report.min_snr_db(),
        flat.min_snr_db(),
        res.report.excursion_db(),
        flat.excursion_db(),
        res.trace.len().saturating_sub(1),
        io::status_name(res.status)
    );
    Ok(())
}

fn sweep(ctx: &Ctx, a: SweepArgs) -> Result<()> {
    let link = ctx.load_link(&a.link).context("sweep-power")?;
    let spec = a.opt.spec(Strategy::FlatSnrFull);
    let rows = sweep_launch_power(&link, &a.powers, &a.strategies, &spec, true).context("sweep-power")?;
    let text = io::render_sweep(&rows);
    match &a.out {
        Some(p) => io::write_text(p, &text).context("sweep-power: writing table")?,
        None => print!("{text}"),
    }
    for s in &a.strategies {
        if let Some(p) = optimum_power(&rows, *s) {
            let shape = if is_unimodal(&rows, *s, 0.0) { "unimodal" } else { "not unimodal" };
            println!("{s}: best launch power {p} dBm ({shape})");
        }
    }
    Ok(())
}

fn network(ctx: &Ctx, a: NetworkArgs) -> Result<()> {
    let topo_path = a
        .topology
        .clone()
        .unwrap_or_else(|| ctx.config_dir.join("german_topology.csv"));
    let mut topology = io::read_topology(&topo_path).context("network: topology")?;
    if let Some(ids) = &a.links {
        topology.links.retain(|l| ids.contains(&l.id));
        if topology.links.is_empty() {
            bail!("network: none of the requested links exist in {}", topo_path.display());
        }
    }
    let link = ctx.load_link(&a.link).context("network")?;
    let template = LinkTemplate::from_link(&link).context("network: template")?;
    let settings = NetworkSettings {
        launch_power_dbm: a.launch_power,
        strategies: a.strategies.clone(),
        gff_modes: a.gff.clone(),
        spec: a.opt.spec(Strategy::FlatSnrFull),
        warm_start: !a.no_warm_start,
    };
    info!("optimizing {} links", topology.links.len());
    let report = run_network(&topology, &template, &settings);
    fs::create_dir_all(&a.out).with_context(|| format!("network: creating {}", a.out.display()))?;
    io::write_text(&a.out.join("network.csv"), &io::render_network_report(&report))
        .context("network: writing report")?;
    io::write_text(&a.out.join("profiles.csv"), &io::render_network_profiles(&report))
        .context("network: writing profiles")?;
    for (id, e) in report.failures() {
        warn!("link {id} failed: {e}");
    }
    println!("{:>4} {:>7} {:>5}  {:<22} {:>9} {:>9}", "link", "km", "gff", "strategy", "min SNR", "excursion");
    for l in &report.links {
        for r in l.runs.iter().flatten() {
            println!(
                "{:>4} {:>7.0} {:>5}  {:<22} {:>9.3} {:>9.3}",
                l.link_id,
                l.distance_km,
                r.gff.name(),
                r.strategy.name(),
                r.min_snr_db,
                r.excursion_db
            );
        }
    }
    println!("wrote {}", a.out.join("network.csv").display());
    let failed = report.failures().count();
    if failed > 0 {
        bail!("network: {failed} links failed (see network.csv)");
    }
    Ok(())
}
