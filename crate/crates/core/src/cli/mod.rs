//! Command-line driver: `detect`, `patch`, `filter`, `sweep`, `eval` and
//! `report`.
//!
//! Exit codes: 0 success, 1 missing modes detected, 2 input or config
//! error, 3 non-convergence or infeasible target, 4 internal error. The
//! `SYNTHPOST_WORKERS` variable caps the worker threads.

pub mod config;
pub mod pipeline;
pub mod report;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use indexmap::IndexMap;
use rayon::prelude::*;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::filter::{Feasibility, FilterConfig, FilterSession};
use crate::generators::{Generator, ReferenceGenerator, ReferenceMode};
use crate::modepatch::{get_mode_collapse, patch_loop, PatchConfig, PatchOutcome};
use crate::seed;
use crate::tabular::{split, SplitSpec, Table, TableSchema};

pub use config::PipelineConfig;
pub use pipeline::{Cell, RealData};
pub use report::{Metadata, MetricReport, Results};

pub const WORKERS_ENV: &str = "SYNTHPOST_WORKERS";
const SPLIT_STREAM: u64 = 30;

pub const EXIT_OK: i32 = 0;
pub const EXIT_DETECTED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NonConvergence { .. } => EXIT_INFEASIBLE,
        Error::GeneratorFailure(_) | Error::DimensionMismatch { .. } => EXIT_INTERNAL,
        _ => EXIT_INPUT,
    }
}

#[derive(Debug, Parser)]
#[command(name = "synthpost", version, about = "Post-process and evaluate synthetic tabular data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List real categorical levels absent from the synthetic table.
    Detect(Common),
    /// Repair missing modes by layer-frozen fine-tuning.
    Patch(Common),
    /// Enforce a proximity-risk bound by rejection with replacement.
    Filter(Common),
    /// Filter at every τ of the grid and score each output.
    Sweep(Common),
    /// Score a fixed (real, synthetic) pair.
    Eval(Common),
    /// Rebuild the CSV summaries from a saved report.
    Report {
        /// Path of a report.json written by another command.
        input: PathBuf,
        /// Directory for the CSVs; defaults to the report's directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Fidelity,
    Utility,
    Privacy,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// Pipeline config file (TOML).
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub real: Option<PathBuf>,
    #[arg(long)]
    pub schema: Option<PathBuf>,
    #[arg(long)]
    pub synthetic: Option<PathBuf>,
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Replaces the τ grid; repeat for several values.
    #[arg(long)]
    pub tau: Vec<f64>,
    #[arg(long)]
    pub variant: Option<String>,
    /// Enabled metric suites, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub suites: Option<Vec<Suite>>,
}

impl Common {
    /// Config file with flag overrides applied.
    pub fn resolve(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::from_path(p)?,
            None => PipelineConfig::default(),
        };
        let p = &mut cfg.paths;
        for (slot, flag) in [
            (&mut p.real, &self.real),
            (&mut p.schema, &self.schema),
            (&mut p.synthetic, &self.synthetic),
            (&mut p.test, &self.test),
            (&mut p.output, &self.out),
        ] {
            if flag.is_some() {
                slot.clone_from(flag);
            }
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if !self.tau.is_empty() {
            cfg.filter.taus.clone_from(&self.tau);
        }
        if let Some(v) = &self.variant {
            cfg.filter.variant.clone_from(v);
        }
        if let Some(suites) = &self.suites {
            cfg.metrics.fidelity = suites.contains(&Suite::Fidelity);
            cfg.metrics.utility = suites.contains(&Suite::Utility);
            cfg.metrics.privacy = suites.contains(&Suite::Privacy);
        }
        Ok(cfg)
    }
}

/// Everything a command reads from disk.
pub struct Inputs {
    pub schema: TableSchema,
    pub real: RealData,
    pub synthetic: Option<Table>,
    pub split_seed: u64,
}

pub fn load_inputs(cfg: &PipelineConfig) -> Result<Inputs> {
    let schema = TableSchema::from_path(cfg.require(&cfg.paths.schema, "schema")?)?;
    cfg.validate(&schema)?;
    let real = Table::load_csv(cfg.require(&cfg.paths.real, "real")?, &schema)?;
    let split_seed = seed::derive(cfg.seed, SPLIT_STREAM, 0);
    let real = match &cfg.paths.test {
        Some(test) => RealData { train: real, test: Table::load_csv(test, &schema)? },
        None => {
            let (train, test) = split(&real, SplitSpec::new(cfg.split.train_fraction, split_seed)?)?;
            RealData { train, test }
        }
    };
    let synthetic = cfg.paths.synthetic.as_ref().map(|p| Table::load_csv(p, &schema)).transpose()?;
    Ok(Inputs { schema, real, synthetic, split_seed })
}

impl Inputs {
    /// A fixed synthetic table is resampled with replacement; otherwise the
    /// reference generator is fit on the real training rows.
    pub fn generator(&self, cfg: &PipelineConfig) -> Result<ReferenceGenerator> {
        match &self.synthetic {
            Some(s) => ReferenceGenerator::new(s, ReferenceMode::BootstrapJitter { sigma: 0.0 }, cfg.seed),
            None => ReferenceGenerator::new(&self.real.train, cfg.generator.mode, cfg.seed),
        }
    }

    /// The fixed synthetic table, or one generator draw of the default size.
    pub fn synthetic_sample(&self, cfg: &PipelineConfig) -> Result<Table> {
        match &self.synthetic {
            Some(s) => Ok(s.clone()),
            None => {
                let rows = cfg.generator.rows.unwrap_or(self.real.train.n_rows());
                self.generator(cfg)?.sample(rows, baseline_seed(cfg))
            }
        }
    }
}

/// Seed of the unfiltered draw; equals the first filter cell's initial sample.
pub fn baseline_seed(cfg: &PipelineConfig) -> u64 {
    seed::derive(cfg.seed, 1, 0)
}

/// Outcome of a command: report plus exit status.
pub struct Outcome {
    pub report: MetricReport,
    pub exit: i32,
}

fn metadata(command: &str, cfg: &PipelineConfig, inputs: &Inputs) -> Metadata {
    let mut m = Metadata::new(command, cfg.hash());
    m.seeds = IndexMap::from([("base".to_string(), cfg.seed), ("split".to_string(), inputs.split_seed)]);
    m
}

fn results(command: &str, inputs: &Inputs) -> Results {
    Results {
        command: command.into(),
        real_train_rows: inputs.real.train.n_rows(),
        real_test_rows: inputs.real.test.n_rows(),
        missing_modes: None,
        cells: Vec::new(),
        errors: Vec::new(),
    }
}

fn finish(dir: &Path, mut report: MetricReport, exit: i32) -> Result<Outcome> {
    report.metadata.finish();
    report.save(dir.join("report.json"))?;
    let value: Value = serde_json::to_value(&report)?;
    report::write_tables(&value, dir)?;
    Ok(Outcome { report, exit })
}

fn write_json<T: serde::Serialize>(path: &Path, v: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(v)? + "\n")?;
    Ok(())
}

fn tau_label(tau: f64) -> String {
    format!("{tau}").replace('.', "p")
}

pub fn cmd_detect(cfg: &PipelineConfig) -> Result<Outcome> {
    let inputs = load_inputs(cfg)?;
    let dir = prepare(cfg)?;
    let synth = inputs.synthetic_sample(cfg)?;
    let missing = get_mode_collapse(&inputs.real.train, &synth)?;
    write_json(&dir.join("missing_modes.json"), &missing)?;
    let exit = if missing.is_empty() { EXIT_OK } else { EXIT_DETECTED };
    let mut res = results("detect", &inputs);
    res.missing_modes = Some(missing);
    finish(&dir, MetricReport { metadata: metadata("detect", cfg, &inputs), results: res }, exit)
}

fn patch_config(cfg: &PipelineConfig, inputs: &Inputs) -> PatchConfig {
    PatchConfig {
        batch: cfg.patch.batch.unwrap_or(inputs.real.train.n_rows()),
        m: cfg.patch.m,
        max_rounds: cfg.patch.max_rounds,
        seed: cfg.seed,
    }
}

/// Patch outcome whether or not the loop converged.
fn run_patch(cfg: &PipelineConfig, inputs: &Inputs) -> Result<(PatchOutcome, bool)> {
    match patch_loop(&inputs.generator(cfg)?, &inputs.real.train, &patch_config(cfg, inputs)) {
        Ok(o) => Ok((o, true)),
        Err(Error::NonConvergence { partial, .. }) => Ok((*partial, false)),
        Err(e) => Err(e),
    }
}

pub fn cmd_patch(cfg: &PipelineConfig) -> Result<Outcome> {
    let inputs = load_inputs(cfg)?;
    let dir = prepare(cfg)?;
    let (outcome, converged) = run_patch(cfg, &inputs)?;
    outcome.table().save_csv(dir.join("patched.csv"))?;
    write_json(&dir.join("repair_metrics.json"), &outcome.metrics)?;
    let mut cell = Cell::new("patch", None);
    cell.patch = Some(outcome);
    let mut res = results("patch", &inputs);
    res.cells.push(cell);
    let exit = if converged { EXIT_OK } else { EXIT_INFEASIBLE };
    finish(&dir, MetricReport { metadata: metadata("patch", cfg, &inputs), results: res }, exit)
}

fn filter_config(cfg: &PipelineConfig, inputs: &Inputs, tau: f64, seed: u64) -> Result<FilterConfig> {
    Ok(FilterConfig {
        tau,
        n: cfg.filter.n.unwrap_or(inputs.real.train.n_rows()),
        variant: cfg.filter.variant()?,
        budget: cfg.filter.budget,
        seed,
    })
}

pub fn cmd_filter(cfg: &PipelineConfig) -> Result<Outcome> {
    let inputs = load_inputs(cfg)?;
    let dir = prepare(cfg)?;
    let tau = cfg.taus()?[0];
    let session = FilterSession::new(&inputs.real.train, cfg.filter.variant()?)?;
    let rep = session.run(&inputs.generator(cfg)?, &filter_config(cfg, &inputs, tau, cfg.seed)?)?;
    rep.table().save_csv(dir.join("filtered.csv"))?;
    write_json(&dir.join("filter.json"), &rep)?;
    let exit = if rep.feasibility == Feasibility::MetThreshold { EXIT_OK } else { EXIT_INFEASIBLE };
    let mut meta = metadata("filter", cfg, &inputs);
    meta.encoder_fingerprint = Some(session.encoder().fingerprint().to_string());
    let mut cell = Cell::new(rep.variant.clone(), Some(tau));
    cell.filter = Some(rep);
    let mut res = results("filter", &inputs);
    res.cells.push(cell);
    finish(&dir, MetricReport { metadata: meta, results: res }, exit)
}

pub fn cmd_sweep(cfg: &PipelineConfig) -> Result<Outcome> {
    let inputs = load_inputs(cfg)?;
    let dir = prepare(cfg)?;
    let taus = cfg.taus()?;
    let variant = cfg.filter.variant()?;
    let session = FilterSession::new(&inputs.real.train, variant)?;
    let mut res = results("sweep", &inputs);
    let mut patch = None;
    let gen = if cfg.patch.enabled {
        let (outcome, _) = run_patch(cfg, &inputs)?;
        let g = ReferenceGenerator::new(outcome.table(), ReferenceMode::BootstrapJitter { sigma: 0.0 }, cfg.seed)?;
        patch = Some(outcome);
        g
    } else {
        inputs.generator(cfg)?
    };
    let name = variant.name();
    let n = filter_config(cfg, &inputs, taus[0], cfg.seed)?.n;

    let baseline = (|| {
        let sample = gen.sample(n, baseline_seed(cfg))?;
        let mut cell = Cell::new(name.clone(), None);
        cell.patch = patch;
        pipeline::evaluate_into(&mut cell, cfg, &session, &inputs.real, &sample)?;
        Ok::<_, Error>(cell)
    })();
    let cells: Vec<Result<Cell>> = taus
        .par_iter()
        .enumerate()
        .map(|(i, &tau)| {
            let rep = session.run(&gen, &filter_config(cfg, &inputs, tau, seed::cell(cfg.seed, i))?)?;
            rep.table().save_csv(dir.join(format!("filtered_tau_{}.csv", tau_label(tau))))?;
            let mut cell = Cell::new(name.clone(), Some(tau));
            pipeline::evaluate_into(&mut cell, cfg, &session, &inputs.real, rep.table())?;
            cell.filter = Some(rep);
            Ok(cell)
        })
        .collect();
    for (tau, cell) in std::iter::once((None, baseline)).chain(taus.iter().map(|&t| Some(t)).zip(cells)) {
        match cell {
            Ok(c) => res.cells.push(c),
            Err(e) => res.errors.push(report::CellError { variant: name.clone(), tau, error: e.to_string() }),
        }
    }
    let exit = if res.errors.is_empty() { EXIT_OK } else { EXIT_INFEASIBLE };
    let mut meta = metadata("sweep", cfg, &inputs);
    meta.encoder_fingerprint = Some(session.encoder().fingerprint().to_string());
    finish(&dir, MetricReport { metadata: meta, results: res }, exit)
}

pub fn cmd_eval(cfg: &PipelineConfig) -> Result<Outcome> {
    let inputs = load_inputs(cfg)?;
    let dir = prepare(cfg)?;
    let synth = inputs.synthetic_sample(cfg)?;
    let session = FilterSession::new(&inputs.real.train, cfg.filter.variant()?)?;
    let mut cell = Cell::new("eval", None);
    pipeline::evaluate_into(&mut cell, cfg, &session, &inputs.real, &synth)?;
    let mut res = results("eval", &inputs);
    res.cells.push(cell);
    let mut meta = metadata("eval", cfg, &inputs);
    meta.encoder_fingerprint = Some(session.encoder().fingerprint().to_string());
    finish(&dir, MetricReport { metadata: meta, results: res }, EXIT_OK)
}

/// Regenerates the CSV summaries of a saved report.
pub fn cmd_report(input: &Path, out: Option<&Path>) -> Result<()> {
    let value: Value = serde_json::from_str(&std::fs::read_to_string(input)?)?;
    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| input.parent().unwrap_or(Path::new(".")).to_path_buf());
    std::fs::create_dir_all(&dir)?;
    report::write_tables(&value, &dir)
}

fn prepare(cfg: &PipelineConfig) -> Result<PathBuf> {
    let dir = cfg.output_dir();
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn configure_workers() {
    if let Some(n) = std::env::var(WORKERS_ENV).ok().and_then(|v| v.parse::<usize>().ok()).filter(|&n| n > 0) {
        // a second call in one process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    configure_workers();
    let run = |common: &Common, f: fn(&PipelineConfig) -> Result<Outcome>| -> Result<i32> {
        let outcome = f(&common.resolve()?)?;
        println!("{}", serde_json::to_string_pretty(&outcome.report.results)?);
        Ok(outcome.exit)
    };
    let result = match &cli.command {
        Command::Detect(c) => run(c, cmd_detect),
        Command::Patch(c) => run(c, cmd_patch),
        Command::Filter(c) => run(c, cmd_filter),
        Command::Sweep(c) => run(c, cmd_sweep),
        Command::Eval(c) => run(c, cmd_eval),
        Command::Report { input, out } => cmd_report(input, out.as_deref()).map(|()| EXIT_OK),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("synthpost: {e}");
            exit_code(&e)
        }
    }
}
