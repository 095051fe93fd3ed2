//! `isoflow`: geometry, fluid and renormalization runs from the command line.
//!
//! Exit status: 0 when every verdict passes, 2 for configuration errors (no
//! files written), 3 for numerical failures or failed verdicts.

mod commands;
mod config;
mod export;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use thiserror::Error;

use crate::commands::{execute, prepare, Outcome};
use crate::config::{parse_counts, parse_params, parse_ranges, parse_seeds, CommandName, Format, JetChoice, RunConfig};
use crate::export::{write_all, Artifact};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure in {op}: {source}")]
    Numerical { op: &'static str, source: isoflow::Error },
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical { .. } => 3,
            CliError::Io(_) => 1,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "isoflow", version, about = "Embedded-surface geometry and the stationary fluids it carries")]
struct Cli {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Derivative source for chart jets.
    #[arg(long, global = true, value_enum)]
    jets: Option<JetChoice>,
    /// Step of finite-difference jets.
    #[arg(long, global = true, value_name = "H")]
    fd_step: Option<f64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Export metric, second fundamental form and curvatures on a grid.
    Surface(ChartArgs),
    /// Build density, velocity and pressure from a surface.
    Fluid(FluidArgs),
    /// Check the Gauss, Codazzi and Ricci equations on a grid.
    Verify(VerifyArgs),
    /// Track renormalized fields along a corrugation sequence.
    Renorm(RenormArgs),
    /// Consistency of the pressure construction in higher dimension.
    Multid(MultidArgs),
}

#[derive(Args, Debug)]
struct ChartArgs {
    #[arg(long)]
    chart: Option<String>,
    /// Chart parameters as `key=value,...`.
    #[arg(long, allow_hyphen_values = true)]
    params: Option<String>,
    /// Samples per axis, `64x64` or `64`.
    #[arg(long)]
    grid: Option<String>,
    /// Per-axis ranges, `full;-1.4:1.4`.
    #[arg(long, allow_hyphen_values = true)]
    ranges: Option<String>,
}

#[derive(Args, Debug)]
struct FluidArgs {
    #[command(flatten)]
    chart: ChartArgs,
    /// Inflow seeds `x1,x2,rho;...` sharing one coordinate.
    #[arg(long, allow_hyphen_values = true)]
    seeds: Option<String>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[command(flatten)]
    chart: ChartArgs,
    #[arg(long)]
    tolerance: Option<f64>,
}

#[derive(Args, Debug)]
struct RenormArgs {
    /// JSON corrugation schedule `{"amplitudes": [...], "frequencies": [...]}`.
    #[arg(long, value_name = "PATH")]
    schedule: Option<PathBuf>,
    /// Number of corrugation stages.
    #[arg(long = "Q", value_name = "Q")]
    stages: Option<usize>,
    /// Lattice side of the measurement set.
    #[arg(long)]
    grid: Option<usize>,
    /// JSON list of test functions.
    #[arg(long, value_name = "PATH")]
    phi_dict: Option<PathBuf>,
    /// Per-stage CSV samples (`x1,x2,y1,y2,y3`), in stage order.
    #[arg(long, value_name = "CSV", num_args = 1..)]
    import: Vec<PathBuf>,
}

#[derive(Args, Debug)]
struct MultidArgs {
    #[command(flatten)]
    chart: ChartArgs,
    #[arg(long)]
    codim: Option<usize>,
    /// Frame index of the distinguished normal.
    #[arg(long)]
    normal_index: Option<usize>,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &PathBuf, what: &str) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{what} {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{what} {}: {e}", path.display())))
}

impl ChartArgs {
    fn apply(&self, cfg: &mut RunConfig) -> Result<(), CliError> {
        if let Some(c) = &self.chart {
            cfg.chart = Some(c.clone());
        }
        if let Some(p) = &self.params {
            cfg.params.extend(parse_params(p)?);
        }
        if let Some(g) = &self.grid {
            cfg.grid.counts = parse_counts(g)?;
        }
        if let Some(r) = &self.ranges {
            cfg.grid.ranges = parse_ranges(r)?;
        }
        Ok(())
    }
}

/// Config file first, then flags on top.
fn resolve(cli: &Cli) -> Result<(CommandName, RunConfig), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text =
                std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))?;
            RunConfig::parse(&text)?
        }
        None => RunConfig::default(),
    };
    let command = match &cli.command {
        Command::Surface(a) => {
            a.apply(&mut cfg)?;
            CommandName::Surface
        }
        Command::Fluid(a) => {
            a.chart.apply(&mut cfg)?;
            if let Some(s) = &a.seeds {
                cfg.fluid.seeds = Some(parse_seeds(s)?);
            }
            cfg.fluid.t_max = a.t_max.unwrap_or(cfg.fluid.t_max);
            cfg.fluid.dt = a.dt.unwrap_or(cfg.fluid.dt);
            CommandName::Fluid
        }
        Command::Verify(a) => {
            a.chart.apply(&mut cfg)?;
            cfg.tolerance = a.tolerance.or(cfg.tolerance);
            CommandName::Verify
        }
        Command::Renorm(a) => {
            if let Some(p) = &a.schedule {
                cfg.renorm.schedule = Some(read_json(p, "schedule")?);
            }
            if let Some(p) = &a.phi_dict {
                cfg.renorm.dictionary = Some(read_json(p, "dictionary")?);
            }
            cfg.renorm.stages = a.stages.or(cfg.renorm.stages);
            cfg.renorm.lattice = a.grid.unwrap_or(cfg.renorm.lattice);
            if !a.import.is_empty() {
                cfg.renorm.import = a.import.clone();
            }
            CommandName::Renorm
        }
        Command::Multid(a) => {
            a.chart.apply(&mut cfg)?;
            cfg.multid.codim = a.codim.or(cfg.multid.codim);
            cfg.multid.normal_index = a.normal_index.unwrap_or(cfg.multid.normal_index);
            CommandName::Multid
        }
    };
    if let Some(c) = cfg.command {
        if c != command {
            return Err(CliError::Config(format!("config is for `{}`, not `{}`", c.as_str(), command.as_str())));
        }
    }
    cfg.command = Some(command);
    cfg.format = cli.format.unwrap_or(cfg.format);
    cfg.jets = cli.jets.unwrap_or(cfg.jets);
    cfg.fd_step = cli.fd_step.unwrap_or(cfg.fd_step);
    if command == CommandName::Renorm && cfg.renorm.import.is_empty() {
        // record the resolved schedule rather than the shorthand
        let rc = cfg.renorm_config()?;
        cfg.renorm.schedule = Some(rc.schedule);
        cfg.renorm.stages = None;
    }
    Ok((command, cfg))
}

fn report(command: CommandName, cfg: &RunConfig, outcome: &Outcome, failures: &[String]) -> Result<Value, CliError> {
    let mut doc = json!({
        "tool": "isoflow",
        "version": isoflow::VERSION,
        "command": command.as_str(),
        "config": serde_json::to_value(cfg).map_err(|e| CliError::Io(e.to_string()))?,
        "residuals": serde_json::to_value(&outcome.residuals).map_err(|e| CliError::Io(e.to_string()))?,
        "verdict": if failures.is_empty() { "pass" } else { "fail" },
        "failures": failures,
    });
    let map = doc.as_object_mut().expect("report is an object");
    for (k, v) in &outcome.sections {
        map.insert(k.clone(), v.clone());
    }
    Ok(doc)
}

fn print_table(outcome: &Outcome) {
    let width = outcome.residuals.residuals.iter().map(|e| e.name.len()).max().unwrap_or(0);
    for e in &outcome.residuals.residuals {
        let status = match e.pass {
            Some(true) => "PASS",
            Some(false) => "FAIL",
            None => "",
        };
        let tol = e.tolerance.map(|t| format!("<= {t:e}")).unwrap_or_default();
        println!("{:width$}  {:>12}  {tol:10}  {status}", e.name, format!("{:.4e}", e.value));
    }
}

fn run(cli: &Cli) -> Result<bool, CliError> {
    let (command, cfg) = resolve(cli)?;
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    let job = prepare(&cfg, command)?;
    let outcome = execute(&job, &cfg)?;
    let failures = outcome.failure_lines(command.as_str());
    let mut artifacts = outcome.tables.clone();
    artifacts.push(Artifact::json("report.json", &report(command, &cfg, &outcome, &failures)?));
    let written = write_all(&cli.out, &artifacts)?;
    print_table(&outcome);
    for path in &written {
        println!("wrote {}", path.display());
    }
    for f in &failures {
        eprintln!("FAIL {f}");
    }
    Ok(failures.is_empty())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("isoflow: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
