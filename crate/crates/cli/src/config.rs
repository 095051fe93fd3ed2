//! Run configuration: JSON schema, flag overrides and validation.

use std::collections::BTreeMap;
use std::path::PathBuf;

use isoflow::fluid2d::{FluxForm, Orientation, Resample, Root};
use isoflow::multid::QuadraticForm;
use isoflow::renorm::corrugation::Schedule;
use isoflow::renorm::pairing::{BumpShape, TestFunction};
use isoflow::renorm::RenormConfig;
use isoflow::JetMode;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum CommandName {
    Surface,
    Fluid,
    Verify,
    Renorm,
    Multid,
}

impl CommandName {
    pub fn as_str(self) -> &'static str {
        match self {
            CommandName::Surface => "surface",
            CommandName::Fluid => "fluid",
            CommandName::Verify => "verify",
            CommandName::Renorm => "renorm",
            CommandName::Multid => "multid",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum JetChoice {
    #[default]
    Analytic,
    Fd,
}

/// Samples per axis and optional coordinate ranges; `null` ranges span a
/// full period.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub counts: Vec<usize>,
    pub ranges: Vec<Option<[f64; 2]>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seed {
    pub point: Vec<f64>,
    pub rho: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FluidSection {
    pub orientation: Orientation,
    pub root: Root,
    pub flux: FluxForm,
    pub resample: Resample,
    pub t_max: f64,
    pub dt: f64,
    pub seeds: Option<Vec<Seed>>,
}

impl Default for FluidSection {
    fn default() -> Self {
        FluidSection {
            orientation: Orientation::Chart,
            root: Root::Lower,
            flux: FluxForm::Literal,
            resample: Resample::Characteristic,
            t_max: 10.0,
            dt: 0.05,
            seeds: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenormSection {
    pub base_a: f64,
    pub base_c: f64,
    /// Explicit schedule; the dyadic one is used otherwise.
    pub schedule: Option<Schedule>,
    /// Number of corrugation stages `Q`; truncates an explicit schedule.
    pub stages: Option<usize>,
    pub shape: BumpShape,
    pub cells: usize,
    pub lattice: usize,
    pub halton: usize,
    pub check_points: usize,
    pub freeze_eta: bool,
    pub dictionary: Option<Vec<TestFunction>>,
    /// Per-stage CSV samples replacing the synthetic sequence.
    pub import: Vec<PathBuf>,
    /// Bound on the per-stage renormalized Gauss residual.
    pub gauss_tolerance: Option<f64>,
    /// Bound on the per-stage relative Codazzi residual.
    pub codazzi_tolerance: Option<f64>,
}

impl Default for RenormSection {
    fn default() -> Self {
        let d = RenormConfig::default();
        RenormSection {
            base_a: d.base_a,
            base_c: d.base_c,
            schedule: None,
            stages: None,
            shape: d.shape,
            cells: d.cells,
            lattice: d.lattice,
            halton: d.halton,
            check_points: d.check_points,
            freeze_eta: d.freeze_eta,
            dictionary: None,
            import: Vec::new(),
            gauss_tolerance: None,
            codazzi_tolerance: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MultidSection {
    /// Codimension; sets `k` on charts that take it, must match otherwise.
    pub codim: Option<usize>,
    pub normal_index: usize,
    pub form: QuadraticForm,
    pub prefer: Root,
    /// Also assemble the rank-one fluid when every node is consistent.
    pub fluid: bool,
    pub t_max: f64,
    pub dt: f64,
    pub div_h: f64,
}

impl Default for MultidSection {
    fn default() -> Self {
        MultidSection {
            codim: None,
            normal_index: 0,
            form: QuadraticForm::Derived,
            prefer: Root::Lower,
            fluid: false,
            t_max: 10.0,
            dt: 0.05,
            div_h: 1e-4,
        }
    }
}

/// Everything a run depends on. Output directory and thread count are left
/// out so that the echoed configuration only reflects what shapes results.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<CommandName>,
    pub chart: Option<String>,
    pub params: BTreeMap<String, f64>,
    pub grid: GridSpec,
    pub jets: JetChoice,
    pub fd_step: f64,
    pub format: Format,
    /// Bound for structure-equation residuals; depends on `jets` when unset.
    pub tolerance: Option<f64>,
    pub fluid: FluidSection,
    pub renorm: RenormSection,
    pub multid: MultidSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: None,
            chart: None,
            params: BTreeMap::new(),
            grid: GridSpec::default(),
            jets: JetChoice::Analytic,
            fd_step: 1e-3,
            format: Format::Csv,
            tolerance: None,
            fluid: FluidSection::default(),
            renorm: RenormSection::default(),
            multid: MultidSection::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))
    }

    pub fn jet_mode(&self) -> JetMode<f64> {
        match self.jets {
            JetChoice::Analytic => JetMode::Analytic,
            JetChoice::Fd => JetMode::FiniteDifference(self.fd_step),
        }
    }

    pub fn resolved_tolerance(&self) -> f64 {
        self.tolerance.unwrap_or(match self.jets {
            JetChoice::Analytic => 1e-8,
            JetChoice::Fd => 1e-4,
        })
    }

    /// Numeric sanity checks shared by every command.
    pub fn validate(&self) -> Result<(), CliError> {
        positive("fd_step", self.fd_step)?;
        if let Some(t) = self.tolerance {
            positive("tolerance", t)?;
        }
        positive("fluid.t_max", self.fluid.t_max)?;
        positive("fluid.dt", self.fluid.dt)?;
        if let Some(seeds) = &self.fluid.seeds {
            if seeds.is_empty() {
                return Err(CliError::Config("fluid.seeds is empty".into()));
            }
            for s in seeds {
                if s.point.len() != 2 || s.point.iter().any(|v| !v.is_finite()) {
                    return Err(CliError::Config(format!("seed point {:?} must have two finite coordinates", s.point)));
                }
                positive("seed rho", s.rho)?;
            }
        }
        if let Resample::InverseDistance(0) = self.fluid.resample {
            return Err(CliError::Config("fluid.resample inverse_distance needs at least one neighbour".into()));
        }
        positive("multid.t_max", self.multid.t_max)?;
        positive("multid.dt", self.multid.dt)?;
        positive("multid.div_h", self.multid.div_h)?;
        for (name, t) in [("renorm.gauss_tolerance", self.renorm.gauss_tolerance), ("renorm.codazzi_tolerance", self.renorm.codazzi_tolerance)] {
            if let Some(t) = t {
                positive(name, t)?;
            }
        }
        for r in self.grid.ranges.iter().flatten() {
            if !(r[1] > r[0]) || !r[0].is_finite() || !r[1].is_finite() {
                return Err(CliError::Config(format!("grid range [{}, {}] is empty", r[0], r[1])));
            }
        }
        Ok(())
    }

    /// Renorm settings with the schedule and stage count resolved.
    pub fn renorm_config(&self) -> Result<RenormConfig, CliError> {
        let r = &self.renorm;
        let mut schedule = match (&r.schedule, r.stages) {
            (Some(s), _) => s.clone(),
            (None, Some(q)) => Schedule::dyadic(q),
            (None, None) => RenormConfig::default().schedule,
        };
        if let Some(q) = r.stages {
            if q > schedule.stages() {
                return Err(CliError::Config(format!("Q = {q} exceeds the {} scheduled stages", schedule.stages())));
            }
            schedule.amplitudes.truncate(q);
            schedule.frequencies.truncate(q);
        }
        Ok(RenormConfig {
            base_a: r.base_a,
            base_c: r.base_c,
            schedule,
            shape: r.shape,
            cells: r.cells,
            lattice: r.lattice,
            halton: r.halton,
            check_points: r.check_points,
            freeze_eta: r.freeze_eta,
            dictionary: r.dictionary.clone(),
        })
    }
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must be positive and finite, got {v}")))
    }
}

fn number(s: &str, what: &str) -> Result<f64, CliError> {
    s.trim().parse::<f64>().map_err(|_| CliError::Config(format!("{what}: `{s}` is not a number")))
}

/// `a=0.5,c=2`
pub fn parse_params(s: &str) -> Result<BTreeMap<String, f64>, CliError> {
    s.split(',')
        .filter(|kv| !kv.trim().is_empty())
        .map(|kv| {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("--params: expected key=value, got `{kv}`")))?;
            Ok((k.trim().to_string(), number(v, "--params")?))
        })
        .collect()
}

/// `64x48`, or a single count applied to every axis of the chart.
pub fn parse_counts(s: &str) -> Result<Vec<usize>, CliError> {
    s.split('x')
        .map(|c| c.trim().parse::<usize>().map_err(|_| CliError::Config(format!("--grid: `{c}` is not a count"))))
        .collect()
}

/// `full;-1.4:1.4`, one entry per axis.
pub fn parse_ranges(s: &str) -> Result<Vec<Option<[f64; 2]>>, CliError> {
    s.split(';')
        .map(|r| {
            let r = r.trim();
            if r == "full" {
                return Ok(None);
            }
            let (lo, hi) =
                r.split_once(':').ok_or_else(|| CliError::Config(format!("--ranges: expected lo:hi or full, got `{r}`")))?;
            Ok(Some([number(lo, "--ranges")?, number(hi, "--ranges")?]))
        })
        .collect()
}

/// `x1,x2,rho;x1,x2,rho`
pub fn parse_seeds(s: &str) -> Result<Vec<Seed>, CliError> {
    s.split(';')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            let v: Vec<f64> = t.split(',').map(|x| number(x, "--seeds")).collect::<Result<_, _>>()?;
            match v.as_slice() {
                [x1, x2, rho] => Ok(Seed { point: vec![*x1, *x2], rho: *rho }),
                _ => Err(CliError::Config(format!("--seeds: expected x1,x2,rho, got `{t}`"))),
            }
        })
        .collect()
}
