//! Validated jobs and what each subcommand computes.

use std::fs::File;

use isoflow::fluid2d::{assemble_fluid, euler_residual, stress_identities, FluidConfig};
use isoflow::geometry::{codazzi_residual, gauss_codazzi_residual, gauss_residual, metric_compatibility_residual, ricci_residual};
use isoflow::grid::sample_geometry;
use isoflow::multid::{balance_residual_grid, consistency_check, fluid_nd, gcr_residual, higher_geometry, nd_residual, NdConfig, RootMatch};
use isoflow::renorm::import::{read_stage_csv, renorm_from_samples, SampledStage};
use isoflow::renorm::{run_renorm, RenormConfig, RenormReport, Verdict, COMPONENT_NAMES};
use isoflow::{BuiltinChart, Chart, Error, Grid64, ResidualReport};
use serde_json::{json, Map, Value};

use crate::config::{CommandName, RunConfig};
use crate::export::{Artifact, Cell, Table};
use crate::CliError;

const DEFAULT_COUNT: usize = 32;

pub enum Job {
    Surface(ChartJob),
    Verify(ChartJob),
    Fluid(ChartJob),
    Multid(ChartJob),
    Renorm(RenormJob),
}

pub struct ChartJob {
    pub chart: BuiltinChart<f64>,
    pub grid: Grid64,
}

pub enum RenormJob {
    Synthetic(RenormConfig),
    Imported { stages: Vec<SampledStage>, cfg: RenormConfig },
}

/// What a finished command hands back for export.
#[derive(Default)]
pub struct Outcome {
    pub tables: Vec<Artifact>,
    pub residuals: ResidualReport,
    /// Command-specific report sections.
    pub sections: Map<String, Value>,
    /// Verdict failures outside `residuals`, as `module/op: message`.
    pub failures: Vec<String>,
}

impl Outcome {
    pub fn failure_lines(&self, command: &str) -> Vec<String> {
        let mut lines: Vec<String> = self
            .residuals
            .failures()
            .iter()
            .map(|e| format!("{command}: residual `{}` = {:e} exceeds {:e}", e.name, e.value, e.tolerance.unwrap_or(f64::NAN)))
            .collect();
        lines.extend(self.failures.iter().cloned());
        lines
    }
}

fn config_err(e: Error) -> CliError {
    CliError::Config(e.to_string())
}

fn numerical(op: &'static str) -> impl Fn(Error) -> CliError {
    move |source| CliError::Numerical { op, source }
}

/// Resolves the chart and grid and checks that the command can run on them.
pub fn prepare(cfg: &RunConfig, command: CommandName) -> Result<Job, CliError> {
    cfg.validate()?;
    if command == CommandName::Renorm {
        return prepare_renorm(cfg).map(Job::Renorm);
    }
    let name = cfg.chart.as_deref().ok_or_else(|| CliError::Config("no chart given (--chart or \"chart\")".into()))?;
    let mut params = cfg.params.clone();
    if command == CommandName::Multid {
        if let (Some(k), "plane" | "graph") = (cfg.multid.codim, name) {
            params.insert("k".into(), k as f64);
        }
    }
    let chart = BuiltinChart::<f64>::from_params(name, &params).map_err(config_err)?;
    let (n, k) = (chart.dim_domain(), chart.codim());
    match command {
        CommandName::Fluid if n != 2 || k != 1 => {
            return Err(CliError::Config(format!("fluid needs a surface in R^3; {name} has dimension {n}, codimension {k}")));
        }
        CommandName::Multid => {
            if let Some(want) = cfg.multid.codim {
                if want != k {
                    return Err(CliError::Config(format!("chart {name} has codimension {k}, not {want}")));
                }
            }
            if cfg.multid.normal_index >= k {
                return Err(CliError::Config(format!("normal index {} out of range for codimension {k}", cfg.multid.normal_index)));
            }
        }
        _ => {}
    }
    let grid = chart_grid(cfg, &chart)?;
    let job = ChartJob { chart, grid };
    Ok(match command {
        CommandName::Surface => Job::Surface(job),
        CommandName::Verify => Job::Verify(job),
        CommandName::Fluid => Job::Fluid(job),
        _ => Job::Multid(job),
    })
}

fn chart_grid(cfg: &RunConfig, chart: &BuiltinChart<f64>) -> Result<Grid64, CliError> {
    let n = chart.dim_domain();
    let counts = match cfg.grid.counts.len() {
        0 => vec![DEFAULT_COUNT; n],
        1 => vec![cfg.grid.counts[0]; n],
        _ => cfg.grid.counts.clone(),
    };
    let ranges: Vec<Option<(f64, f64)>> = if cfg.grid.ranges.is_empty() {
        vec![None; n]
    } else if cfg.grid.ranges.len() == n {
        cfg.grid.ranges.iter().map(|r| r.map(|[a, b]| (a, b))).collect()
    } else {
        return Err(CliError::Config(format!("grid has {} ranges, chart has {n} axes", cfg.grid.ranges.len())));
    };
    for (axis, (r, b)) in ranges.iter().zip(chart.bounds()).enumerate() {
        if let (Some((lo, hi)), Some((blo, bhi))) = (r, b) {
            if *lo < blo || *hi > bhi {
                return Err(CliError::Config(format!("axis {axis} range [{lo}, {hi}] leaves the chart domain [{blo}, {bhi}]")));
            }
        }
    }
    Grid64::for_chart(chart, counts, &ranges).map_err(config_err)
}

fn prepare_renorm(cfg: &RunConfig) -> Result<RenormJob, CliError> {
    let rc = cfg.renorm_config()?;
    if rc.cells < 4 || rc.check_points == 0 || rc.lattice + rc.halton == 0 {
        return Err(CliError::Config("renorm needs cells >= 4, check_points > 0 and a non-empty measurement set".into()));
    }
    if let Some(d) = &rc.dictionary {
        if d.is_empty() || d.iter().any(|phi| !(phi.half_width > 0.0) || !phi.center.iter().all(|c| c.is_finite())) {
            return Err(CliError::Config("dictionary entries need finite centres and positive half-widths".into()));
        }
    }
    if cfg.renorm.import.is_empty() {
        rc.schedule.validate(rc.base_a, rc.base_c).map_err(config_err)?;
        return Ok(RenormJob::Synthetic(rc));
    }
    let stages = cfg
        .renorm
        .import
        .iter()
        .map(|path| {
            let f = File::open(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            read_stage_csv(f).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(RenormJob::Imported { stages, cfg: rc })
}

pub fn execute(job: &Job, cfg: &RunConfig) -> Result<Outcome, CliError> {
    match job {
        Job::Surface(j) => surface(j, cfg),
        Job::Verify(j) => verify(j, cfg),
        Job::Fluid(j) => fluid(j, cfg),
        Job::Multid(j) => multid(j, cfg),
        Job::Renorm(j) => renorm(j, cfg),
    }
}

fn provenance(r: ResidualReport, cfg: &RunConfig, chart: &BuiltinChart<f64>) -> ResidualReport {
    let params = chart_params(cfg);
    r.provenance("chart", chart.name()).provenance("params", params).provenance("jets", match cfg.jet_mode() {
        isoflow::JetMode::Analytic => "analytic".to_string(),
        isoflow::JetMode::FiniteDifference(h) => format!("fd(h = {h:?})"),
    })
}

fn chart_params(cfg: &RunConfig) -> String {
    cfg.params.iter().map(|(k, v)| format!("{k}={v:?}")).collect::<Vec<_>>().join(",")
}

fn coord_columns(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("x{i}")).collect()
}

fn surface(job: &ChartJob, cfg: &RunConfig) -> Result<Outcome, CliError> {
    let states = sample_geometry(&job.chart, &job.grid, cfg.jet_mode()).map_err(numerical("geometry/sample_geometry"))?;
    let (n, k) = (job.chart.dim_domain(), job.chart.codim());
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let mut cols = coord_columns(n);
    cols.extend(pairs.iter().map(|(i, j)| format!("g{}{}", i + 1, j + 1)));
    for mu in 0..k {
        let prefix = if k == 1 { "h".to_string() } else { format!("h{}_", mu + 1) };
        cols.extend(pairs.iter().map(|(i, j)| format!("{prefix}{}{}", i + 1, j + 1)));
    }
    cols.extend((0..k).map(|mu| if k == 1 { "mean".to_string() } else { format!("mean{}", mu + 1) }));
    if n == 2 {
        cols.push("kappa".into());
    }
    if n == 2 && k == 1 {
        cols.extend(["k1".to_string(), "k2".to_string()]);
    }
    let mut table = Table::new(cols);
    let mut min_det = f64::INFINITY;
    for s in &states {
        let mut row: Vec<Cell> = s.point.iter().map(|&x| x.into()).collect();
        row.extend(pairs.iter().map(|&(i, j)| s.g_at(i, j).into()));
        for mu in 0..k {
            row.extend(pairs.iter().map(|&(i, j)| s.h_at(mu, i, j).into()));
        }
        row.extend((0..k).map(|mu| s.mean(mu).into()));
        if n == 2 {
            row.push(s.kappa().into());
        }
        if n == 2 && k == 1 {
            let (k1, k2) = s.principal().map_err(numerical("geometry/principal"))?;
            row.extend([k1.into(), k2.into()]);
        }
        min_det = min_det.min(s.det_g);
        table.push(row);
    }
    let mut r = ResidualReport::new().with_grid(&job.grid);
    r.record("nodes", states.len() as f64).record("min_det_g", min_det);
    Ok(Outcome {
        tables: vec![table.encode("fields", cfg.format)?],
        residuals: provenance(r, cfg, &job.chart),
        ..Outcome::default()
    })
}

fn verify(job: &ChartJob, cfg: &RunConfig) -> Result<Outcome, CliError> {
    let states = sample_geometry(&job.chart, &job.grid, cfg.jet_mode()).map_err(numerical("geometry/sample_geometry"))?;
    let tol = cfg.resolved_tolerance();
    let higher = job.chart.codim() > 1;
    let r = if higher { gcr_residual(&states, tol) } else { gauss_codazzi_residual(&states, tol) };
    let mut cols = coord_columns(job.chart.dim_domain());
    cols.extend(["metric_compatibility", "gauss", "codazzi"].map(String::from));
    if higher {
        cols.push("ricci".into());
    }
    let mut table = Table::new(cols);
    for s in &states {
        let mut row: Vec<Cell> = s.point.iter().map(|&x| x.into()).collect();
        row.extend([metric_compatibility_residual(s), gauss_residual(s), codazzi_residual(s)].map(Cell::from));
        if higher {
            row.push(ricci_residual(s).into());
        }
        table.push(row);
    }
    Ok(Outcome {
        tables: vec![table.encode("residuals", cfg.format)?],
        residuals: provenance(r.with_grid(&job.grid), cfg, &job.chart),
        ..Outcome::default()
    })
}

fn fluid(job: &ChartJob, cfg: &RunConfig) -> Result<Outcome, CliError> {
    let f = &cfg.fluid;
    let fc = FluidConfig {
        orientation: f.orientation,
        root: f.root,
        flux: f.flux,
        jets: cfg.jet_mode(),
        t_max: f.t_max,
        dt: f.dt,
        resample: f.resample,
        seeds: f.seeds.as_ref().map(|s| s.iter().map(|s| (s.point.clone(), s.rho)).collect()),
    };
    let sol = assemble_fluid(&job.chart, &job.grid, &fc).map_err(numerical("fluid2d/assemble_fluid"))?;
    let mut r = stress_identities(&sol.states, &sol.local);
    r.merge(euler_residual(&sol));
    let cols = ["x1", "x2", "rho", "v1", "v2", "p", "f11", "f12", "f22", "case_label"];
    let mut table = Table::new(cols.map(String::from).to_vec());
    for nd in &sol.nodes {
        let mut row: Vec<Cell> = vec![nd.point[0].into(), nd.point[1].into(), nd.rho.into()];
        row.extend([nd.v_lower[0], nd.v_lower[1], nd.p, nd.f[0], nd.f[1], nd.f[3]].map(Cell::from));
        row.push(nd.case.as_str().into());
        table.push(row);
    }
    let mut sections = Map::new();
    sections.insert(
        "inflow".into(),
        json!({ "axis": sol.inflow.axis, "value": sol.inflow.value, "seeds": sol.inflow.seeds.len() }),
    );
    Ok(Outcome {
        tables: vec![table.encode("fluid", cfg.format)?],
        residuals: provenance(r, cfg, &job.chart),
        sections,
        ..Outcome::default()
    })
}

fn root_match(m: RootMatch) -> &'static str {
    match m {
        RootMatch::Lower => "lower",
        RootMatch::Upper => "upper",
        RootMatch::Both => "both",
        RootMatch::Neither => "neither",
    }
}

fn multid(job: &ChartJob, cfg: &RunConfig) -> Result<Outcome, CliError> {
    let m = &cfg.multid;
    let n = job.chart.dim_domain();
    let states = sample_geometry(&job.chart, &job.grid, cfg.jet_mode()).map_err(numerical("geometry/sample_geometry"))?;
    let mut r = gcr_residual(&states, cfg.resolved_tolerance());
    let geoms = states
        .into_iter()
        .map(|s| higher_geometry(s, m.normal_index))
        .collect::<isoflow::Result<Vec<_>>>()
        .map_err(numerical("multid/higher_geometry"))?;
    r.record("balance", balance_residual_grid(&job.grid, &geoms));
    let reports: Vec<_> = geoms.iter().map(|h| consistency_check(h, m.form)).collect();
    let mut cols = coord_columns(n);
    cols.extend(["pass", "common_lambda", "spread", "p_lower", "p_upper", "discriminant", "matched_root"].map(String::from));
    let mut table = Table::new(cols);
    for (h, c) in geoms.iter().zip(&reports) {
        let mut row: Vec<Cell> = h.state.point.iter().map(|&x| x.into()).collect();
        let nan = f64::NAN;
        row.push(if c.pass { "PASS" } else { "FAIL" }.into());
        row.extend(
            [
                c.common_lambda.unwrap_or(nan),
                c.spread.unwrap_or(nan),
                c.p_roots.map_or(nan, |p| p.0),
                c.p_roots.map_or(nan, |p| p.1),
                c.discriminant.unwrap_or(nan),
            ]
            .map(Cell::from),
        );
        row.push(root_match(c.matched_root).into());
        table.push(row);
    }
    let failing = reports.iter().filter(|c| !c.pass).count();
    r.record("consistent_nodes", (reports.len() - failing) as f64);
    let mut out = Outcome { tables: vec![table.encode("consistency", cfg.format)?], ..Outcome::default() };
    if failing > 0 {
        out.failures.push(format!("multid/consistency_check: {failing} of {} nodes fail", reports.len()));
    } else if m.fluid {
        let nc = NdConfig {
            distinguished: m.normal_index,
            jets: cfg.jet_mode(),
            form: m.form,
            prefer: m.prefer,
            t_max: m.t_max,
            dt: m.dt,
            div_h: m.div_h,
        };
        let sol = fluid_nd(&job.chart, &job.grid, &nc).map_err(numerical("multid/fluid_nd"))?;
        r.merge(nd_residual(&sol));
        let mut cols = coord_columns(n);
        cols.push("rho".into());
        cols.extend((1..=n).map(|i| format!("v{i}")));
        let mut t = Table::new(cols);
        for nd in &sol.nodes {
            let mut row: Vec<Cell> = nd.point.iter().map(|&x| x.into()).collect();
            row.push(nd.rho.into());
            row.extend(nd.v_upper.iter().map(|&v| v.into()));
            t.push(row);
        }
        out.tables.push(t.encode("fluid", cfg.format)?);
    }
    out.sections.insert("consistency".into(), serde_json::to_value(&reports).expect("reports serialize"));
    out.residuals = provenance(r.with_grid(&job.grid), cfg, &job.chart)
        .provenance("distinguished_normal", m.normal_index.to_string());
    Ok(out)
}

fn renorm(job: &RenormJob, cfg: &RunConfig) -> Result<Outcome, CliError> {
    let (report, imported) = match job {
        RenormJob::Synthetic(rc) => (run_renorm(rc).map_err(numerical("renorm/run_renorm"))?, false),
        RenormJob::Imported { stages, cfg: rc } => (
            renorm_from_samples(stages, rc.shape, rc.dictionary.as_deref()).map_err(numerical("renorm/renorm_from_samples"))?,
            true,
        ),
    };
    // finite-difference checks on imported data are only as good as the sampling
    let gauss_tol = cfg.renorm.gauss_tolerance.unwrap_or(if imported { 1e-2 } else { 1e-9 });
    let codazzi_tol = cfg.renorm.codazzi_tolerance.unwrap_or(if imported { 2e-2 } else { 1e-7 });
    let mut r = ResidualReport::new().provenance("source", if imported { "import" } else { "synthetic" });
    let worst = |f: fn(&isoflow::renorm::StageChecks) -> f64| report.stages.iter().map(|s| f(&s.checks)).fold(0.0, f64::max);
    r.check("gauss_renormalized", worst(|c| c.gauss), gauss_tol);
    r.check("codazzi_relative", worst(|c| c.codazzi_relative), codazzi_tol);
    r.record("q_bound", worst(|c| c.q_bound));
    let mut out = Outcome { tables: renorm_tables(&report, cfg)?, residuals: r, ..Outcome::default() };
    match &report.claims.verdict {
        Verdict::Fail { field } if field == "h_bound" => out
            .failures
            .push("renorm/verify_vanishing_claims: renormalized second fundamental form exceeds its bound".into()),
        Verdict::Fail { field } => out
            .failures
            .push(format!("renorm/verify_vanishing_claims: `{field}` does not decay under renormalization")),
        Verdict::Pass | Verdict::NotApplicable => {}
    }
    out.sections.insert("renorm".into(), serde_json::to_value(&report).expect("report serializes"));
    Ok(out)
}

fn renorm_tables(report: &RenormReport, cfg: &RunConfig) -> Result<Vec<Artifact>, CliError> {
    let cols = [
        "stage", "eta", "c2_sup", "delta_sup", "delta_mean", "h_sup", "metric_max_eig", "gauss", "codazzi",
        "codazzi_relative", "q_bound",
    ];
    let mut stages = Table::new(cols.map(String::from).to_vec());
    let mut cols = vec!["stage".to_string(), "phi".to_string()];
    cols.extend(COMPONENT_NAMES.iter().map(|c| c.to_string()));
    let mut pairings = Table::new(cols);
    for s in &report.stages {
        let (m, c) = (&s.measure, &s.checks);
        let mut row = vec![Cell::Int(s.stage as u64)];
        row.extend(
            [
                m.eta, m.c2_sup, m.delta_sup, m.delta_mean, m.h_sup, m.metric_max_eig, c.gauss, c.codazzi,
                c.codazzi_relative, c.q_bound,
            ]
            .map(Cell::from),
        );
        stages.push(row);
        for (phi, values) in s.pairings.iter().enumerate() {
            let mut row = vec![Cell::Int(s.stage as u64), Cell::Int(phi as u64)];
            row.extend(values.iter().map(|&v| Cell::from(v)));
            pairings.push(row);
        }
    }
    Ok(vec![stages.encode("stages", cfg.format)?, pairings.encode("pairings", cfg.format)?])
}
