//! Acceptance run: one PASS/FAIL line per criterion.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use isoflow::chart::builtin_chart;
use isoflow::fluid2d::{assemble_fluid, euler_residual, pressure_select, stress_identities, surface_stress, FluidConfig, Orientation, Root};
use isoflow::geometry::{gauss_codazzi_residual, geometry_differenced};
use isoflow::grid::sample_geometry;
use isoflow::multid::{consistency_check, gcr_residual, higher_geometry, matched_pressure, pressure_roots_nd, sample_higher, QuadraticForm};
use isoflow::renorm::limit::{branch_swap, limit_fluid, limit_point, limit_residual, LimitField};
use isoflow::renorm::{run_renorm, RenormConfig, Verdict, DECAY_FRACTION};
use isoflow::{geometry_at, Chart, Grid64, JetMode};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn sup(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, |m, v| if v.is_nan() { f64::NAN } else { m.max(v.abs()) })
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Gauss curvature from central differences of plain embedding values,
/// independent of the jet machinery.
fn brute_force_kappa(chart: &dyn Chart<f64>, x: [f64; 2]) -> f64 {
    let h = 1e-4;
    let y = |d1: f64, d2: f64| -> [f64; 3] {
        let v = chart.value(&[x[0] + d1, x[1] + d2]);
        [v[0], v[1], v[2]]
    };
    let comb = |terms: &[(f64, [f64; 3])]| {
        let mut out = [0.0; 3];
        for (c, v) in terms {
            for k in 0..3 {
                out[k] += c * v[k];
            }
        }
        out
    };
    let c = y(0.0, 0.0);
    let y1 = comb(&[(0.5 / h, y(h, 0.0)), (-0.5 / h, y(-h, 0.0))]);
    let y2 = comb(&[(0.5 / h, y(0.0, h)), (-0.5 / h, y(0.0, -h))]);
    let y11 = comb(&[(1.0 / (h * h), y(h, 0.0)), (-2.0 / (h * h), c), (1.0 / (h * h), y(-h, 0.0))]);
    let y22 = comb(&[(1.0 / (h * h), y(0.0, h)), (-2.0 / (h * h), c), (1.0 / (h * h), y(0.0, -h))]);
    let q = 0.25 / (h * h);
    let y12 = comb(&[(q, y(h, h)), (-q, y(h, -h)), (-q, y(-h, h)), (q, y(-h, -h))]);
    let n = cross(y1, y2);
    let len = dot(n, n).sqrt();
    let n = [n[0] / len, n[1] / len, n[2] / len];
    let (e, f, g) = (dot(y1, y1), dot(y1, y2), dot(y2, y2));
    let (l, m, nn) = (dot(y11, n), dot(y12, n), dot(y22, n));
    (l * nn - m * m) / (e * g - f * f)
}

fn geometry_oracles() -> Outcome {
    let mut worst_sphere = 0.0f64;
    for r in [1.0, 2.0] {
        let c = builtin_chart::<f64>("sphere", &[r]).unwrap();
        let grid = Grid64::for_chart(&c, vec![64, 64], &[None, Some((-1.5, 1.5))]).unwrap();
        let states = sample_geometry(&c, &grid, JetMode::Analytic).map_err(|e| e.to_string())?;
        let err = sup(states.iter().map(|s| s.kappa() - 1.0 / (r * r)));
        ensure(err < 1e-9, || format!("sphere r = {r}: |κ − 1/r²| = {err:e}"))?;
        worst_sphere = worst_sphere.max(err);
    }
    let torus = builtin_chart::<f64>("geometric_torus", &[1.0, 2.0]).unwrap();
    let closed = |x2: f64| x2.cos() / (2.0 + x2.cos());
    let mut oracle = 0.0f64;
    for x in [[0.3, 0.2], [1.7, 2.9], [4.0, -1.1], [5.5, 1.6]] {
        oracle = oracle.max((brute_force_kappa(&torus, x) - closed(x[1])).abs());
    }
    ensure(oracle < 1e-5, || format!("brute-force oracle disagrees with the closed form by {oracle:e}"))?;
    let grid = Grid64::for_chart(&torus, vec![64, 64], &[]).unwrap();
    let states = sample_geometry(&torus, &grid, JetMode::Analytic).map_err(|e| e.to_string())?;
    let err = sup(states.iter().map(|s| s.kappa() - closed(s.point[1])));
    ensure(err < 1e-8, || format!("torus: |κ − cos x₂/(2 + cos x₂)| = {err:e}"))?;
    Ok(format!("sphere {worst_sphere:.1e}, torus {err:.1e}, oracle gap {oracle:.1e}"))
}

fn structure_equations() -> Outcome {
    let surfaces: [(&str, Vec<f64>, Option<(f64, f64)>); 4] = [
        ("sphere", vec![1.5], Some((-1.4, 1.4))),
        ("geometric_torus", vec![1.0, 2.0], None),
        ("cylinder", vec![0.7], Some((-1.0, 1.0))),
        ("graph", vec![2.0, 1.0, 0.4, 0.15], Some((-1.0, 1.0))),
    ];
    let (mut analytic, mut fd, mut ratios) = (0.0f64, 0.0f64, Vec::new());
    for (name, p, range) in &surfaces {
        let c = builtin_chart::<f64>(name, p).unwrap();
        let ranges = if *name == "graph" { vec![*range, *range] } else { vec![None, *range] };
        let grid = Grid64::for_chart(&c, vec![32, 32], &ranges).unwrap();
        for (mode, tol, worst) in [(JetMode::Analytic, 1e-8, &mut analytic), (JetMode::FiniteDifference(1e-3), 1e-4, &mut fd)] {
            let states = sample_geometry(&c, &grid, mode).map_err(|e| e.to_string())?;
            let rep = gauss_codazzi_residual(&states, tol);
            ensure(rep.all_pass(), || format!("{name} {mode:?}: {:?}", rep.failures()))?;
            *worst = worst.max(sup(rep.residuals.iter().map(|e| e.value)));
        }
        let pts = [[0.3, 0.2], [1.1, -0.6], [-0.4, 0.9], [2.0, 0.05]];
        let errs: Vec<f64> = [0.04, 0.02, 0.01]
            .iter()
            .map(|&h| {
                let states: Vec<_> = pts.iter().map(|x| geometry_differenced(&c, x, h, JetMode::Analytic).unwrap()).collect();
                sup(gauss_codazzi_residual(&states, f64::INFINITY).residuals.iter().map(|e| e.value))
            })
            .collect();
        if errs[0] < 1e-10 {
            // fields differenced exactly: nothing to refine
            continue;
        }
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            ensure((ratio - 4.0).abs() < 0.8, || format!("{name}: refinement ratio {ratio:.3}"))?;
            ratios.push(ratio);
        }
    }
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(0.0, f64::max);
    Ok(format!("analytic {analytic:.1e}, fd {fd:.1e}, ratios {lo:.2}..{hi:.2}"))
}

fn stress_identity_suite() -> Outcome {
    let mut worst = [0.0f64; 3];
    for (name, p, ranges) in [
        ("geometric_torus", vec![1.0, 2.0], vec![None, None]),
        ("sphere", vec![2.0], vec![None, Some((-1.4, 1.4))]),
        ("graph", vec![2.0, 1.0, 0.4, 0.15], vec![Some((-1.0, 1.0)), Some((-1.0, 1.0))]),
    ] {
        let c = builtin_chart::<f64>(name, &p).unwrap();
        let grid = Grid64::for_chart(&c, vec![64, 64], &ranges).unwrap();
        let states = sample_geometry(&c, &grid, JetMode::Analytic).map_err(|e| e.to_string())?;
        let local = states
            .iter()
            .map(|s| surface_stress(s, Orientation::Chart, Root::Lower))
            .collect::<isoflow::Result<Vec<_>>>()
            .map_err(|e| e.to_string())?;
        let rep = stress_identities(&states, &local);
        ensure(rep.all_pass(), || format!("{name}: {:?}", rep.failures()))?;
        for (w, key) in worst.iter_mut().zip(["gauss_via_stress", "pressure_quadratic", "rank_one_f"]) {
            *w = w.max(rep.get(key).unwrap());
        }
    }
    Ok(format!("det P {:.1e}, quadratic {:.1e}, det(g⁻¹f) {:.1e}", worst[0], worst[1], worst[2]))
}

fn torus_outer_band() -> Outcome {
    let c = builtin_chart::<f64>("geometric_torus", &[1.0, 2.0]).unwrap();
    let edge = 0.1f64.acos();
    let run = |m: usize| {
        let grid = Grid64::for_chart(&c, vec![m, m], &[None, Some((-edge, edge))]).unwrap();
        let sol = assemble_fluid(&c, &grid, &FluidConfig::default()).map_err(|e| e.to_string())?;
        Ok::<_, String>((euler_residual(&sol), sol))
    };
    let (r32, _) = run(32)?;
    let (r64, sol) = run(64)?;
    ensure(r64.all_pass(), || format!("{:?}", r64.failures()))?;
    let momentum = r64.get("momentum_analytic").unwrap();
    let (c32, c64) = (r32.get("continuity").unwrap(), r64.get("continuity").unwrap());
    ensure(momentum < 1e-8, || format!("momentum {momentum:e}"))?;
    ensure(c64 < 5e-3, || format!("continuity {c64:e} at 64×64"))?;
    ensure((c32 / c64 - 4.0).abs() < 0.8, || format!("continuity ratio {:.3}", c32 / c64))?;
    let rho_ok = sol.paths.iter().flat_map(|p| &p.rho_along).all(|&r| r > 0.0) && sol.nodes.iter().all(|n| n.defined && n.rho > 0.0);
    ensure(rho_ok, || "non-positive density on a characteristic".into())?;
    Ok(format!("momentum {momentum:.1e}, continuity {c64:.2e} (ratio {:.2})", c32 / c64))
}

fn static_sphere() -> Outcome {
    let mut worst = 0.0f64;
    for r in [1.0, 2.0] {
        let c = builtin_chart::<f64>("sphere", &[r]).unwrap();
        let grid = Grid64::for_chart(&c, vec![32, 32], &[None, Some((-1.4, 1.4))]).unwrap();
        let sol = assemble_fluid(&c, &grid, &FluidConfig::default()).map_err(|e| e.to_string())?;
        let p0 = sol.nodes[0].p;
        for n in &sol.nodes {
            ensure(n.f.iter().chain(&n.v_lower).all(|v| v.abs() < 1e-12), || format!("r = {r}: f or v nonzero at {:?}", n.point))?;
            ensure((n.p - p0).abs() < 1e-12 && (n.p.abs() - 1.0 / r).abs() < 1e-12, || format!("r = {r}: p = {}", n.p))?;
        }
        let rep = euler_residual(&sol);
        for key in ["continuity", "momentum_grid", "momentum_analytic"] {
            let v = rep.get(key).unwrap();
            ensure(v < 1e-10, || format!("r = {r}: {key} {v:e}"))?;
            worst = worst.max(v);
        }
    }
    Ok(format!("f = v = 0, |p| = 1/r, residuals ≤ {worst:.1e}"))
}

fn renormalization_trend() -> Outcome {
    let start = Instant::now();
    let report = run_renorm(&RenormConfig::default()).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 300.0, || format!("took {secs:.0} s"))?;
    let eta = report.eta();
    let (dsup, dmean) = report.delta();
    ensure(eta.len() == 9, || format!("{} stages", eta.len()))?;
    for q in 1..eta.len() {
        // 5% slack for the sampled sup
        ensure(eta[q] >= 0.95 * eta[q - 1], || format!("η drops at q = {q}: {eta:?}"))?;
        ensure(dsup[q] <= 1.05 * dsup[q - 1] && dmean[q] <= 1.05 * dmean[q - 1], || format!("δ grows at q = {q}"))?;
    }
    let gauss = sup(report.stages.iter().map(|s| s.checks.gauss));
    ensure(gauss < 1e-9, || format!("renormalized Gauss residual {gauss:e}"))?;
    let mut worst_ratio = 0.0f64;
    for f in &report.claims.fields {
        for t in &f.trends {
            ensure(t.ratio <= DECAY_FRACTION && t.slope < 0.0, || format!("{} Φ{}: ratio {:.3}, slope {:.3}", f.field, t.phi, t.ratio, t.slope))?;
            worst_ratio = worst_ratio.max(t.ratio);
        }
    }
    ensure(report.claims.verdict == Verdict::Pass, || format!("{:?}", report.claims.verdict))?;
    Ok(format!(
        "η {:.2} → {:.0}, δ sup {:.3} → {:.3}, worst ratio {worst_ratio:.3}, Gauss {gauss:.1e}, {secs:.0} s",
        eta[0], eta[8], dsup[0], dsup[8]
    ))
}

fn limit_fluid_fixtures() -> Outcome {
    let grid = Grid64::new(vec![32, 32], vec![(0.0, 1.0), (0.0, 1.0)], vec![true, true]).unwrap();
    let mut momentum = 0.0f64;
    for w in [[1.0, 2.0], [0.5, -1.5], [3.0, 0.25]] {
        for sign in [1.0, -1.0] {
            let h = [sign * w[0] * w[0], sign * w[0] * w[1], sign * w[0] * w[1], sign * w[1] * w[1]];
            let field = move |_: &[f64]| h;
            let src = LimitField { hbar: field, periods: [Some(1.0), Some(1.0)] };
            let sol = limit_fluid(&src, &grid, 10.0, 0.05).map_err(|e| e.to_string())?;
            let hbar = vec![h; grid.len()];
            let rep = limit_residual(&sol, &hbar, 1e-8).map_err(|e| e.to_string())?;
            ensure(rep.all_pass(), || format!("w = {w:?}, sign {sign}: {:?}", rep.failures()))?;
            momentum = momentum.max(rep.get("momentum").unwrap_or(0.0));
            let (a, b) = (limit_point(h).map_err(|e| e.to_string())?, limit_point(branch_swap(h)).map_err(|e| e.to_string())?);
            let gap = sup(a.momentum.iter().zip(&b.momentum).map(|(x, y)| x - y));
            ensure(gap < 1e-10, || format!("branch swap changes ρv⊗v by {gap:e}"))?;
        }
    }
    Ok(format!("momentum ≤ {momentum:.1e}, branch swap exact"))
}

fn higher_dimension() -> Outcome {
    let c = builtin_chart::<f64>("clifford_torus", &[1.0]).unwrap();
    let grid = Grid64::for_chart(&c, vec![48, 48], &[]).unwrap();
    let states = sample_geometry(&c, &grid, JetMode::Analytic).map_err(|e| e.to_string())?;
    let rep = gcr_residual(&states, 1e-8);
    ensure(rep.all_pass() && rep.get("ricci").is_some(), || format!("{:?}", rep.failures()))?;
    let riemann = rep.get("riemann_sup").unwrap();
    ensure(riemann < 1e-9, || format!("Clifford torus R = {riemann:e}"))?;
    let mut spread = 0.0f64;
    let mut root_gap = 0.0f64;
    for n in [2usize, 3] {
        let s = builtin_chart::<f64>("round_sphere_nd", &[n as f64, 1.0]).unwrap();
        let mut ranges = vec![None];
        ranges.extend(std::iter::repeat(Some((-1.2, 1.2))).take(n - 1));
        let grid = Grid64::for_chart(&s, vec![8; n], &ranges).unwrap();
        for h in sample_higher(&s, &grid, JetMode::Analytic, 0).map_err(|e| e.to_string())? {
            let rep = consistency_check(&h, QuadraticForm::Derived);
            ensure(rep.pass, || format!("S^{n}: consistency fails at {:?}", h.state.point))?;
            spread = spread.max(rep.spread.unwrap());
            let lambda = rep.common_lambda.unwrap();
            let (lo, hi) = rep.p_roots.unwrap();
            let gap = (h.mean() - lo - lambda).abs().min((h.mean() - hi - lambda).abs());
            root_gap = root_gap.max(gap);
        }
    }
    ensure(spread < 1e-9, || format!("eigenvalue spread {spread:e}"))?;
    ensure(root_gap < 1e-8, || format!("no root matches λ = 𝔪 − p: gap {root_gap:e}"))?;
    // two-dimensional reduction on a surface with distinct principal curvatures
    let torus = builtin_chart::<f64>("geometric_torus", &[1.0, 2.0]).unwrap();
    let mut reduction = 0.0f64;
    for x in [[0.2, 0.4], [1.0, -2.0], [3.0, 2.9], [5.0, 1.2]] {
        let s = geometry_at(&torus, &x, JetMode::Analytic).map_err(|e| e.to_string())?;
        let (k1, k2) = s.principal().map_err(|e| e.to_string())?;
        let h = higher_geometry(s, 0).map_err(|e| e.to_string())?;
        let roots = pressure_roots_nd(h.mean(), h.scal, h.s, 2, QuadraticForm::Derived).map_err(|e| e.to_string())?;
        let p = matched_pressure(&consistency_check(&h, QuadraticForm::Derived), Root::Lower).ok_or("no matched pressure")?;
        let p2 = pressure_select(k1, k2, Orientation::Chart, Root::Lower).map_err(|e| e.to_string())?.p;
        reduction = reduction.max((roots.lower - k2).abs()).max((p - p2).abs());
    }
    ensure(reduction < 1e-12, || format!("n = 2 reduction differs from p = κ₂ by {reduction:e}"))?;
    Ok(format!("Clifford R {riemann:.1e}, spread {spread:.1e}, root gap {root_gap:.1e}, reduction {reduction:.1e}"))
}

fn determinism_and_schema() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let renorm_cfg = tmp.path().join("renorm.json");
    std::fs::write(&renorm_cfg, r#"{"renorm": {"lattice": 33, "halton": 1024, "check_points": 64, "cells": 64}}"#).map_err(|e| e.to_string())?;
    let renorm_cfg = renorm_cfg.display().to_string();
    let runs: Vec<(&str, Vec<&str>)> = vec![
        ("surface", vec!["surface", "--chart", "geometric_torus", "--grid", "16"]),
        ("surface", vec!["--format", "json", "surface", "--chart", "clifford_torus", "--grid", "8"]),
        ("verify", vec!["--jets", "fd", "verify", "--chart", "graph", "--grid", "12", "--ranges", "-1:1;-1:1"]),
        ("fluid", vec!["fluid", "--chart", "geometric_torus", "--params", "a=1,c=2", "--grid", "24", "--ranges", "full;-1.4:1.4"]),
        ("fluid", vec!["--format", "json", "fluid", "--chart", "sphere", "--grid", "12", "--ranges", "full;-1.2:1.2"]),
        ("multid", vec!["multid", "--chart", "round_sphere_nd", "--params", "n=3", "--grid", "6", "--ranges", "full;-1:1;-1:1"]),
        ("renorm", vec!["renorm", "--config", &renorm_cfg, "--Q", "3"]),
    ];
    let mut files = 0;
    for (i, (command, args)) in runs.iter().enumerate() {
        let mut first = None;
        for (rep, threads) in ["1", "2"].iter().enumerate() {
            let dir = tmp.path().join(format!("run{i}_{rep}"));
            let dir_s = dir.display().to_string();
            let mut argv = args.clone();
            argv.extend(["--threads", threads, "--out", &dir_s]);
            let out = common::isoflow(&argv);
            ensure(matches!(common::code(&out), 0 | 3), || format!("{args:?}: exit {} {}", common::code(&out), common::stderr(&out)))?;
            files += common::check_artifacts(&dir, command).map_err(|e| format!("{args:?}: {e}"))?;
            let bytes = common::read_dir(&dir);
            match &first {
                None => first = Some(bytes),
                Some(prev) => ensure(*prev == bytes, || format!("{args:?}: outputs differ between runs"))?,
            }
        }
    }
    Ok(format!("{} runs repeated byte-identically, {files} artifacts validated", runs.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("geometry oracles", geometry_oracles),
        ("Gauss-Codazzi suite", structure_equations),
        ("stress identities", stress_identity_suite),
        ("constructed Euler solution", torus_outer_band),
        ("static sphere", static_sphere),
        ("renormalization trend", renormalization_trend),
        ("limit fluid", limit_fluid_fixtures),
        ("higher dimension", higher_dimension),
        ("determinism and schema", determinism_and_schema),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(msg) => println!("criterion {} PASS  {name}: {msg} [{secs:.1} s]", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {} FAIL  {name}: {msg} [{secs:.1} s]", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
}
