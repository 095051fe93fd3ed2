use isoflow::chart::builtin_chart;
use isoflow::geometry::{gauss_codazzi_residual, geometry_differenced};
use isoflow::grid::sample_geometry;
use isoflow::{Grid64, JetMode};

fn surfaces() -> Vec<(&'static str, Vec<f64>, Option<(f64, f64)>)> {
    vec![
        ("sphere", vec![1.5], Some((-1.4, 1.4))),
        ("geometric_torus", vec![1.0, 2.0], None),
        ("cylinder", vec![0.7], Some((-1.0, 1.0))),
        ("graph", vec![2.0, 1.0, 0.4, 0.15], Some((-1.0, 1.0))),
    ]
}

fn sup_residual(name: &str, p: &[f64], range: Option<(f64, f64)>, mode: JetMode<f64>, m: usize) -> f64 {
    let c = builtin_chart::<f64>(name, p).unwrap();
    let ranges = if name == "graph" { vec![range, range] } else { vec![None, range] };
    let grid = Grid64::for_chart(&c, vec![m, m], &ranges).unwrap();
    let states = sample_geometry(&c, &grid, mode).unwrap();
    let rep = gauss_codazzi_residual(&states, f64::INFINITY);
    rep.residuals.iter().map(|e| e.value).fold(0.0, f64::max)
}

#[test]
fn analytic_jets_satisfy_structure_equations() {
    for (name, p, r) in surfaces() {
        let e = sup_residual(name, &p, r, JetMode::Analytic, 24);
        assert!(e < 1e-8, "{name}: {e}");
    }
}

fn differenced_residual(name: &str, p: &[f64], h: f64, mode: JetMode<f64>) -> f64 {
    let c = builtin_chart::<f64>(name, p).unwrap();
    let pts = [[0.3, 0.2], [1.1, -0.6], [-0.4, 0.9], [2.0, 0.05]];
    let states: Vec<_> = pts.iter().map(|x| geometry_differenced(&c, x, h, mode).unwrap()).collect();
    let rep = gauss_codazzi_residual(&states, f64::INFINITY);
    rep.residuals.iter().map(|e| e.value).fold(0.0, f64::max)
}

#[test]
fn finite_difference_jets_are_consistent() {
    for (name, p, r) in surfaces() {
        let e = sup_residual(name, &p, r, JetMode::FiniteDifference(1e-3), 16);
        assert!(e < 1e-4, "{name}: {e}");
    }
}

#[test]
fn differenced_fields_converge_quadratically() {
    for (name, p, _) in surfaces() {
        for mode in [JetMode::Analytic, JetMode::FiniteDifference(1e-3)] {
            assert!(differenced_residual(name, &p, 1e-3, mode) < 1e-4, "{name}");
        }
        let errs: Vec<f64> = [0.04, 0.02, 0.01]
            .iter()
            .map(|&h| differenced_residual(name, &p, h, JetMode::Analytic))
            .collect();
        // fields that are polynomial of degree ≤ 2 along the chart axes are
        // differenced exactly; there is nothing to refine
        if errs[0] < 1e-10 {
            assert!(errs.iter().all(|e| *e < 1e-10), "{name}: errors {errs:?}");
            continue;
        }
        for w in errs.windows(2) {
            assert!((w[0] / w[1] - 4.0).abs() < 0.8, "{name}: errors {errs:?}");
        }
    }
}
