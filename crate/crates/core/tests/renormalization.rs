use std::f64::consts::TAU;

use isoflow::renorm::import::{read_stage_csv, renorm_from_samples};
use isoflow::renorm::pairing::{pair_components, pair_scalar, raised_cosine_sine_integral};
use isoflow::renorm::*;
use isoflow::{Chart, Error};

fn small_config(stages: usize) -> RenormConfig {
    RenormConfig {
        schedule: Schedule::dyadic(stages),
        lattice: 65,
        halton: 4096,
        check_points: 128,
        ..Default::default()
    }
}

#[test]
fn constant_field_pairs_to_its_value() {
    for phi in dictionary(3.7, BumpShape::Smooth) {
        for eta in [3.7, 40.0, 900.0] {
            let v = pair_scalar(&phi, eta, 256, 1.0, |_| -2.5).unwrap();
            assert!((v + 2.5).abs() < 1e-12, "{v}");
        }
    }
}

#[test]
fn riemann_lebesgue_decay_matches_closed_form() {
    let phi = TestFunction { center: [1.1, 0.45], half_width: 0.37, shape: BumpShape::RaisedCosine };
    let eta = 3.0;
    let mut last = f64::INFINITY;
    for lambda in [1.0, 4.0, 16.0, 64.0] {
        let omega = TAU * lambda / eta;
        let got = pair_scalar(&phi, eta, 512, 1.0 / lambda, |x| (TAU * lambda * x[0]).sin()).unwrap();
        let want = raised_cosine_sine_integral(phi.center[0], phi.half_width, omega);
        assert!((got - want).abs() < 1e-10, "λ = {lambda}: {got} vs {want}");
        // envelope of the closed form decays like ω⁻³
        let envelope = (phi.half_width * omega).powi(-3);
        assert!(got.abs() <= 10.0 * envelope.min(1.0));
        last = last.min(got.abs());
    }
    assert!(last < 1e-3);
}

#[test]
fn quadrature_converges_at_the_finest_stage() {
    let seq = synthetic_sequence(0.2, 0.4, &Schedule::dyadic(8)).unwrap();
    let stage = &seq[8];
    let points = measurement_points(33, 2048);
    let eta0 = measure_stage(&seq[0], &points, None).unwrap().eta;
    let eta = measure_stage(stage, &points, None).unwrap().eta;
    let dict = dictionary(eta0, BumpShape::Smooth);
    for phi in [dict[0], dict[11]] {
        let run = |cells| {
            pair_components(&phi, eta, cells, 0.5 / stage.finest_frequency(), |x| {
                Ok(PointFields::new(&Jet2::from_chart(stage, x), eta)?.components())
            })
            .unwrap()
        };
        let (a, b) = (run(256), run(512));
        for (i, (x, y)) in a.iter().zip(&b).enumerate() {
            assert!((x - y).abs() < 1e-6, "{}: {x} vs {y}", COMPONENT_NAMES[i]);
        }
    }
}

#[test]
fn eight_stage_sequence_supports_the_vanishing_claims() {
    let start = std::time::Instant::now();
    let report = run_renorm(&RenormConfig::default()).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 300.0, "took {elapsed} s");
    let eta = report.eta();
    let (dsup, dmean) = report.delta();
    for q in 1..eta.len() {
        assert!(eta[q] >= 0.95 * eta[q - 1], "η at {q}: {eta:?}");
        assert!(dsup[q] <= 1.05 * dsup[q - 1], "δ sup at {q}: {dsup:?}");
        assert!(dmean[q] <= 1.05 * dmean[q - 1], "δ mean at {q}: {dmean:?}");
    }
    // corrugations double the curvature scale per stage
    let growth = (eta[8] / eta[4]).powf(0.25);
    assert!((growth - 2.0).abs() < 0.1, "growth {growth}");
    assert!(dmean[8] < dmean[0]);
    for s in &report.stages {
        assert!(s.measure.metric_max_eig < 1.0, "stage {} not short", s.stage);
        assert!(s.checks.gauss < 1e-9, "stage {}: {:?}", s.stage, s.checks);
        assert!(s.checks.codazzi < 1e-7, "stage {}: {:?}", s.stage, s.checks);
        assert!(s.checks.q_bound < 10.0);
    }
    assert!(report.claims.h_bound);
    for f in &report.claims.fields {
        assert_eq!(f.verdict, Verdict::Pass, "{}", f.field);
        for t in &f.trends {
            assert!(t.ratio <= DECAY_FRACTION && t.slope < 0.0, "{} phi {}: {t:?}", f.field, t.phi);
        }
    }
    assert_eq!(report.claims.verdict, Verdict::Pass);
}

#[test]
fn frozen_scale_fails_the_premise() {
    let cfg = RenormConfig { freeze_eta: true, ..small_config(6) };
    let report = run_renorm(&cfg).unwrap();
    assert!(!report.claims.h_bound);
    assert_eq!(report.claims.verdict, Verdict::Fail { field: "h_bound".into() });
    let h = report.stages.last().unwrap().measure.h_sup;
    assert!(h > 100.0, "{h}");
}

#[test]
fn flat_sequence_is_not_applicable() {
    let mut cfg = small_config(6);
    cfg.schedule.amplitudes = vec![0.0; 6];
    let report = run_renorm(&cfg).unwrap();
    let eta = report.eta();
    assert!(eta.iter().all(|e| (e - eta[0]).abs() < 1e-12));
    for f in &report.claims.fields {
        assert_eq!(f.verdict, Verdict::NotApplicable, "{}", f.field);
    }
    assert_eq!(report.claims.verdict, Verdict::NotApplicable);
}

#[test]
fn invalid_schedule_is_rejected() {
    let mut cfg = small_config(3);
    cfg.schedule.frequencies = vec![4.0, 4.0, 16.0];
    assert!(matches!(run_renorm(&cfg), Err(Error::ScheduleViolation(_))));
}

fn stage_csv(chart: &dyn Chart<f64>, n: usize) -> String {
    let mut out = String::from("x1,x2,y1,y2,y3\n");
    for i in 0..n {
        for j in 0..n {
            let x = [i as f64 / n as f64, j as f64 / n as f64];
            let y = chart.value(&x);
            out += &format!("{},{},{},{},{}\n", x[0], x[1], y[0], y[1], y[2]);
        }
    }
    out
}

#[test]
fn imported_sequence_agrees_with_analytic_pipeline() {
    let schedule = Schedule { amplitudes: vec![0.3, 0.2], frequencies: vec![4.0, 6.0] };
    let seq = synthetic_sequence(0.2, 0.4, &schedule).unwrap();
    let cfg = RenormConfig { schedule, lattice: 641, halton: 0, check_points: 64, ..Default::default() };
    let analytic = run_renorm(&cfg).unwrap();
    let pairing_error = |n: usize| {
        let stages: Vec<_> = seq.iter().map(|c| read_stage_csv(stage_csv(c, n).as_bytes()).unwrap()).collect();
        let imported = renorm_from_samples(&stages, BumpShape::Smooth, None).unwrap();
        let mut err = 0.0f64;
        for (a, b) in imported.stages.iter().zip(&analytic.stages) {
            assert!((a.measure.eta - b.measure.eta).abs() < 1e-3 * b.measure.eta);
            // third derivatives come from nested differences, so these are O(h⁴) residuals
            assert!(a.checks.gauss < 1e-2 && a.checks.codazzi_relative < 2e-2, "{:?}", a.checks);
            for (pa, pb) in a.pairings.iter().zip(&b.pairings) {
                for (x, y) in pa.iter().zip(pb) {
                    err = err.max((x - y).abs() / (1.0 + y.abs()));
                }
            }
        }
        err
    };
    let (coarse, fine) = (pairing_error(320), pairing_error(640));
    assert!(coarse < 5e-2, "{coarse}");
    assert!(fine < coarse / 4.0, "{coarse} -> {fine}");
}

#[test]
fn imported_sequence_too_coarse_for_the_dictionary() {
    let seq = synthetic_sequence(0.2, 0.4, &Schedule::dyadic(2)).unwrap();
    let stages: Vec<_> = seq.iter().map(|c| read_stage_csv(stage_csv(c, 32).as_bytes()).unwrap()).collect();
    assert!(matches!(renorm_from_samples(&stages, BumpShape::Smooth, None), Err(Error::QuadratureUnderResolved { .. })));
}
