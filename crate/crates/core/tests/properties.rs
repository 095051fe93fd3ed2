use std::f64::consts::PI;

use isoflow::fluid2d::{pressure_select, surface_stress, Orientation, Root};
use isoflow::multid::higher_geometry;
use isoflow::renorm::pairing::pair_scalar;
use isoflow::renorm::{BumpShape, TestFunction};
use isoflow::{builtin_chart, geometry_at, JetMode};
use proptest::prelude::*;

fn torus_state(a: f64, c: f64, x1: f64, x2: f64) -> isoflow::GeometryState64 {
    let chart = builtin_chart::<f64>("geometric_torus", &[a, c]).unwrap();
    geometry_at(&chart, &[x1, x2], JetMode::Analytic).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn flipping_the_normal_and_the_orientation_changes_nothing(
        a in 0.2f64..1.0, c in 1.2f64..3.0, x1 in 0.0f64..2.0 * PI, x2 in -1.4f64..1.4,
    ) {
        let s = torus_state(a, c, x1, x2);
        for root in [Root::Lower, Root::Upper] {
            let direct = surface_stress(&s, Orientation::Chart, root);
            let flipped = surface_stress(&s.flipped(), Orientation::Reversed, root);
            match (direct, flipped) {
                (Ok(d), Ok(f)) => {
                    prop_assert!((d.pressure.p - f.pressure.p).abs() < 1e-12);
                    for i in 0..4 {
                        prop_assert!((d.f[i] - f.f[i]).abs() < 1e-12);
                    }
                }
                (Err(e1), Err(e2)) => prop_assert_eq!(e1, e2),
                (d, f) => prop_assert!(false, "{:?} vs {:?}", d.is_ok(), f.is_ok()),
            }
        }
    }

    #[test]
    fn pressure_solves_the_quadratic(k1 in -5.0f64..5.0, k2 in -5.0f64..5.0) {
        let (k1, k2) = if k1 >= k2 { (k1, k2) } else { (k2, k1) };
        for orientation in [Orientation::Chart, Orientation::Reversed] {
            for root in [Root::Lower, Root::Upper] {
                if let Ok(choice) = pressure_select(k1, k2, orientation, root) {
                    let (m, kappa) = (choice.k1 + choice.k2, choice.k1 * choice.k2);
                    let p = choice.p;
                    prop_assert!((p * p - m * p + kappa).abs() < 1e-12 * (1.0 + m * m + kappa.abs()));
                }
            }
        }
    }

    #[test]
    fn momentum_form_is_degenerate(a in 0.2f64..1.0, c in 1.2f64..3.0, x1 in 0.0f64..2.0 * PI, x2 in -1.4f64..1.4) {
        let s = torus_state(a, c, x1, x2);
        let st = surface_stress(&s, Orientation::Chart, Root::Lower).unwrap();
        let det_f = st.f[0] * st.f[3] - st.f[1] * st.f[2];
        let scale = st.f.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        prop_assert!((det_f / s.det_g).abs() < 1e-12 * scale * scale);
    }

    #[test]
    fn pairing_is_linear(
        alpha in -3.0f64..3.0, beta in -3.0f64..3.0, eta in 1.0f64..50.0,
        cx in 0.2f64..0.8, cy in 0.2f64..0.8, w in 0.05f64..0.2, freq in 1.0f64..8.0,
    ) {
        let phi = TestFunction { center: [cx, cy], half_width: w, shape: BumpShape::Smooth };
        let fa = |x: [f64; 2]| (2.0 * PI * freq * x[0]).sin() * x[1].cos();
        let fb = |x: [f64; 2]| 1.0 + x[0] * x[1];
        let pa = pair_scalar(&phi, eta, 64, 1.0, fa).unwrap();
        let pb = pair_scalar(&phi, eta, 64, 1.0, fb).unwrap();
        let pc = pair_scalar(&phi, eta, 64, 1.0, |x| alpha * fa(x) + beta * fb(x)).unwrap();
        prop_assert!((pc - alpha * pa - beta * pb).abs() < 1e-12 * (1.0 + pa.abs() + pb.abs()));
    }

    #[test]
    fn stress_scalars_ignore_rotations_of_the_other_normals(
        theta in 0.0f64..2.0 * PI, x1 in -0.8f64..0.8, x2 in -0.8f64..0.8,
    ) {
        let chart = builtin_chart::<f64>("graph", &[2.0, 3.0, 0.4, 0.15]).unwrap();
        let state = geometry_at(&chart, &[x1, x2], JetMode::Analytic).unwrap();
        let base = higher_geometry(state.clone(), 0).unwrap();
        // rotate normals 1 and 2 of the frame; normal 0 stays distinguished
        let mut rotated = state;
        let nn = rotated.n * rotated.n;
        let (c, s) = (theta.cos(), theta.sin());
        for ij in 0..nn {
            let (h1, h2) = (rotated.h[nn + ij], rotated.h[2 * nn + ij]);
            rotated.h[nn + ij] = c * h1 + s * h2;
            rotated.h[2 * nn + ij] = -s * h1 + c * h2;
        }
        let turned = higher_geometry(rotated, 0).unwrap();
        for (x, y) in base.l_tensor.iter().zip(&turned.l_tensor) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        prop_assert!((base.s - turned.s).abs() < 1e-12);
        prop_assert!((base.scal - turned.scal).abs() < 1e-12);
    }
}
