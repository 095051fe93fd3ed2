//! Synthetic short embeddings of the flat unit torus built by stacking
//! normal corrugations on a scaled geometric torus.

use serde::{Deserialize, Serialize};

use crate::chart::Chart;
use crate::error::{Error, Result};
use crate::jet::Jet;

/// One corrugation `(a/(2πλ)) ν₀ sin(2πλ x_axis)`; its slope amplitude is `a`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub slope: f64,
    pub freq: f64,
    pub axis: usize,
}

/// Amplitude and frequency schedules for stages `q = 1..=Q`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schedule {
    pub amplitudes: Vec<f64>,
    pub frequencies: Vec<f64>,
}

impl Schedule {
    /// `a_q = a₁ r_a^{q−1}`, `λ_q = λ₁ r_λ^{q−1}`.
    pub fn geometric(stages: usize, a1: f64, ratio_a: f64, lambda1: f64, ratio_lambda: f64) -> Self {
        Schedule {
            amplitudes: (0..stages).map(|q| a1 * ratio_a.powi(q as i32)).collect(),
            frequencies: (0..stages).map(|q| lambda1 * ratio_lambda.powi(q as i32)).collect(),
        }
    }

    /// `a_q = 2^{−q}`, `λ_q = 4^q`.
    pub fn dyadic(stages: usize) -> Self {
        Self::geometric(stages, 0.5, 0.5, 4.0, 4.0)
    }

    pub fn stages(&self) -> usize {
        self.amplitudes.len()
    }

    /// Layers in stage order with directions alternating `e₁, e₂, e₁, …`.
    pub fn layers(&self) -> Vec<Layer> {
        self.amplitudes
            .iter()
            .zip(&self.frequencies)
            .enumerate()
            .map(|(q, (&slope, &freq))| Layer { slope, freq, axis: q % 2 })
            .collect()
    }

    /// Checks the schedule against the base torus `(a, c)`.
    ///
    /// Frequencies must be increasing integers (periodicity), slopes
    /// nonnegative with `a_q λ_q` nondecreasing (growing curvature),
    /// `Σ a_q/λ_q` small against the base curvature radii (immersion), and the
    /// summed squared slopes per axis must fit under the metric deficit of
    /// the base.
    pub fn validate(&self, base_a: f64, base_c: f64) -> Result<()> {
        let bad = |m: String| Err(Error::ScheduleViolation(m));
        if self.amplitudes.len() != self.frequencies.len() {
            return bad("amplitude and frequency schedules differ in length".into());
        }
        if !(base_a > 0.0 && base_c > base_a && base_a + base_c < 1.0) {
            return bad(format!("base torus needs 0 < a < c and a + c < 1, got a = {base_a}, c = {base_c}"));
        }
        let mut prev_freq = 0.0;
        let mut prev_growth = 0.0;
        for (q, (&a, &l)) in self.amplitudes.iter().zip(&self.frequencies).enumerate() {
            if !(a.is_finite() && a >= 0.0) {
                return bad(format!("stage {}: amplitude {a} must be finite and nonnegative", q + 1));
            }
            if !(l >= 1.0 && l.fract() == 0.0 && l > prev_freq) {
                return bad(format!("stage {}: frequency {l} must be an integer above {prev_freq}", q + 1));
            }
            if a > 0.0 && a * l < prev_growth {
                return bad(format!("stage {}: a·λ = {} decreases", q + 1, a * l));
            }
            prev_freq = l;
            if a > 0.0 {
                prev_growth = a * l;
            }
        }
        // ∂_i ν₀ is parallel to ∂_i u₀ with ratio at most 1/a or 1/(c − a), so
        // the tangential parts of the corrugations cannot cancel the base tangents
        let fold: f64 = self.layers().iter().map(|l| l.slope / l.freq).sum::<f64>()
            * (1.0 / base_a).max(1.0 / (base_c - base_a));
        if fold >= 1.0 {
            return bad(format!("Σ a/λ times the base curvature is {fold:.3}; corrugations may fold the surface"));
        }
        let deficit = [1.0 - (base_a + base_c).powi(2), 1.0 - base_a * base_a];
        for axis in 0..2 {
            let used: f64 = self.layers().iter().filter(|l| l.axis == axis).map(|l| l.slope * l.slope).sum();
            if used >= deficit[axis] {
                return bad(format!(
                    "squared slopes along axis {} sum to {used:.4}, exceeding the metric deficit {:.4}",
                    axis + 1,
                    deficit[axis]
                ));
            }
        }
        Ok(())
    }
}

/// `u(x) = y(2πx)/(2π) + Σ_layers (a/(2πλ)) ν₀(x) sin(2πλ x_axis)` with `y` the
/// geometric torus `(a, c)` and `ν₀` its outward unit normal.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorrugatedTorus {
    pub base_a: f64,
    pub base_c: f64,
    pub layers: Vec<Layer>,
}

impl CorrugatedTorus {
    pub fn new(base_a: f64, base_c: f64, layers: Vec<Layer>) -> Self {
        CorrugatedTorus { base_a, base_c, layers }
    }

    /// Highest corrugation frequency, or 1 for the bare base.
    pub fn finest_frequency(&self) -> f64 {
        self.layers.iter().filter(|l| l.slope != 0.0).map(|l| l.freq).fold(1.0, f64::max)
    }
}

impl Chart<f64> for CorrugatedTorus {
    fn name(&self) -> String {
        "corrugated_torus".into()
    }

    fn dim_domain(&self) -> usize {
        2
    }

    fn dim_ambient(&self) -> usize {
        3
    }

    fn periods(&self) -> Vec<Option<f64>> {
        vec![Some(1.0), Some(1.0)]
    }

    fn bounds(&self) -> Vec<Option<(f64, f64)>> {
        vec![None, None]
    }

    fn embed(&self, x: &[Jet<f64>]) -> Vec<Jet<f64>> {
        let tau = std::f64::consts::TAU;
        let t1 = x[0] * tau;
        let t2 = x[1] * tau;
        let (c1, s1, c2, s2) = (t1.cos(), t1.sin(), t2.cos(), t2.sin());
        let ring = c2 * self.base_a + self.base_c;
        let mut u = vec![ring * c1 / tau, ring * s1 / tau, s2 * (self.base_a / tau)];
        let normal = [c1 * c2, s1 * c2, s2];
        for layer in &self.layers {
            if layer.slope == 0.0 {
                continue;
            }
            let wave = (x[layer.axis] * (tau * layer.freq)).sin() * (layer.slope / (tau * layer.freq));
            for (ui, ni) in u.iter_mut().zip(&normal) {
                *ui += *ni * wave;
            }
        }
        u
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::eval_jet;

    #[test]
    fn dyadic_schedule_is_valid() {
        let s = Schedule::dyadic(8);
        assert_eq!(s.frequencies[7], 65536.0);
        assert_eq!(s.amplitudes[0], 0.5);
        s.validate(0.2, 0.4).unwrap();
        let layers = s.layers();
        assert_eq!((layers[0].axis, layers[1].axis), (0, 1));
    }

    #[test]
    fn schedule_violations() {
        let mut s = Schedule::dyadic(3);
        s.frequencies[1] = 2.5;
        assert!(matches!(s.validate(0.2, 0.4), Err(Error::ScheduleViolation(_))));
        let wide = Schedule::geometric(3, 0.9, 1.0, 2.0, 2.0);
        assert!(wide.validate(0.2, 0.4).is_err());
        assert!(Schedule::dyadic(2).validate(0.4, 0.2).is_err());
        let folding = Schedule { amplitudes: vec![0.3, 0.2], frequencies: vec![2.0, 3.0] };
        assert!(folding.validate(0.2, 0.4).is_err());
    }

    #[test]
    fn base_is_short_and_periodic() {
        let u = CorrugatedTorus::new(0.2, 0.4, Schedule::dyadic(3).layers());
        let a = eval_jet(&u, &[0.13, 0.71]).unwrap();
        let b = eval_jet(&u, &[1.13, -0.29]).unwrap();
        for i in 0..3 {
            assert!((a.value()[i] - b.value()[i]).abs() < 1e-12);
        }
        let d1 = a.d1(0);
        let d2 = a.d1(1);
        let g11: f64 = d1.iter().map(|v| v * v).sum();
        let g22: f64 = d2.iter().map(|v| v * v).sum();
        assert!(g11 < 1.0 && g22 < 1.0);
    }
}
