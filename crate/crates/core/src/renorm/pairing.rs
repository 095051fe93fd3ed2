//! Compactly supported test functions in rescaled coordinates and their
//! pairings with renormalized fields.

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Radial profile of a one-dimensional bump on `[-1, 1]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BumpShape {
    /// `exp(−1/(1−t²))`, smooth to all orders.
    #[default]
    Smooth,
    /// `(1 + cos πt)/2`, one continuous derivative; pairings against
    /// sinusoids have a closed form.
    RaisedCosine,
}

fn smooth_mass() -> f64 {
    static MASS: OnceLock<f64> = OnceLock::new();
    *MASS.get_or_init(|| {
        // the integrand is flat at ±1, so the midpoint rule converges fast
        let n = 200_000;
        let dt = 2.0 / n as f64;
        (0..n)
            .map(|i| {
                let t = -1.0 + (i as f64 + 0.5) * dt;
                (-1.0 / (1.0 - t * t)).exp()
            })
            .sum::<f64>()
            * dt
    })
}

impl BumpShape {
    /// Unit-mass profile of half-width `w` at offset `s`.
    pub fn profile(self, s: f64, w: f64) -> f64 {
        let t = s / w;
        if t.abs() >= 1.0 {
            return 0.0;
        }
        match self {
            BumpShape::Smooth => (-1.0 / (1.0 - t * t)).exp() / (w * smooth_mass()),
            BumpShape::RaisedCosine => (1.0 + (PI * t).cos()) / (2.0 * w),
        }
    }
}

/// `Φ(z) = φ(z₁ − c₁) φ(z₂ − c₂)` with unit mass, fixed in rescaled
/// coordinates `z = η x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    /// Centre in rescaled coordinates.
    pub center: [f64; 2],
    /// Half-width in rescaled units.
    pub half_width: f64,
    pub shape: BumpShape,
}

impl TestFunction {
    pub fn eval(&self, dz: [f64; 2]) -> f64 {
        self.shape.profile(dz[0], self.half_width) * self.shape.profile(dz[1], self.half_width)
    }
}

/// Relative half-widths of the default dictionary, in units of `η₀`.
pub const DICTIONARY_WIDTHS: [f64; 3] = [0.02, 0.05, 0.1];

/// Centres of the default dictionary in units of `η₀`; with the widths
/// above every support stays inside the first period cell `[0, η₀)²`.
pub const DICTIONARY_CENTERS: [[f64; 2]; 4] = [[0.3, 0.12], [0.7, 0.38], [0.2, 0.62], [0.55, 0.88]];

/// Three scales by four positions.
pub fn dictionary(eta0: f64, shape: BumpShape) -> Vec<TestFunction> {
    DICTIONARY_WIDTHS
        .iter()
        .flat_map(|&w| {
            DICTIONARY_CENTERS
                .iter()
                .map(move |c| TestFunction { center: [c[0] * eta0, c[1] * eta0], half_width: w * eta0, shape })
        })
        .collect()
}

/// Tensor trapezoid rule over the support of `phi` at curvature scale `eta`.
///
/// `field` is evaluated in original coordinates `x = z/η` and returns a fixed
/// number of components; `finest_wavelength` is the shortest oscillation in
/// `x` the integrand is expected to carry.
pub fn pair_components<const N: usize>(
    phi: &TestFunction,
    eta: f64,
    cells: usize,
    finest_wavelength: f64,
    mut field: impl FnMut([f64; 2]) -> Result<[f64; N]>,
) -> Result<[f64; N]> {
    let w = phi.half_width;
    let dz = 2.0 * w / cells as f64;
    let wavelength = eta * finest_wavelength;
    if wavelength / dz < 4.0 {
        return Err(Error::QuadratureUnderResolved { wavelength, cells: wavelength / dz });
    }
    let zc = phi.center;
    let weights: Vec<f64> = (0..=cells).map(|i| phi.shape.profile(-w + i as f64 * dz, w) * dz).collect();
    let mut acc = [0.0; N];
    for (i, wi) in weights.iter().enumerate() {
        if *wi == 0.0 {
            continue;
        }
        let x1 = (zc[0] - w + i as f64 * dz) / eta;
        for (j, wj) in weights.iter().enumerate() {
            if *wj == 0.0 {
                continue;
            }
            let x2 = (zc[1] - w + j as f64 * dz) / eta;
            let v = field([x1, x2])?;
            let wt = wi * wj;
            for (a, vi) in acc.iter_mut().zip(v) {
                *a += wt * vi;
            }
        }
    }
    Ok(acc)
}

/// Scalar convenience wrapper around [`pair_components`].
pub fn pair_scalar(
    phi: &TestFunction,
    eta: f64,
    cells: usize,
    finest_wavelength: f64,
    mut field: impl FnMut([f64; 2]) -> f64,
) -> Result<f64> {
    pair_components::<1>(phi, eta, cells, finest_wavelength, |x| Ok([field(x)])).map(|v| v[0])
}

/// Closed form of `∫ φ(s − c) sin(ω s) ds` for the unit-mass raised cosine
/// of half-width `w`.
pub fn raised_cosine_sine_integral(c: f64, w: f64, omega: f64) -> f64 {
    let alpha = PI / w;
    if (alpha - omega).abs() < 1e-9 * alpha {
        // removable singularity at ω = π/w
        return 0.5 * (omega * c).sin();
    }
    if omega == 0.0 {
        return 0.0;
    }
    (omega * c).sin() * (omega * w).sin() * alpha * alpha / (w * omega * (alpha * alpha - omega * omega))
}
