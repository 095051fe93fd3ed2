//! Renormalized pointwise fields of a surface in `R³` from its 2-jet.
//!
//! With `η` the curvature scale of a stage, `h = H/η` is the renormalized
//! second fundamental form, `γ = det h / det g` its Gauss curvature and
//! `Q_ijk = Γ^l_ik h_jl − Γ^l_jk h_il` the lower-order Codazzi term.

use crate::chart::Chart;
use crate::error::{Error, Result};
use crate::jet::Jet;

/// Values and first and second derivatives of the three ambient components.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet2 {
    pub u: [f64; 3],
    /// `∂_i u` at `[i]`.
    pub du: [[f64; 3]; 2],
    /// `∂_i∂_j u` at `[i][j]`.
    pub ddu: [[[f64; 3]; 2]; 2],
}

impl Jet2 {
    pub fn from_chart(chart: &dyn Chart<f64>, x: [f64; 2]) -> Self {
        let comps = chart.embed(&Jet::seed(&x, 2));
        let mut j = Jet2 { u: [0.0; 3], du: [[0.0; 3]; 2], ddu: [[[0.0; 3]; 2]; 2] };
        for (c, comp) in comps.iter().enumerate().take(3) {
            j.u[c] = comp.value();
            for i in 0..2 {
                j.du[i][c] = comp.d1(i);
                for k in 0..2 {
                    j.ddu[i][k][c] = comp.d2(i, k);
                }
            }
        }
        j
    }

    /// Largest absolute entry among `u`, `∂u`, `∂²u`.
    pub fn c2_norm(&self) -> f64 {
        let mut m = 0.0f64;
        for c in 0..3 {
            m = m.max(self.u[c].abs());
            for i in 0..2 {
                m = m.max(self.du[i][c].abs());
                for k in 0..2 {
                    m = m.max(self.ddu[i][k][c].abs());
                }
            }
        }
        m
    }

    pub fn metric(&self) -> [f64; 4] {
        let g12 = dot3(&self.du[0], &self.du[1]);
        [dot3(&self.du[0], &self.du[0]), g12, g12, dot3(&self.du[1], &self.du[1])]
    }

    /// `max_ij |g_ij − δ_ij|`.
    pub fn isometric_defect(&self) -> f64 {
        let g = self.metric();
        (g[0] - 1.0).abs().max(g[1].abs()).max((g[3] - 1.0).abs())
    }
}

fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Renormalized fields at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointFields {
    pub g: [f64; 4],
    pub det_g: f64,
    /// `H/η`, row-major.
    pub h: [f64; 4],
    /// `det h / det g`.
    pub gamma: f64,
    /// `Γ^i_jk / η` at `[(i*2 + j)*2 + k]`.
    pub christoffel: [f64; 8],
    /// `Q_{12k}/η` for `k = 1, 2`.
    pub q: [f64; 2],
}

impl PointFields {
    pub fn new(jet: &Jet2, eta: f64) -> Result<Self> {
        let g = jet.metric();
        let det_g = g[0] * g[3] - g[1] * g[2];
        if !(det_g > 0.0) {
            return Err(Error::NotPositiveDefinite { point: vec![] });
        }
        let gi = [g[3] / det_g, -g[1] / det_g, -g[2] / det_g, g[0] / det_g];
        let d1 = &jet.du[0];
        let d2 = &jet.du[1];
        let cross = [d1[1] * d2[2] - d1[2] * d2[1], d1[2] * d2[0] - d1[0] * d2[2], d1[0] * d2[1] - d1[1] * d2[0]];
        let len = dot3(&cross, &cross).sqrt();
        let nu = [cross[0] / len, cross[1] / len, cross[2] / len];
        let mut h = [0.0; 4];
        let mut lowered = [0.0; 8];
        for i in 0..2 {
            for k in 0..2 {
                h[i * 2 + k] = dot3(&jet.ddu[i][k], &nu) / eta;
                for l in 0..2 {
                    lowered[(l * 2 + i) * 2 + k] = dot3(&jet.du[l], &jet.ddu[i][k]);
                }
            }
        }
        let mut chr = [0.0; 8];
        for i in 0..2 {
            for jk in 0..4 {
                chr[i * 4 + jk] = (gi[i * 2] * lowered[jk] + gi[i * 2 + 1] * lowered[4 + jk]) / eta;
            }
        }
        // Q_{12k} with the unscaled Γ, then divided by η once more
        let mut q = [0.0; 2];
        for (k, qk) in q.iter_mut().enumerate() {
            let mut s = 0.0;
            for l in 0..2 {
                s += chr[(l * 2) * 2 + k] * h[2 + l] - chr[(l * 2 + 1) * 2 + k] * h[l];
            }
            *qk = s;
        }
        let gamma = (h[0] * h[3] - h[1] * h[2]) / det_g;
        Ok(PointFields { g, det_g, h, gamma, christoffel: chr, q })
    }

    /// Paired components: `h11, h12, h22, γ, Q_122/η, Q_121/η` followed by
    /// the six independent `Γ^i_jk/η`.
    pub fn components(&self) -> [f64; COMPONENTS] {
        let c = &self.christoffel;
        [
            self.h[0], self.h[1], self.h[3], self.gamma, self.q[1], self.q[0], c[0], c[1], c[3], c[4], c[5], c[7],
        ]
    }

    pub fn h_sup(&self) -> f64 {
        self.h.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

pub const COMPONENTS: usize = 12;

/// Names matching [`PointFields::components`].
pub const COMPONENT_NAMES: [&str; COMPONENTS] = [
    "h11", "h12", "h22", "gamma", "q122", "q121", "chr111", "chr112", "chr122", "chr211", "chr212", "chr222",
];

/// Component groups judged by the vanishing verdicts.
pub const FIELD_GROUPS: [(&str, std::ops::Range<usize>); 3] =
    [("gamma", 3..4), ("codazzi_q", 4..6), ("christoffel", 6..12)];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::builtin_chart;
    use crate::geometry::geometry_at;
    use crate::JetMode;

    #[test]
    fn matches_full_geometry_on_torus() {
        let c = builtin_chart::<f64>("geometric_torus", &[0.5, 2.0]).unwrap();
        let x = [0.4, 1.1];
        let s = geometry_at(&c, &x, JetMode::Analytic).unwrap();
        let eta = 3.0;
        let f = PointFields::new(&Jet2::from_chart(&c, x), eta).unwrap();
        for i in 0..4 {
            assert!((f.h[i] - s.h[i] / eta).abs() < 1e-12);
            assert!((f.g[i] - s.g[i]).abs() < 1e-12);
        }
        for i in 0..8 {
            assert!((f.christoffel[i] - s.gamma[i] / eta).abs() < 1e-12);
        }
        assert!((f.gamma - s.kappa() / (eta * eta)).abs() < 1e-12);
        // Codazzi: ∂_1 H_2k − ∂_2 H_1k = Q_12k
        for k in 0..2 {
            let lhs = (s.dh_at(0, 0, 1, k) - s.dh_at(0, 1, 0, k)) / (eta * eta);
            assert!((lhs - f.q[k]).abs() < 1e-12, "{lhs} vs {}", f.q[k]);
        }
    }
}
