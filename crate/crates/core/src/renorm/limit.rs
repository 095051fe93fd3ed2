//! Pressureless or constant-trace Euler flows in the flat plane built from
//! a rank-one weak limit `h̄` of renormalized second fundamental forms.
//!
//! The momentum tensor is `ρ v⊗v = adj(h̄) − p I`, so that the flat Codazzi
//! equations for `h̄` are exactly the momentum balance. Rank one leaves two
//! branches: `p = 0` when `h̄ ⪰ 0` and `p = tr h̄` when `h̄ ⪯ 0`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::multid::{assemble_rank_one, NdSolution, RankOneSource};
use crate::report::ResidualReport;

/// Relative tolerance on `det h̄` and on the diagonal signs.
pub const LIMIT_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitBranch {
    /// `h̄ ⪰ 0`, `p = 0`.
    Pressureless,
    /// `h̄ ⪯ 0`, `p = h̄₁₁ + h̄₂₂`.
    NegativeTrace,
    Vacuum,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LimitPoint {
    pub p: f64,
    /// `ρ v⊗v`, row-major.
    pub momentum: [f64; 4],
    pub branch: LimitBranch,
}

/// Pressure and momentum tensor for one symmetric `h̄ = [h11, h12, h21, h22]`.
pub fn limit_point(hbar: [f64; 4]) -> Result<LimitPoint> {
    let scale = hbar.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = LIMIT_TOL * (1.0 + scale);
    let (a, d) = (hbar[0], hbar[3]);
    if (a > tol && d < -tol) || (a < -tol && d > tol) {
        return Err(Error::MixedDiagonalSigns);
    }
    let det = a * d - hbar[1] * hbar[2];
    if det.abs() > LIMIT_TOL * (1.0 + scale).powi(2) {
        return Err(Error::RankNotOne(det));
    }
    let adj = [d, -hbar[1], -hbar[2], a];
    if scale <= tol {
        return Ok(LimitPoint { p: 0.0, momentum: [0.0; 4], branch: LimitBranch::Vacuum });
    }
    if a >= -tol && d >= -tol {
        Ok(LimitPoint { p: 0.0, momentum: adj, branch: LimitBranch::Pressureless })
    } else {
        let p = a + d;
        Ok(LimitPoint { p, momentum: [adj[0] - p, adj[1], adj[2], adj[3] - p], branch: LimitBranch::NegativeTrace })
    }
}

/// `(h̄₁₁, h̄₂₂) ↦ (−h̄₂₂, −h̄₁₁)`: exchanges the two branches while keeping
/// `ρ v⊗v` fixed.
pub fn branch_swap(hbar: [f64; 4]) -> [f64; 4] {
    [-hbar[3], hbar[1], hbar[2], -hbar[0]]
}

/// `|ρ|v|² p + p²|`, zero on both branches.
pub fn pressure_identity(pt: &LimitPoint) -> f64 {
    let rho_v2 = pt.momentum[0] + pt.momentum[3];
    (rho_v2 * pt.p + pt.p * pt.p).abs()
}

/// A limit form given as a function on the unit torus.
pub struct LimitField<F> {
    pub hbar: F,
    pub periods: [Option<f64>; 2],
}

impl<F: Fn(&[f64]) -> [f64; 4] + Sync> RankOneSource<f64> for LimitField<F> {
    fn dim(&self) -> usize {
        2
    }

    fn periods(&self) -> Vec<Option<f64>> {
        self.periods.to_vec()
    }

    fn bounds(&self) -> Vec<Option<(f64, f64)>> {
        vec![None, None]
    }

    fn eval(&self, z: &[f64]) -> Result<(Vec<f64>, f64)> {
        Ok((limit_point((self.hbar)(z))?.momentum.to_vec(), 1.0))
    }
}

/// `h̄` sampled on a periodic grid and interpolated between nodes.
pub struct SampledLimit {
    pub grid: Grid<f64>,
    pub values: Vec<[f64; 4]>,
}

/// Largest jump between neighbouring samples, relative to the sup norm,
/// above which sampled data is not treated as a smooth field.
pub const JUMP_TOLERANCE: f64 = 0.5;

impl SampledLimit {
    pub fn new(grid: Grid<f64>, values: Vec<[f64; 4]>) -> Result<Self> {
        if grid.dim() != 2 || values.len() != grid.len() || !grid.periodic.iter().all(|&p| p) {
            return Err(Error::InvalidInput("limit samples need a periodic 2-D grid with one value per node".into()));
        }
        let scale = values.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut jump = 0.0f64;
        for flat in 0..grid.len() {
            let idx = grid.multi_index(flat);
            for axis in 0..2 {
                let mut nb = idx.clone();
                nb[axis] = (nb[axis] + 1) % grid.counts[axis];
                let other = &values[grid.flat_index(&nb)];
                for (a, b) in values[flat].iter().zip(other) {
                    jump = jump.max((a - b).abs());
                }
            }
        }
        if jump > JUMP_TOLERANCE * scale {
            return Err(Error::NotSolvable(format!(
                "neighbouring samples jump by {jump:.3e} against a sup norm of {scale:.3e}"
            )));
        }
        Ok(SampledLimit { grid, values })
    }

    /// Periodic cubic convolution (Catmull–Rom); `C¹` with third-order values.
    pub fn interpolate(&self, z: &[f64]) -> [f64; 4] {
        let g = &self.grid;
        let mut base = [0isize; 2];
        let mut weights = [[0.0; 4]; 2];
        for axis in 0..2 {
            let (lo, hi) = g.ranges[axis];
            let t = ((z[axis] - lo) / (hi - lo)).rem_euclid(1.0) * g.counts[axis] as f64;
            let i = t.floor();
            let s = t - i;
            base[axis] = i as isize;
            let (s2, s3) = (s * s, s * s * s);
            weights[axis] = [
                0.5 * (-s3 + 2.0 * s2 - s),
                0.5 * (3.0 * s3 - 5.0 * s2 + 2.0),
                0.5 * (-3.0 * s3 + 4.0 * s2 + s),
                0.5 * (s3 - s2),
            ];
        }
        let mut out = [0.0; 4];
        for (di, wi) in weights[0].iter().enumerate() {
            for (dj, wj) in weights[1].iter().enumerate() {
                let idx = [
                    (base[0] + di as isize - 1).rem_euclid(g.counts[0] as isize) as usize,
                    (base[1] + dj as isize - 1).rem_euclid(g.counts[1] as isize) as usize,
                ];
                let v = &self.values[g.flat_index(&idx)];
                for c in 0..4 {
                    out[c] += wi * wj * v[c];
                }
            }
        }
        out
    }
}

impl RankOneSource<f64> for SampledLimit {
    fn dim(&self) -> usize {
        2
    }

    fn periods(&self) -> Vec<Option<f64>> {
        self.grid.ranges.iter().map(|(lo, hi)| Some(hi - lo)).collect()
    }

    fn bounds(&self) -> Vec<Option<(f64, f64)>> {
        vec![None, None]
    }

    fn eval(&self, z: &[f64]) -> Result<(Vec<f64>, f64)> {
        Ok((limit_point(self.interpolate(z))?.momentum.to_vec(), 1.0))
    }
}

/// Density and velocity of the limit flow on `grid`.
pub fn limit_fluid(source: &dyn RankOneSource<f64>, grid: &Grid<f64>, t_max: f64, dt: f64) -> Result<NdSolution<f64>> {
    let sol = assemble_rank_one(source, grid, t_max, dt, 1e-4)?;
    if sol.nodes.iter().any(|n| !n.defined && n.f_upper.iter().any(|v| v.abs() > LIMIT_TOL)) {
        return Err(Error::NotSolvable("characteristics do not reach every non-vacuum node".into()));
    }
    Ok(sol)
}

/// Momentum `∂_k(ρ v^k v^j) + ∂_j p`, continuity `∂_k(ρ v^k)`, the pressure
/// identity and the factorization `ρ v⊗v = adj(h̄) − pI` on the grid.
pub fn limit_residual(sol: &NdSolution<f64>, hbar: &[[f64; 4]], momentum_tol: f64) -> Result<ResidualReport> {
    let grid = &sol.grid;
    let pts: Vec<LimitPoint> = hbar.iter().map(|h| limit_point(*h)).collect::<Result<_>>()?;
    let mut mom = vec![[0.0; 2]; grid.len()];
    for k in 0..2 {
        for j in 0..2 {
            let comp: Vec<f64> = sol
                .nodes
                .iter()
                .zip(&pts)
                .map(|(n, pt)| {
                    let flow = if n.defined { n.rho * n.v_upper[k] * n.v_upper[j] } else { 0.0 };
                    flow + if j == k { pt.p } else { 0.0 }
                })
                .collect();
            for (m, d) in mom.iter_mut().zip(grid.partial(&comp, k)) {
                m[j] += d;
            }
        }
    }
    let mut cont = vec![0.0; grid.len()];
    for k in 0..2 {
        let comp: Vec<f64> =
            sol.nodes.iter().map(|n| if n.defined { n.rho * n.v_upper[k] } else { 0.0 }).collect();
        for (c, d) in cont.iter_mut().zip(grid.partial(&comp, k)) {
            *c += d;
        }
    }
    let factor = sol
        .nodes
        .iter()
        .zip(&pts)
        .filter(|(n, _)| n.defined)
        .flat_map(|(n, pt)| (0..4).map(move |ij| (n.rho * n.v_upper[ij / 2] * n.v_upper[ij % 2] - pt.momentum[ij]).abs()))
        .fold(0.0f64, f64::max);
    let sup = |it: &mut dyn Iterator<Item = f64>| it.fold(0.0f64, |m, v| m.max(v.abs()));
    let mut r = ResidualReport::new().with_grid(grid);
    r.check("momentum", sup(&mut mom.iter().flatten().copied()), momentum_tol);
    r.record("continuity", sup(&mut cont.iter().copied()));
    r.check("pressure_identity", sup(&mut pts.iter().map(pressure_identity)), 1e-12);
    r.check("momentum_factorization", factor, 1e-9);
    Ok(r)
}
