//! Rectangular parameter grids and second-order finite differences on them.

use rayon::prelude::*;

use crate::chart::{Chart, JetMode};
use crate::error::{Error, Result};
use crate::geometry::{geometry_at, GeometryState};
use crate::scalar::Real;

/// Tensor-product grid. Node index runs with the last axis fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid<T> {
    pub counts: Vec<usize>,
    pub ranges: Vec<(T, T)>,
    /// Periodic axes sample `[lo, hi)` and wrap in differences.
    pub periodic: Vec<bool>,
}

impl<T: Real> Grid<T> {
    pub fn new(counts: Vec<usize>, ranges: Vec<(T, T)>, periodic: Vec<bool>) -> Result<Self> {
        if counts.is_empty() || counts.len() != ranges.len() || counts.len() != periodic.len() {
            return Err(Error::InvalidGrid("counts, ranges and periodic flags must have equal length".into()));
        }
        for (axis, (&c, &(lo, hi))) in counts.iter().zip(&ranges).enumerate() {
            if c < 2 {
                return Err(Error::InvalidGrid(format!("axis {axis} has {c} samples, need at least 2")));
            }
            if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidGrid(format!("axis {axis} range [{lo}, {hi}] is empty")));
            }
        }
        Ok(Grid { counts, ranges, periodic })
    }

    /// Grid spanning one full period on periodic axes and `ranges` elsewhere.
    pub fn for_chart(chart: &dyn Chart<T>, counts: Vec<usize>, ranges: &[Option<(T, T)>]) -> Result<Self> {
        let periods = chart.periods();
        if counts.len() != periods.len() {
            return Err(Error::InvalidGrid(format!(
                "chart has {} axes, grid has {}",
                periods.len(),
                counts.len()
            )));
        }
        let mut rs = Vec::new();
        let mut per = Vec::new();
        for (axis, p) in periods.iter().enumerate() {
            match (ranges.get(axis).copied().flatten(), p) {
                (Some(r), _) => {
                    rs.push(r);
                    per.push(p.map_or(false, |p| (r.1 - r.0 - p).abs() <= p * T::lit(1e-12)));
                }
                (None, Some(p)) => {
                    rs.push((T::zero(), *p));
                    per.push(true);
                }
                (None, None) => {
                    return Err(Error::InvalidGrid(format!("axis {axis} is not periodic and needs a range")));
                }
            }
        }
        Grid::new(counts, rs, per)
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: usize) -> T {
        let (lo, hi) = self.ranges[axis];
        let c = self.counts[axis];
        let cells = if self.periodic[axis] { c } else { c - 1 };
        (hi - lo) / T::from_usize_lossy(cells)
    }

    pub fn coord(&self, axis: usize, i: usize) -> T {
        self.ranges[axis].0 + self.spacing(axis) * T::from_usize_lossy(i)
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for axis in (0..self.dim()).rev() {
            idx[axis] = flat % self.counts[axis];
            flat /= self.counts[axis];
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.counts).fold(0, |acc, (i, c)| acc * c + i)
    }

    pub fn node(&self, flat: usize) -> Vec<T> {
        self.multi_index(flat).iter().enumerate().map(|(axis, &i)| self.coord(axis, i)).collect()
    }

    pub fn nodes(&self) -> Vec<Vec<T>> {
        (0..self.len()).map(|f| self.node(f)).collect()
    }

    /// Same ranges with every count multiplied by `factor`.
    pub fn refined(&self, factor: usize) -> Self {
        let counts = self
            .counts
            .iter()
            .zip(&self.periodic)
            .map(|(&c, &p)| if p { c * factor } else { (c - 1) * factor + 1 })
            .collect();
        Grid { counts, ranges: self.ranges.clone(), periodic: self.periodic.clone() }
    }

    /// Second-order central difference `∂_axis f`; periodic wrap or
    /// second-order one-sided stencils at non-periodic edges.
    pub fn partial(&self, f: &[T], axis: usize) -> Vec<T> {
        assert_eq!(f.len(), self.len());
        let h = self.spacing(axis);
        let two_h = h + h;
        let c = self.counts[axis];
        let stride: usize = self.counts[axis + 1..].iter().product();
        let three = T::lit(3.0);
        let four = T::lit(4.0);
        (0..f.len())
            .map(|flat| {
                let i = (flat / stride) % c;
                let base = flat - i * stride;
                let at = |j: usize| f[base + j * stride];
                if self.periodic[axis] {
                    (at((i + 1) % c) - at((i + c - 1) % c)) / two_h
                } else if i == 0 {
                    (-three * at(0) + four * at(1) - at(2.min(c - 1))) / two_h
                } else if i == c - 1 {
                    (three * at(c - 1) - four * at(c - 2) + at(c.saturating_sub(3))) / two_h
                } else {
                    (at(i + 1) - at(i - 1)) / two_h
                }
            })
            .collect()
    }
}

/// Geometry at every grid node, in node order.
pub fn sample_geometry<T: Real>(
    chart: &dyn Chart<T>,
    grid: &Grid<T>,
    mode: JetMode<T>,
) -> Result<Vec<GeometryState<T>>> {
    if grid.dim() != chart.dim_domain() {
        return Err(Error::InvalidGrid(format!(
            "grid has {} axes, chart domain has {}",
            grid.dim(),
            chart.dim_domain()
        )));
    }
    (0..grid.len()).into_par_iter().map(|f| geometry_at(chart, &grid.node(f), mode)).collect()
}

/// `∇_k T^k_j = ∂_k T^k_j + Γ^k_kl T^l_j − Γ^l_jk T^k_l` for a mixed tensor
/// field stored per node as `[k*n + j]`.
pub fn covariant_div_tensor<T: Real>(grid: &Grid<T>, field: &[Vec<T>], states: &[GeometryState<T>]) -> Vec<Vec<T>> {
    let n = grid.dim();
    let mut out: Vec<Vec<T>> = vec![vec![T::zero(); n]; grid.len()];
    for k in 0..n {
        for j in 0..n {
            let comp: Vec<T> = field.iter().map(|t| t[k * n + j]).collect();
            let d = grid.partial(&comp, k);
            for (o, v) in out.iter_mut().zip(d) {
                o[j] = o[j] + v;
            }
        }
    }
    for ((o, t), s) in out.iter_mut().zip(field).zip(states) {
        for j in 0..n {
            let mut c = T::zero();
            for k in 0..n {
                for l in 0..n {
                    c = c + s.gamma_at(k, k, l) * t[l * n + j] - s.gamma_at(l, j, k) * t[k * n + l];
                }
            }
            o[j] = o[j] + c;
        }
    }
    out
}

/// `∇_k w^k = ∂_k w^k + Γ^k_kl w^l` for a vector field stored per node.
pub fn covariant_div_vector<T: Real>(grid: &Grid<T>, field: &[Vec<T>], states: &[GeometryState<T>]) -> Vec<T> {
    let n = grid.dim();
    let mut out = vec![T::zero(); grid.len()];
    for k in 0..n {
        let comp: Vec<T> = field.iter().map(|w| w[k]).collect();
        for (o, v) in out.iter_mut().zip(grid.partial(&comp, k)) {
            *o = *o + v;
        }
    }
    for ((o, w), s) in out.iter_mut().zip(field).zip(states) {
        for k in 0..n {
            for l in 0..n {
                *o = *o + s.gamma_at(k, k, l) * w[l];
            }
        }
    }
    out
}
