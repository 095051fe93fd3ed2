//! Steady compressible fluid on a surface in `R^3` built from its second
//! fundamental form.
//!
//! The stress is the adjugate of the shape operator, the pressure is the
//! smaller principal curvature, and `ρ v ⊗ v` is the rank-one remainder
//! `f = P − p g`. Density comes from characteristics of the continuity
//! equation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chart::{Chart, JetMode};
use crate::characteristics::{
    density_along_characteristic, density_idw, solve_paths, CharacteristicPath, FlowField, FlowSample, Inflow,
    PathOptions, Termination,
};
use crate::error::{Error, Result};
use crate::geometry::{geometry_at, mean_and_principal, GeometryState};
use crate::grid::{covariant_div_tensor, covariant_div_vector, sample_geometry, Grid};
use crate::jet::Jet;
use crate::linalg;
use crate::report::ResidualReport;
use crate::scalar::Real;

/// Which unit normal the construction works with.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// `∂₁y × ∂₂y` normalized.
    Chart,
    Reversed,
}

/// Root of `p² − 𝔪p + κ = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Root {
    /// `p = κ₂`, the smaller principal curvature.
    Lower,
    /// `p = κ₁`.
    Upper,
}

/// How the characteristic flux is formed from `f`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FluxForm {
    /// `a_i = √(det g f_ii)` with signs from the rank-one factor.
    Literal,
    /// `a^k = √det g · g^{kj} f_rj / √f_rr`, the flux of `∇_k(ρ v^k)` exactly.
    Covariant,
}

/// How path densities are brought back to grid nodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resample {
    /// Follow each node's characteristic back to the inflow line.
    Characteristic,
    /// Inverse-distance average of the `k` nearest path samples.
    InverseDistance(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CaseLabel {
    Umbilic,
    /// `κ₁ = 0 > κ₂`.
    FlatNegative,
    /// `κ₁ ≠ 0 > κ₂`: only the lower root is admissible.
    CurvedNegative,
    Other,
}

impl CaseLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            CaseLabel::Umbilic => "umbilic",
            CaseLabel::FlatNegative => "k1_zero_k2_neg",
            CaseLabel::CurvedNegative => "k1_nonzero_k2_neg",
            CaseLabel::Other => "other",
        }
    }
}

/// Stress tensor in its three index placements, 2×2 row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StressState<T> {
    /// `P^i_j = adj(g^{-1}H)`.
    pub p_mixed: [T; 4],
    pub p_lower: [T; 4],
    pub p_upper: [T; 4],
}

/// `P' = adj(g^{-1} H)`, lowered and raised with `g`.
pub fn stress_from_shape<T: Real>(g: &[T], h: &[T]) -> StressState<T> {
    let g_inv = linalg::inverse(g, 2).expect("metric is invertible");
    let shape = linalg::matmul(&g_inv, h, 2);
    let adj = linalg::adjugate2(&shape);
    let lower = linalg::matmul(g, &adj, 2);
    let upper = linalg::matmul(&adj, &g_inv, 2);
    StressState { p_mixed: adj, p_lower: to4(&lower), p_upper: to4(&upper) }
}

fn to4<T: Copy>(v: &[T]) -> [T; 4] {
    [v[0], v[1], v[2], v[3]]
}

/// `|det P^{ij} − κ det g^{-1}|`.
pub fn verify_gauss_via_stress<T: Real>(stress: &StressState<T>, g: &[T], kappa: T) -> T {
    (linalg::det(&stress.p_upper, 2) - kappa / linalg::det(g, 2)).abs()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PressureChoice<T> {
    pub p: T,
    pub case: CaseLabel,
    /// Principal curvatures in the working orientation.
    pub k1: T,
    pub k2: T,
}

fn curvature_tol<T: Real>(k1: T, k2: T) -> T {
    T::lit(1e-10) * (T::one() + k1.abs().max(k2.abs()))
}

/// Selects the pressure root and classifies the point.
///
/// `k1 ≥ k2` are the principal curvatures for the chart orientation; with
/// [`Orientation::Reversed`] they become `(−k2, −k1)`. The upper root is
/// rejected when it forces `ρ‖v‖² = 𝔪 − 2p < 0`.
pub fn pressure_select<T: Real>(k1: T, k2: T, orientation: Orientation, root: Root) -> Result<PressureChoice<T>> {
    let (k1, k2) = match orientation {
        Orientation::Chart => (k1, k2),
        Orientation::Reversed => (-k2, -k1),
    };
    let tol = curvature_tol(k1, k2);
    let case = if (k1 - k2).abs() <= tol {
        CaseLabel::Umbilic
    } else if k1.abs() <= tol && k2 < -tol {
        CaseLabel::FlatNegative
    } else if k2 < -tol {
        CaseLabel::CurvedNegative
    } else {
        CaseLabel::Other
    };
    let p = match root {
        Root::Lower => k2,
        Root::Upper => k1,
    };
    let rho_v2 = k1 + k2 - p - p;
    if rho_v2 < -tol {
        return Err(Error::CaseExcluded { rho_v2: rho_v2.as_f64() });
    }
    Ok(PressureChoice { p, case, k1, k2 })
}

/// `f_ij = P_ij − p g_ij`.
pub fn residual_form<T: Real>(stress: &StressState<T>, g: &[T], p: T) -> [T; 4] {
    let mut f = stress.p_lower;
    for (fi, gi) in f.iter_mut().zip(g) {
        *fi = *fi - p * *gi;
    }
    f
}

fn diag_tol<T: Real>(f: &[T; 4]) -> T {
    T::lit(1e-10) * (T::one() + f.iter().fold(T::zero(), |m, v| m.max(v.abs())))
}

/// Makes the diagonal of `f` nonnegative by switching to `−H` if needed.
///
/// Returns the (possibly negated) `H`, `f`, and whether a flip happened.
pub fn sign_normalize<T: Real>(h: &[T], f: [T; 4]) -> Result<(Vec<T>, [T; 4], bool)> {
    let tol = diag_tol(&f);
    if (f[0] < -tol && f[3] > tol) || (f[0] > tol && f[3] < -tol) {
        return Err(Error::MixedSigns { f11: f[0].as_f64(), f22: f[3].as_f64() });
    }
    if f[0] < -tol || f[3] < -tol {
        Ok((h.iter().map(|v| -*v).collect(), f.map(|v| -v), true))
    } else {
        Ok((h.to_vec(), f, false))
    }
}

/// Index of the dominant row of a rank-one form: first with `f_rr > tol`.
fn lead_index<T: Real>(f: &[T; 4]) -> Option<usize> {
    let tol = diag_tol(f);
    (0..2).find(|&r| f[r * 2 + r] > tol)
}

/// Covariant velocity with `ρ v_i v_j = f_ij`.
///
/// The leading component (first index with `f_rr > 0`) is positive and the
/// other is `f_ri / (ρ v_r)`, which carries the sign of `f_12`.
pub fn velocity_from_f<T: Real>(f: &[T; 4], rho: T) -> Result<[T; 2]> {
    let tol = diag_tol(f);
    for i in 0..2 {
        if f[i * 3] < -tol {
            return Err(Error::NegativeF { index: i, value: f[i * 3].as_f64() });
        }
    }
    if !(rho > T::zero()) {
        return Err(Error::NonPositiveSeed(rho.as_f64()));
    }
    match lead_index(f) {
        None => Ok([T::zero(); 2]),
        Some(r) => {
            let vr = (f[r * 3] / rho).sqrt();
            let mut v = [T::zero(); 2];
            for i in 0..2 {
                v[i] = if i == r { vr } else { f[r * 2 + i] / (rho * vr) };
            }
            Ok(v)
        }
    }
}

/// Pointwise construction before the density is known.
#[derive(Clone, Debug)]
pub struct SurfaceStress<T> {
    pub stress: StressState<T>,
    pub pressure: PressureChoice<T>,
    pub f: [T; 4],
    /// Second fundamental form actually used (after orientation and sign flips).
    pub h: [T; 4],
    pub flipped: bool,
}

/// Stress, pressure and `f` at one geometry state.
pub fn surface_stress<T: Real>(state: &GeometryState<T>, orientation: Orientation, root: Root) -> Result<SurfaceStress<T>> {
    if state.n != 2 || state.k != 1 {
        return Err(Error::InvalidInput(format!(
            "surface fluid needs a 2-dimensional chart in R^3, got n = {}, k = {}",
            state.n, state.k
        )));
    }
    let (_, k1, k2) = mean_and_principal(&state.g, &state.h_matrix(0))?;
    let pressure = pressure_select(k1, k2, orientation, root)?;
    let h0 = state.h_matrix(0);
    let h: Vec<T> = match orientation {
        Orientation::Chart => h0,
        Orientation::Reversed => h0.iter().map(|v| -*v).collect(),
    };
    let stress = stress_from_shape(&state.g, &h);
    // f = P − p g = (𝔪 − p) g − H with the accurately separated eigenvalues
    let other = pressure.k1 + pressure.k2 - pressure.p;
    let mut f = [T::zero(); 4];
    for i in 0..4 {
        f[i] = other * state.g[i] - h[i];
    }
    let (h, f, flipped) = sign_normalize(&h, f)?;
    let stress = if flipped { stress_from_shape(&state.g, &h) } else { stress };
    Ok(SurfaceStress { stress, pressure, f, h: to4(&h), flipped })
}

/// `∇_k P^k_j` with `P = adj(g^{-1}H)` differentiated exactly from the jets.
pub fn momentum_divergence<T: Real>(state: &GeometryState<T>, h: &[T; 4], sign: T) -> [T; 2] {
    let n = 2;
    let gi = &state.g_inv;
    let mut shape = [T::zero(); 4];
    let mut dshape = [[T::zero(); 4]; 2];
    for i in 0..n {
        for j in 0..n {
            let mut s = T::zero();
            for k in 0..n {
                s = s + gi[i * n + k] * h[k * n + j];
            }
            shape[i * n + j] = s;
        }
    }
    for l in 0..n {
        // ∂_l (g^{-1} H) = −g^{-1} ∂_l g g^{-1} H + g^{-1} ∂_l H
        for i in 0..n {
            for j in 0..n {
                let mut s = T::zero();
                for a in 0..n {
                    for b in 0..n {
                        s = s - gi[i * n + a] * state.dg[(l * n + a) * n + b] * shape[b * n + j];
                    }
                    s = s + gi[i * n + a] * sign * state.dh_at(0, l, a, j);
                }
                dshape[l][i * n + j] = s;
            }
        }
    }
    let mean = shape[0] + shape[3];
    let p = [mean - shape[0], -shape[1], -shape[2], mean - shape[3]];
    let mut out = [T::zero(); 2];
    for j in 0..n {
        let mut s = T::zero();
        for k in 0..n {
            let dmean = dshape[k][0] + dshape[k][3];
            let dp = if k == j { dmean } else { T::zero() } - dshape[k][k * n + j];
            s = s + dp;
            for l in 0..n {
                s = s + state.gamma_at(k, k, l) * p[l * n + j] - state.gamma_at(l, j, k) * p[k * n + l];
            }
        }
        out[j] = s;
    }
    out
}

/// Flux field of the continuity equation on a surface chart.
pub struct SurfaceFlow<'a, T: Real> {
    pub chart: &'a dyn Chart<T>,
    pub orientation: Orientation,
    pub root: Root,
    pub flux: FluxForm,
    pub jets: JetMode<T>,
}

fn order1<T: Real>(value: T, d: [T; 2]) -> Jet<T> {
    Jet::from_derivatives(value, &d, None, None)
}

impl<'a, T: Real> SurfaceFlow<'a, T> {
    /// Flux `a` as order-1 jets, plus `min f_ii`.
    fn flux_jets(&self, state: &GeometryState<T>) -> Result<(Vec<Jet<T>>, T)> {
        let local = surface_stress(state, self.orientation, self.root)?;
        let sign = self.sign_of(state, &local);
        let n = 2;
        let g: Vec<Jet<T>> = (0..4)
            .map(|ij| order1(state.g[ij], [state.dg[ij], state.dg[n * n + ij]]))
            .collect();
        let h: Vec<Jet<T>> = (0..4)
            .map(|ij| {
                let (i, j) = (ij / n, ij % n);
                order1(local.h[ij], [state.dh_at(0, 0, i, j) * sign, state.dh_at(0, 1, i, j) * sign])
            })
            .collect();
        let det = g[0] * g[3] - g[1] * g[2];
        let inv_det = det.recip();
        let g_inv = [g[3] * inv_det, -(g[1] * inv_det), -(g[2] * inv_det), g[0] * inv_det];
        let shape: Vec<Jet<T>> = (0..4)
            .map(|ij| {
                let (i, j) = (ij / n, ij % n);
                g_inv[i * n] * h[j] + g_inv[i * n + 1] * h[n + j]
            })
            .collect();
        let mean = shape[0] + shape[3];
        let gauss = shape[0] * shape[3] - shape[1] * shape[2];
        // 𝔪 − p is the principal curvature not chosen as pressure
        let gap = (local.pressure.k1 - local.pressure.k2).abs();
        let disc = if gap > curvature_tol(local.pressure.k1, local.pressure.k2) {
            let sq = mean * mean - gauss * T::lit(4.0);
            let half_over = (gap + gap).recip();
            order1(gap, [sq.d1(0) * half_over, sq.d1(1) * half_over])
        } else {
            Jet::constant(2, 1, T::zero())
        };
        let half = T::lit(0.5);
        // the working H may be the negative of the oriented one, which swaps roots
        let take_plus = (self.root == Root::Lower) != local.flipped;
        let other = if take_plus { (mean + disc) * half } else { (mean - disc) * half };
        let f: Vec<Jet<T>> = (0..4).map(|ij| other * g[ij] - h[ij]).collect();
        let f_vals = [f[0].value(), f[1].value(), f[2].value(), f[3].value()];
        let min_diag = f_vals[0].min(f_vals[3]);
        let zero = Jet::constant(2, 1, T::zero());
        let a = match lead_index(&f_vals) {
            None => vec![zero, zero],
            Some(r) => {
                let scale = det.sqrt() / f[r * 3].sqrt();
                let lower: Vec<Jet<T>> = (0..2).map(|i| f[r * 2 + i] * scale).collect();
                match self.flux {
                    FluxForm::Literal => lower,
                    FluxForm::Covariant => (0..2)
                        .map(|k| g_inv[k * 2] * lower[0] + g_inv[k * 2 + 1] * lower[1])
                        .collect(),
                }
            }
        };
        Ok((a, min_diag))
    }

    fn sign_of(&self, _state: &GeometryState<T>, local: &SurfaceStress<T>) -> T {
        let o = if self.orientation == Orientation::Reversed { -T::one() } else { T::one() };
        if local.flipped {
            -o
        } else {
            o
        }
    }

    /// Flux values at a node whose geometry is already known.
    pub fn flux_at(&self, state: &GeometryState<T>) -> Result<Vec<T>> {
        Ok(self.flux_jets(state)?.0.iter().map(|j| j.value()).collect())
    }
}

impl<'a, T: Real> FlowField<T> for SurfaceFlow<'a, T> {
    fn dim(&self) -> usize {
        2
    }

    fn periods(&self) -> Vec<Option<T>> {
        self.chart.periods()
    }

    fn sample(&self, z: &[T]) -> Result<FlowSample<T>> {
        let state = geometry_at(self.chart, z, self.jets)?;
        let (a, min_diag) = self.flux_jets(&state)?;
        let div = a[0].d1(0) + a[1].d1(1);
        Ok(FlowSample { a: a.iter().map(|j| j.value()).collect(), div, min_diag })
    }
}

/// Options for [`assemble_fluid`].
#[derive(Clone, Debug)]
pub struct FluidConfig<T> {
    pub orientation: Orientation,
    pub root: Root,
    pub flux: FluxForm,
    pub jets: JetMode<T>,
    pub t_max: T,
    pub dt: T,
    pub resample: Resample,
    /// Explicit seeds `(point, ρ₀)`; they must share one coordinate, which
    /// defines the inflow line. Defaults to `ρ₀ = 1` on the entry edge.
    pub seeds: Option<Vec<(Vec<T>, T)>>,
}

impl<T: Real> Default for FluidConfig<T> {
    fn default() -> Self {
        FluidConfig {
            orientation: Orientation::Chart,
            root: Root::Lower,
            flux: FluxForm::Literal,
            jets: JetMode::Analytic,
            t_max: T::lit(10.0),
            dt: T::lit(0.05),
            resample: Resample::Characteristic,
            seeds: None,
        }
    }
}

/// Fluid variables at one grid node.
#[derive(Clone, Debug)]
pub struct FluidNode<T> {
    pub point: Vec<T>,
    /// `false` where no characteristic reaches the inflow line.
    pub defined: bool,
    pub rho: T,
    pub v_lower: [T; 2],
    pub v_upper: [T; 2],
    pub p: T,
    pub speed_sq: T,
    pub f: [T; 4],
    pub case: CaseLabel,
}

pub struct FluidSolution<T: Real> {
    pub grid: Grid<T>,
    pub states: Vec<GeometryState<T>>,
    pub local: Vec<SurfaceStress<T>>,
    pub nodes: Vec<FluidNode<T>>,
    pub paths: Vec<CharacteristicPath<T>>,
    pub inflow: Inflow<T>,
    pub orientation: Orientation,
}

/// Picks the inflow line: the axis carrying the largest mean flux, on the
/// edge where the flux enters (the lower edge on periodic axes).
pub fn default_inflow<T: Real>(grid: &Grid<T>, flux: &[Vec<T>]) -> Inflow<T> {
    let mut best_axis = 0;
    let mut best = -T::one();
    let mut mean_sign = T::one();
    for axis in 0..grid.dim() {
        let total: T = flux.iter().map(|a| a[axis].abs()).sum();
        if total > best {
            best = total;
            best_axis = axis;
            mean_sign = flux.iter().map(|a| a[axis]).sum::<T>();
        }
    }
    let c = grid.counts[best_axis];
    let edge = if grid.periodic[best_axis] || mean_sign >= T::zero() { 0 } else { c - 1 };
    let value = grid.coord(best_axis, edge);
    let seeds = (0..grid.len())
        .filter(|&f| grid.multi_index(f)[best_axis] == edge)
        .map(|f| (grid.node(f), T::one()))
        .collect();
    Inflow { axis: best_axis, value, seeds }
}

fn inflow_from_seeds<T: Real>(seeds: &[(Vec<T>, T)]) -> Result<Inflow<T>> {
    let first = seeds.first().ok_or_else(|| Error::InvalidInput("seed list is empty".into()))?;
    for axis in 0..first.0.len() {
        let v = first.0[axis];
        if seeds.iter().all(|(p, _)| (p[axis] - v).abs() <= T::lit(1e-12) * (T::one() + v.abs())) {
            return Ok(Inflow { axis, value: v, seeds: seeds.to_vec() });
        }
    }
    Err(Error::InvalidInput("seeds must share one coordinate to define an inflow line".into()))
}

/// Builds `(ρ, v, p)` on a grid over a surface chart.
pub fn assemble_fluid<T: Real>(chart: &dyn Chart<T>, grid: &Grid<T>, cfg: &FluidConfig<T>) -> Result<FluidSolution<T>> {
    let states = sample_geometry(chart, grid, cfg.jets)?;
    let local: Vec<SurfaceStress<T>> =
        states.par_iter().map(|s| surface_stress(s, cfg.orientation, cfg.root)).collect::<Result<_>>()?;
    let flow = SurfaceFlow { chart, orientation: cfg.orientation, root: cfg.root, flux: cfg.flux, jets: cfg.jets };
    let flux: Vec<Vec<T>> = states.par_iter().map(|s| flow.flux_at(s)).collect::<Result<_>>()?;
    let inflow = match &cfg.seeds {
        Some(seeds) => inflow_from_seeds(seeds)?,
        None => default_inflow(grid, &flux),
    };
    // paths may leave the sampled window; only the chart domain stops them
    let opts = PathOptions::new(cfg.t_max, cfg.dt, chart.bounds());
    let paths = solve_paths(&flow, &inflow.seeds, &opts)?;
    if let Some(p) = paths.iter().find(|p| p.termination == Termination::ExitedPositivityRegion) {
        return Err(Error::PathExitsPositivityRegion {
            seed: p.seed.iter().map(|v| v.as_f64()).collect(),
            point: p.nodes.last().unwrap().iter().map(|v| v.as_f64()).collect(),
        });
    }
    let periods = chart.periods();
    let rho: Vec<Option<T>> = match cfg.resample {
        Resample::Characteristic => (0..grid.len())
            .into_par_iter()
            .map(|f| density_along_characteristic(&flow, &grid.node(f), &inflow, &opts))
            .collect::<Result<_>>()?,
        Resample::InverseDistance(k) => (0..grid.len())
            .map(|f| {
                let r = density_idw(&paths, &grid.node(f), &periods, k);
                if r.is_finite() {
                    Some(r)
                } else {
                    None
                }
            })
            .collect(),
    };
    let nodes = states
        .iter()
        .zip(&local)
        .zip(rho)
        .map(|((s, l), r)| node_from(s, l, r))
        .collect::<Result<Vec<_>>>()?;
    Ok(FluidSolution { grid: grid.clone(), states, local, nodes, paths, inflow, orientation: cfg.orientation })
}

fn node_from<T: Real>(s: &GeometryState<T>, l: &SurfaceStress<T>, rho: Option<T>) -> Result<FluidNode<T>> {
    let (defined, rho) = match rho {
        Some(r) if r > T::zero() && r.is_finite() => (true, r),
        _ => (false, T::nan()),
    };
    let v_lower = if defined { velocity_from_f(&l.f, rho)? } else { [T::nan(); 2] };
    let gi = &s.g_inv;
    let v_upper = [gi[0] * v_lower[0] + gi[1] * v_lower[1], gi[2] * v_lower[0] + gi[3] * v_lower[1]];
    let speed_sq = v_lower[0] * v_upper[0] + v_lower[1] * v_upper[1];
    Ok(FluidNode {
        point: s.point.clone(),
        defined,
        rho,
        v_lower,
        v_upper,
        p: l.pressure.p,
        speed_sq,
        f: l.f,
        case: l.pressure.case,
    })
}

fn sup<T: Real>(values: impl Iterator<Item = T>) -> (f64, usize) {
    let mut worst = 0.0f64;
    let mut count = 0;
    for v in values {
        if v.is_finite() {
            worst = worst.max(v.abs().as_f64());
            count += 1;
        }
    }
    (worst, count)
}

/// Pointwise algebraic identities of the construction.
pub fn stress_identities<T: Real>(states: &[GeometryState<T>], local: &[SurfaceStress<T>]) -> ResidualReport {
    let mut r = ResidualReport::new();
    let (gauss, _) = sup(states.iter().zip(local).map(|(s, l)| verify_gauss_via_stress(&l.stress, &s.g, s.kappa())));
    let (quad, _) = sup(states.iter().zip(local).map(|(s, l)| {
        let p = l.pressure.p;
        p * p - (l.pressure.k1 + l.pressure.k2) * p + s.kappa()
    }));
    let (rank, _) = sup(states.iter().zip(local).map(|(s, l)| linalg::det(&linalg::matmul(&s.g_inv, &l.f, 2), 2)));
    r.check("gauss_via_stress", gauss, 1e-9);
    r.check("pressure_quadratic", quad, 1e-10);
    r.check("rank_one_f", rank, 1e-10);
    r
}

/// Continuity and momentum residuals of an assembled solution.
pub fn euler_residual<T: Real>(sol: &FluidSolution<T>) -> ResidualReport {
    let grid = &sol.grid;
    let nan = T::nan();
    // ρ v^k
    let mass: Vec<Vec<T>> = sol
        .nodes
        .iter()
        .map(|nd| if nd.defined { vec![nd.rho * nd.v_upper[0], nd.rho * nd.v_upper[1]] } else { vec![nan, nan] })
        .collect();
    let cont = covariant_div_vector(grid, &mass, &sol.states);
    // T^k_j = ρ v^k v_j + p δ^k_j
    let stress: Vec<Vec<T>> = sol
        .nodes
        .iter()
        .map(|nd| {
            let mut t = vec![T::zero(); 4];
            for k in 0..2 {
                for j in 0..2 {
                    t[k * 2 + j] = nd.rho * nd.v_upper[k] * nd.v_lower[j] + if k == j { nd.p } else { T::zero() };
                }
            }
            t
        })
        .collect();
    let mom = covariant_div_tensor(grid, &stress, &sol.states);
    let analytic: Vec<[T; 2]> = sol
        .states
        .iter()
        .zip(&sol.local)
        .map(|(s, l)| {
            let sign = match (sol.orientation, l.flipped) {
                (Orientation::Chart, false) | (Orientation::Reversed, true) => T::one(),
                _ => -T::one(),
            };
            momentum_divergence(s, &l.h, sign)
        })
        .collect();
    let assembly = sol.nodes.iter().zip(&sol.local).zip(&stress).map(|((nd, l), t)| {
        if !nd.defined {
            return nan;
        }
        (0..4).fold(T::zero(), |m, i| m.max((t[i] - l.stress.p_mixed[i]).abs()))
    });
    let (c, counted) = sup(cont.into_iter());
    let (m, _) = sup(mom.into_iter().flatten());
    let (ma, _) = sup(analytic.into_iter().flat_map(|v| v.into_iter()));
    let (asm, _) = sup(assembly);
    let (factor, _) = sup(sol.nodes.iter().filter(|nd| nd.defined).map(|nd| {
        (0..4).fold(T::zero(), |mx, ij| {
            mx.max((nd.rho * nd.v_lower[ij / 2] * nd.v_lower[ij % 2] - nd.f[ij]).abs())
        })
    }));
    let (min_rho, _) = sup(sol.nodes.iter().filter(|nd| nd.defined).map(|nd| nd.rho));
    let min_rho_path = sol
        .paths
        .iter()
        .flat_map(|p| p.rho_along.iter())
        .fold(f64::INFINITY, |m, r| m.min(r.as_f64()));
    let mut r = ResidualReport::new().with_grid(grid);
    r.record("continuity", c);
    r.record("momentum_grid", m);
    r.check("momentum_analytic", ma, 1e-8);
    r.check("stress_assembly", asm, 1e-9);
    r.check("rank_one_factorization", factor, 1e-9);
    r.record("defined_nodes", counted as f64);
    r.record("max_rho", min_rho);
    r.record("min_rho_on_paths", if min_rho_path.is_finite() { min_rho_path } else { f64::NAN });
    r
}
