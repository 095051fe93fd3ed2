//! n-dimensional submanifolds in codimension k: structure equations, the
//! stress built from one distinguished normal, the pressure quadratic and
//! the rank-one consistency conditions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chart::{Chart, JetMode};
use crate::characteristics::{
    density_along_characteristic, solve_paths, CharacteristicPath, FlowField, FlowSample, Inflow, PathOptions,
    Termination,
};
use crate::error::{Error, Result};
use crate::fluid2d::Root;
use crate::geometry::{covariant_dh, gauss_codazzi_residual, geometry_at, GeometryState};
use crate::grid::{covariant_div_tensor, sample_geometry, Grid};
use crate::linalg;
use crate::report::ResidualReport;
use crate::scalar::Real;

/// Geometry with one normal singled out as the source of stress.
#[derive(Clone, Debug)]
pub struct HigherGeometry<T> {
    pub state: GeometryState<T>,
    /// Index of the distinguished normal in the frame.
    pub distinguished: usize,
    /// `𝔪^μ = g^{ij} H^μ_ij` for every normal.
    pub mean_vec: Vec<T>,
    /// `L_iljk = Σ_{μ≠d} (H^μ_ij H^μ_kl − H^μ_ik H^μ_jl)`, laid out like the Riemann tensor.
    pub l_tensor: Vec<T>,
    /// `g^{ij} g^{kl} L_iljk`.
    pub s: T,
    /// Scalar curvature from the intrinsic Riemann tensor.
    pub scal: T,
    /// `Ric_lk = g^{ij} R_iljk` at `[l*n + k]`.
    pub ricci: Vec<T>,
}

fn idx4(n: usize, a: usize, b: usize, c: usize, d: usize) -> usize {
    ((a * n + b) * n + c) * n + d
}

/// `g^{ij} g^{kl} X_iljk` for a 4-tensor laid out as `[i][l][j][k]`.
fn double_trace<T: Real>(x: &[T], g_inv: &[T], n: usize) -> T {
    let mut s = T::zero();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    s = s + g_inv[i * n + j] * g_inv[k * n + l] * x[idx4(n, i, l, j, k)];
                }
            }
        }
    }
    s
}

pub fn higher_geometry<T: Real>(state: GeometryState<T>, distinguished: usize) -> Result<HigherGeometry<T>> {
    let (n, k) = (state.n, state.k);
    if distinguished >= k {
        return Err(Error::InvalidInput(format!("normal index {distinguished} out of range for codimension {k}")));
    }
    let mean_vec = (0..k).map(|mu| state.mean(mu)).collect();
    let mut l_tensor = vec![T::zero(); n * n * n * n];
    for i in 0..n {
        for l in 0..n {
            for j in 0..n {
                for kk in 0..n {
                    let mut v = T::zero();
                    for mu in (0..k).filter(|&mu| mu != distinguished) {
                        v = v + state.h_at(mu, i, j) * state.h_at(mu, kk, l) - state.h_at(mu, i, kk) * state.h_at(mu, j, l);
                    }
                    l_tensor[idx4(n, i, l, j, kk)] = v;
                }
            }
        }
    }
    let s = double_trace(&l_tensor, &state.g_inv, n);
    let mut ricci = vec![T::zero(); n * n];
    for l in 0..n {
        for kk in 0..n {
            let mut v = T::zero();
            for i in 0..n {
                for j in 0..n {
                    v = v + state.g_inv[i * n + j] * state.riemann_at(i, l, j, kk);
                }
            }
            ricci[l * n + kk] = v;
        }
    }
    let scal = linalg::trace(&linalg::matmul(&state.g_inv, &ricci, n), n);
    Ok(HigherGeometry { state, distinguished, mean_vec, l_tensor, s, scal, ricci })
}

impl<T: Real> HigherGeometry<T> {
    pub fn n(&self) -> usize {
        self.state.n
    }

    /// Mean curvature of the distinguished normal.
    pub fn mean(&self) -> T {
        self.mean_vec[self.distinguished]
    }

    /// `H^d_ij`.
    pub fn h(&self) -> Vec<T> {
        self.state.h_matrix(self.distinguished)
    }

    /// `𝔪² − |H|²` over all normals; equals `scal` by the Gauss equation.
    pub fn scal_extrinsic(&self) -> T {
        let n = self.n();
        let mut total = T::zero();
        for mu in 0..self.state.k {
            let m = self.mean_vec[mu];
            let shape = self.state.shape_operator(mu);
            let sq = linalg::trace(&linalg::matmul(&shape, &shape, n), n);
            total = total + m * m - sq;
        }
        total
    }
}

/// `|A^ν_{μi} + A^μ_{νi}|`, sup norm; vanishes for an orthonormal frame.
pub fn connection_antisymmetry<T: Real>(s: &GeometryState<T>) -> T {
    let mut worst = T::zero();
    for nu in 0..s.k {
        for mu in 0..s.k {
            for i in 0..s.n {
                worst = worst.max((s.a_at(nu, mu, i) + s.a_at(mu, nu, i)).abs());
            }
        }
    }
    worst
}

/// Gauss, Codazzi, Ricci and frame residuals over a set of states.
pub fn gcr_residual<T: Real>(states: &[GeometryState<T>], tol: f64) -> ResidualReport {
    let mut r = gauss_codazzi_residual(states, tol);
    let anti = states.iter().fold(0.0f64, |m, s| m.max(connection_antisymmetry(s).as_f64()));
    r.check("connection_antisymmetry", anti, 1e-12);
    let riemann = states
        .iter()
        .flat_map(|s| s.riemann.iter())
        .fold(0.0f64, |m, v| m.max(v.abs().as_f64()));
    r.record("riemann_sup", riemann);
    r
}

/// Stress and body force of the distinguished normal.
#[derive(Clone, Debug)]
pub struct StressNd<T> {
    /// `P^j_i = −H^{d j}_i + 𝔪^d δ^j_i` at `[j*n + i]`.
    pub p_mixed: Vec<T>,
    /// `Π_i = A^ν_{di} 𝔪^ν − A^ν_{dj} H^{ν j}_i`.
    pub body_force: Vec<T>,
}

pub fn stress_nd<T: Real>(hg: &HigherGeometry<T>) -> StressNd<T> {
    let s = &hg.state;
    let (n, d) = (s.n, hg.distinguished);
    let shape = s.shape_operator(d);
    let m = hg.mean();
    let mut p_mixed = vec![T::zero(); n * n];
    for j in 0..n {
        for i in 0..n {
            p_mixed[j * n + i] = if i == j { m } else { T::zero() } - shape[j * n + i];
        }
    }
    let mut body_force = vec![T::zero(); n];
    for (i, bf) in body_force.iter_mut().enumerate() {
        let mut v = T::zero();
        for nu in 0..s.k {
            v = v + s.a_at(nu, d, i) * hg.mean_vec[nu];
            let shape_nu = s.shape_operator(nu);
            for j in 0..n {
                v = v - s.a_at(nu, d, j) * shape_nu[j * n + i];
            }
        }
        *bf = v;
    }
    StressNd { p_mixed, body_force }
}

/// `∇_j P^j_i − Π_i` from the jets, sup over `i`.
pub fn balance_residual<T: Real>(hg: &HigherGeometry<T>, stress: &StressNd<T>) -> T {
    let s = &hg.state;
    let (n, d) = (s.n, hg.distinguished);
    let mut worst = T::zero();
    for i in 0..n {
        // ∇_j P^j_i = g^{jl}(∇_i H_jl − ∇_j H_li)
        let mut div = T::zero();
        for j in 0..n {
            for l in 0..n {
                div = div + s.g_inv_at(j, l) * (covariant_dh(s, d, i, j, l) - covariant_dh(s, d, j, l, i));
            }
        }
        worst = worst.max((div - stress.body_force[i]).abs());
    }
    worst
}

/// Which coefficients of the pressure quadratic to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadraticForm {
    /// Coefficients obtained by contracting the rank-one decomposition twice.
    Derived,
    /// Sign of the `𝔪²` term as printed in the source of the construction.
    AsPrinted,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PressureRoots<T> {
    pub lower: T,
    pub upper: T,
    pub discriminant: T,
}

fn quadratic_coeffs<T: Real>(m: T, scal: T, s: T, n: usize, form: QuadraticForm) -> (T, T, T) {
    let nf = T::from_usize_lossy(n);
    let n1 = nf - T::one();
    let n2 = nf - T::lit(2.0);
    let a = -nf * n1;
    let b = T::lit(2.0) * n1 * n1 * m;
    let quad = n1 * n2 * m * m;
    let c = match form {
        QuadraticForm::Derived => -quad,
        QuadraticForm::AsPrinted => quad,
    } - scal
        + s;
    (a, b, c)
}

/// Value of the pressure quadratic at `p`.
pub fn pressure_quadratic<T: Real>(p: T, m: T, scal: T, s: T, n: usize, form: QuadraticForm) -> T {
    let (a, b, c) = quadratic_coeffs(m, scal, s, n, form);
    (a * p + b) * p + c
}

/// Both real roots of the pressure quadratic.
///
/// A discriminant at roundoff level is treated as a double root.
pub fn pressure_roots_nd<T: Real>(m: T, scal: T, s: T, n: usize, form: QuadraticForm) -> Result<PressureRoots<T>> {
    if n < 2 {
        return Err(Error::InvalidInput(format!("pressure quadratic needs n ≥ 2, got {n}")));
    }
    let (a, b, c) = quadratic_coeffs(m, scal, s, n, form);
    // b² − 4ac = 4Δ
    let disc = (b * b - T::lit(4.0) * a * c) / T::lit(4.0);
    let scale = (b * b / T::lit(4.0)).abs() + (a * c).abs() + T::one();
    // Δ is a difference of O(scale) terms; anything within a few ulps is a double root
    let disc = if disc.abs() <= T::epsilon() * T::lit(64.0) * scale {
        T::zero()
    } else {
        disc
    };
    if disc < T::zero() {
        return Err(Error::NegativeDiscriminant(disc.as_f64()));
    }
    let r = disc.sqrt();
    // a < 0, so (−b/2 ∓ r)/a orders the roots the other way
    let half_b = b / T::lit(2.0);
    let p1 = (-half_b + r) / a;
    let p2 = (-half_b - r) / a;
    Ok(PressureRoots { lower: p1.min(p2), upper: p1.max(p2), discriminant: disc })
}

/// Which pressure root satisfies `λ = 𝔪 − p`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum RootMatch {
    Lower,
    Upper,
    Both,
    Neither,
}

#[derive(Clone, Debug, Serialize)]
pub struct PairEigen {
    pub pair: (usize, usize),
    /// Eigenvalues of `G^{-1} C`, descending; `None` if `G` is not positive definite.
    pub eigenvalues: Option<[f64; 2]>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConsistencyReport {
    pub pairs: Vec<PairEigen>,
    pub common_lambda: Option<f64>,
    /// Spread of the per-pair eigenvalues closest to `common_lambda`.
    pub spread: Option<f64>,
    pub p_roots: Option<(f64, f64)>,
    pub discriminant: Option<f64>,
    pub matched_root: RootMatch,
    pub pass: bool,
}

/// Rank-one consistency of `−H^d + (𝔪 − p) g` on every 2×2 principal block.
pub fn consistency_check<T: Real>(hg: &HigherGeometry<T>, form: QuadraticForm) -> ConsistencyReport {
    let n = hg.n();
    let g = &hg.state.g;
    let h = hg.h();
    let m = hg.mean().as_f64();
    let tol = 1e-8 * (1.0 + m.abs());
    let mut pairs = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            let gb = [g[a * n + a], g[a * n + b], g[b * n + a], g[b * n + b]];
            let cb = [h[a * n + a], h[a * n + b], h[b * n + a], h[b * n + b]];
            let ev = linalg::generalized_symmetric_eigenvalues(&cb, &gb, 2).map(|v| [v[0].as_f64(), v[1].as_f64()]);
            pairs.push(PairEigen { pair: (a, b), eigenvalues: ev });
        }
    }
    let roots = pressure_roots_nd(hg.mean(), hg.scal, hg.s, n, form).ok();
    let mut report = ConsistencyReport {
        pairs,
        common_lambda: None,
        spread: None,
        p_roots: roots.map(|r| (r.lower.as_f64(), r.upper.as_f64())),
        discriminant: roots.map(|r| r.discriminant.as_f64()),
        matched_root: RootMatch::Neither,
        pass: false,
    };
    if report.pairs.iter().any(|p| p.eigenvalues.is_none()) {
        return report;
    }
    let all: Vec<f64> = report.pairs.iter().flat_map(|p| p.eigenvalues.unwrap()).collect();
    let mut best: Option<(f64, f64)> = None;
    for &cand in &all {
        let mut picked = Vec::with_capacity(report.pairs.len());
        for p in &report.pairs {
            let ev = p.eigenvalues.unwrap();
            let near = if (ev[0] - cand).abs() <= (ev[1] - cand).abs() { ev[0] } else { ev[1] };
            if (near - cand).abs() > tol {
                break;
            }
            picked.push(near);
        }
        if picked.len() < report.pairs.len() {
            continue;
        }
        let lo = picked.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = picked.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lambda = picked.iter().sum::<f64>() / picked.len() as f64;
        if best.map_or(true, |(_, s)| hi - lo < s) {
            best = Some((lambda, hi - lo));
        }
    }
    let Some((lambda, spread)) = best else { return report };
    report.common_lambda = Some(lambda);
    report.spread = Some(spread);
    if let Some((lower, upper)) = report.p_roots {
        let hit = |p: f64| (m - p - lambda).abs() <= tol;
        report.matched_root = match (hit(lower), hit(upper)) {
            (true, true) => RootMatch::Both,
            (true, false) => RootMatch::Lower,
            (false, true) => RootMatch::Upper,
            (false, false) => RootMatch::Neither,
        };
    }
    report.pass = report.matched_root != RootMatch::Neither;
    report
}

/// Pressure from a consistency report; `prefer` breaks ties when both roots match.
pub fn matched_pressure(report: &ConsistencyReport, prefer: Root) -> Option<f64> {
    let (lower, upper) = report.p_roots?;
    match (report.matched_root, prefer) {
        (RootMatch::Lower, _) | (RootMatch::Both, Root::Lower) => Some(lower),
        (RootMatch::Upper, _) | (RootMatch::Both, Root::Upper) => Some(upper),
        (RootMatch::Neither, _) => None,
    }
}

/// `f_ij = −H^d_ij + (𝔪 − p) g_ij`.
pub fn residual_form_nd<T: Real>(hg: &HigherGeometry<T>, p: T) -> Vec<T> {
    let c = hg.mean() - p;
    hg.h().iter().zip(&hg.state.g).map(|(h, g)| c * *g - *h).collect()
}

/// `R − L − (p − 𝔪) A − (p − 𝔪)² B` with `A`, `B` built from `f` and `g`, sup norm,
/// plus the same for the Ricci contraction.
pub fn decomposition_residual<T: Real>(hg: &HigherGeometry<T>, p: T) -> (T, T) {
    let s = &hg.state;
    let n = s.n;
    let f = residual_form_nd(hg, p);
    let c = p - hg.mean();
    let g = &s.g;
    let at = |m: &[T], a: usize, b: usize| m[a * n + b];
    let mut worst = T::zero();
    let mut diff = vec![T::zero(); n * n * n * n];
    for i in 0..n {
        for l in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let a_t = at(&f, i, j) * at(g, k, l) + at(g, i, j) * at(&f, k, l)
                        - at(&f, i, k) * at(g, j, l)
                        - at(g, i, k) * at(&f, j, l);
                    let b_t = at(g, i, j) * at(g, k, l) - at(g, i, k) * at(g, j, l);
                    let idx = idx4(n, i, l, j, k);
                    let r = s.riemann[idx] - hg.l_tensor[idx] - c * a_t - c * c * b_t;
                    diff[idx] = r;
                    worst = worst.max(r.abs());
                }
            }
        }
    }
    let mut ric = T::zero();
    for l in 0..n {
        for k in 0..n {
            let mut v = T::zero();
            for i in 0..n {
                for j in 0..n {
                    v = v + s.g_inv_at(i, j) * diff[idx4(n, i, l, j, k)];
                }
            }
            ric = ric.max(v.abs());
        }
    }
    (worst, ric)
}

/// Velocity `v^j` with `ρ v^i v^j = f^{ij}`; the leading component is positive.
pub fn velocity_nd<T: Real>(f_upper: &[T], n: usize, rho: T) -> Result<Vec<T>> {
    let scale = f_upper.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let tol = T::lit(1e-10) * (T::one() + scale);
    for i in 0..n {
        if f_upper[i * n + i] < -tol {
            return Err(Error::NegativeF { index: i, value: f_upper[i * n + i].as_f64() });
        }
    }
    let mut v = vec![T::zero(); n];
    if let Some(r) = (0..n).find(|&r| f_upper[r * n + r] > tol) {
        let vr = (f_upper[r * n + r] / rho).sqrt();
        for (i, vi) in v.iter_mut().enumerate() {
            *vi = if i == r { vr } else { f_upper[r * n + i] / (rho * vr) };
        }
    }
    Ok(v)
}

/// `f^{ij}` with a nonnegative diagonal, flipping the sign if needed.
pub fn normalize_upper<T: Real>(f_upper: Vec<T>, n: usize) -> Result<(Vec<T>, bool)> {
    let scale = f_upper.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let tol = T::lit(1e-10) * (T::one() + scale);
    let neg = (0..n).any(|i| f_upper[i * n + i] < -tol);
    let pos = (0..n).any(|i| f_upper[i * n + i] > tol);
    match (neg, pos) {
        (true, true) => {
            let i = (0..n).find(|&i| f_upper[i * n + i] < -tol).unwrap();
            Err(Error::NegativeF { index: i, value: f_upper[i * n + i].as_f64() })
        }
        (true, false) => Ok((f_upper.into_iter().map(|v| -v).collect(), true)),
        _ => Ok((f_upper, false)),
    }
}

/// Flux `a^k = √det g · f^{rk} / √f^{rr}` of a rank-one field; `ρ` transported
/// along it satisfies `∂_k(√det g ρ v^k) = 0`.
pub fn rank_one_flux<T: Real>(f_upper: &[T], n: usize, sqrt_det: T) -> Vec<T> {
    let scale = f_upper.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let tol = T::lit(1e-10) * (T::one() + scale);
    match (0..n).find(|&r| f_upper[r * n + r] > tol) {
        None => vec![T::zero(); n],
        Some(r) => {
            let w = sqrt_det / f_upper[r * n + r].sqrt();
            (0..n).map(|k| f_upper[r * n + k] * w).collect()
        }
    }
}

/// Pointwise source of a rank-one upper form and the volume density.
pub trait RankOneSource<T: Real>: Sync {
    fn dim(&self) -> usize;
    fn periods(&self) -> Vec<Option<T>>;
    fn bounds(&self) -> Vec<Option<(T, T)>>;
    /// `(f^{ij}, √det g)` at `z`, diagonal already nonnegative.
    fn eval(&self, z: &[T]) -> Result<(Vec<T>, T)>;
}

/// Characteristic flow of a [`RankOneSource`], with the divergence of the
/// flux taken by central differences of step `h`.
pub struct RankOneFlow<'a, T: Real> {
    pub source: &'a dyn RankOneSource<T>,
    pub h: T,
}

impl<'a, T: Real> FlowField<T> for RankOneFlow<'a, T> {
    fn dim(&self) -> usize {
        self.source.dim()
    }

    fn periods(&self) -> Vec<Option<T>> {
        self.source.periods()
    }

    fn sample(&self, z: &[T]) -> Result<FlowSample<T>> {
        let n = self.dim();
        let (f, sq) = self.source.eval(z)?;
        let a = rank_one_flux(&f, n, sq);
        let mut div = T::zero();
        for k in 0..n {
            let mut zp = z.to_vec();
            let mut zm = z.to_vec();
            zp[k] = zp[k] + self.h;
            zm[k] = zm[k] - self.h;
            let (fp, sp) = self.source.eval(&zp)?;
            let (fm, sm) = self.source.eval(&zm)?;
            div = div + (rank_one_flux(&fp, n, sp)[k] - rank_one_flux(&fm, n, sm)[k]) / (self.h + self.h);
        }
        let min_diag = (0..n).map(|i| f[i * n + i]).fold(T::infinity(), |m, v| m.min(v));
        Ok(FlowSample { a, div, min_diag })
    }
}

/// A chart with its distinguished normal, as a source of `f^{ij}`.
pub struct ChartSource<'a, T: Real> {
    pub chart: &'a dyn Chart<T>,
    pub distinguished: usize,
    pub jets: JetMode<T>,
    pub form: QuadraticForm,
    pub prefer: Root,
}

impl<'a, T: Real> ChartSource<'a, T> {
    pub fn local(&self, z: &[T]) -> Result<(HigherGeometry<T>, ConsistencyReport, T, Vec<T>)> {
        let hg = higher_geometry(geometry_at(self.chart, z, self.jets)?, self.distinguished)?;
        let rep = consistency_check(&hg, self.form);
        let p = matched_pressure(&rep, self.prefer).ok_or_else(|| {
            Error::ConsistencyFailed(format!("no common eigenvalue matching a pressure root at {z:?}"))
        })?;
        let p = T::lit(p);
        let n = hg.n();
        let f_lower = residual_form_nd(&hg, p);
        let gi = &hg.state.g_inv;
        let f_upper = linalg::matmul(&linalg::matmul(gi, &f_lower, n), gi, n);
        let (f_upper, _) = normalize_upper(f_upper, n)?;
        Ok((hg, rep, p, f_upper))
    }
}

impl<'a, T: Real> RankOneSource<T> for ChartSource<'a, T> {
    fn dim(&self) -> usize {
        self.chart.dim_domain()
    }

    fn periods(&self) -> Vec<Option<T>> {
        self.chart.periods()
    }

    fn bounds(&self) -> Vec<Option<(T, T)>> {
        self.chart.bounds()
    }

    fn eval(&self, z: &[T]) -> Result<(Vec<T>, T)> {
        let (hg, _, _, f) = self.local(z)?;
        Ok((f, hg.state.det_g.sqrt()))
    }
}

#[derive(Clone, Debug)]
pub struct NdConfig<T> {
    pub distinguished: usize,
    pub jets: JetMode<T>,
    pub form: QuadraticForm,
    pub prefer: Root,
    pub t_max: T,
    pub dt: T,
    /// Step of the flux divergence stencil.
    pub div_h: T,
}

impl<T: Real> Default for NdConfig<T> {
    fn default() -> Self {
        NdConfig {
            distinguished: 0,
            jets: JetMode::Analytic,
            form: QuadraticForm::Derived,
            prefer: Root::Lower,
            t_max: T::lit(10.0),
            dt: T::lit(0.05),
            div_h: T::lit(1e-4),
        }
    }
}

#[derive(Clone, Debug)]
pub struct NdNode<T> {
    pub point: Vec<T>,
    pub defined: bool,
    pub rho: T,
    pub v_upper: Vec<T>,
    pub f_upper: Vec<T>,
    pub sqrt_det: T,
}

pub struct NdSolution<T: Real> {
    pub grid: Grid<T>,
    pub nodes: Vec<NdNode<T>>,
    pub paths: Vec<CharacteristicPath<T>>,
    pub inflow: Inflow<T>,
}

/// Density and velocity on a grid for any rank-one source.
pub fn assemble_rank_one<T: Real>(
    source: &dyn RankOneSource<T>,
    grid: &Grid<T>,
    t_max: T,
    dt: T,
    div_h: T,
) -> Result<NdSolution<T>> {
    let n = grid.dim();
    let flow = RankOneFlow { source, h: div_h };
    let local: Vec<(Vec<T>, T)> = (0..grid.len()).into_par_iter().map(|f| source.eval(&grid.node(f))).collect::<Result<_>>()?;
    let flux: Vec<Vec<T>> = local.iter().map(|(f, sq)| rank_one_flux(f, n, *sq)).collect();
    let inflow = crate::fluid2d::default_inflow(grid, &flux);
    let opts = PathOptions::new(t_max, dt, source.bounds());
    let paths = solve_paths(&flow, &inflow.seeds, &opts)?;
    if let Some(p) = paths.iter().find(|p| p.termination == Termination::ExitedPositivityRegion) {
        return Err(Error::PathExitsPositivityRegion {
            seed: p.seed.iter().map(|v| v.as_f64()).collect(),
            point: p.nodes.last().unwrap().iter().map(|v| v.as_f64()).collect(),
        });
    }
    let rho: Vec<Option<T>> = (0..grid.len())
        .into_par_iter()
        .map(|f| density_along_characteristic(&flow, &grid.node(f), &inflow, &opts))
        .collect::<Result<_>>()?;
    let nodes = local
        .into_iter()
        .zip(rho)
        .enumerate()
        .map(|(idx, ((f, sq), r))| {
            let point = grid.node(idx);
            match r {
                Some(r) if r > T::zero() && r.is_finite() => {
                    Ok(NdNode { point, defined: true, rho: r, v_upper: velocity_nd(&f, n, r)?, f_upper: f, sqrt_det: sq })
                }
                _ => Ok(NdNode { point, defined: false, rho: T::nan(), v_upper: vec![T::nan(); n], f_upper: f, sqrt_det: sq }),
            }
        })
        .collect::<Result<_>>()?;
    Ok(NdSolution { grid: grid.clone(), nodes, paths, inflow })
}

/// Fluid of the distinguished normal of an n-dimensional chart.
pub fn fluid_nd<T: Real>(chart: &dyn Chart<T>, grid: &Grid<T>, cfg: &NdConfig<T>) -> Result<NdSolution<T>> {
    let source = ChartSource { chart, distinguished: cfg.distinguished, jets: cfg.jets, form: cfg.form, prefer: cfg.prefer };
    assemble_rank_one(&source, grid, cfg.t_max, cfg.dt, cfg.div_h)
}

/// Continuity `∂_k(√det g ρ v^k)/√det g` and factorization residuals.
pub fn nd_residual<T: Real>(sol: &NdSolution<T>) -> ResidualReport {
    let grid = &sol.grid;
    let n = grid.dim();
    let mut div = vec![T::zero(); grid.len()];
    for k in 0..n {
        let comp: Vec<T> = sol.nodes.iter().map(|nd| nd.sqrt_det * nd.rho * nd.v_upper[k]).collect();
        for (d, v) in div.iter_mut().zip(grid.partial(&comp, k)) {
            *d = *d + v;
        }
    }
    let cont = div
        .iter()
        .zip(&sol.nodes)
        .map(|(d, nd)| (*d / nd.sqrt_det).as_f64())
        .filter(|v| v.is_finite())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let factor = sol
        .nodes
        .iter()
        .filter(|nd| nd.defined)
        .flat_map(|nd| {
            (0..n * n).map(move |ij| (nd.rho * nd.v_upper[ij / n] * nd.v_upper[ij % n] - nd.f_upper[ij]).abs().as_f64())
        })
        .fold(0.0f64, f64::max);
    let defined = sol.nodes.iter().filter(|nd| nd.defined).count();
    let mut r = ResidualReport::new().with_grid(grid);
    r.record("continuity", cont);
    r.check("rank_one_factorization", factor, 1e-8);
    r.record("defined_nodes", defined as f64);
    r
}

/// Grid divergence `∇_j P^j_i − Π_i` of the distinguished-normal stress.
pub fn balance_residual_grid<T: Real>(grid: &Grid<T>, geoms: &[HigherGeometry<T>]) -> T {
    let states: Vec<GeometryState<T>> = geoms.iter().map(|h| h.state.clone()).collect();
    let stresses: Vec<StressNd<T>> = geoms.iter().map(stress_nd).collect();
    let field: Vec<Vec<T>> = stresses.iter().map(|s| s.p_mixed.clone()).collect();
    let div = covariant_div_tensor(grid, &field, &states);
    div.iter()
        .zip(&stresses)
        .flat_map(|(d, s)| d.iter().zip(&s.body_force).map(|(a, b)| (*a - *b).abs()))
        .fold(T::zero(), |m, v| m.max(v))
}

/// Geometry with the distinguished normal at every grid node.
pub fn sample_higher<T: Real>(
    chart: &dyn Chart<T>,
    grid: &Grid<T>,
    mode: JetMode<T>,
    distinguished: usize,
) -> Result<Vec<HigherGeometry<T>>> {
    sample_geometry(chart, grid, mode)?.into_iter().map(|s| higher_geometry(s, distinguished)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::builtin_chart;
    use crate::fluid2d::{pressure_select, Orientation};
    use approx::assert_relative_eq;

    fn hg(name: &str, p: &[f64], x: &[f64]) -> HigherGeometry<f64> {
        let c = builtin_chart::<f64>(name, p).unwrap();
        higher_geometry(geometry_at(&c, x, JetMode::Analytic).unwrap(), 0).unwrap()
    }

    #[test]
    fn hyperplane_is_vacuum() {
        let h = hg("plane", &[3.0, 1.0], &[0.1, 0.2, 0.3]);
        assert!(h.state.h.iter().all(|v| *v == 0.0));
        assert_eq!((h.s, h.scal), (0.0, 0.0));
        let st = stress_nd(&h);
        assert!(st.p_mixed.iter().chain(&st.body_force).all(|v| *v == 0.0));
        let rep = consistency_check(&h, QuadraticForm::Derived);
        assert!(rep.pass);
        assert_eq!(rep.common_lambda, Some(0.0));
    }

    #[test]
    fn sphere_roots_and_consistency() {
        for n in [2usize, 3] {
            let h = hg("round_sphere_nd", &[n as f64, 1.0], &vec![0.3; n]);
            assert_relative_eq!(h.scal, (n * (n - 1)) as f64, epsilon = 1e-10);
            let m = h.mean();
            let roots = pressure_roots_nd(m, h.scal, h.s, n, QuadraticForm::Derived).unwrap();
            let rep = consistency_check(&h, QuadraticForm::Derived);
            assert!(rep.pass, "{rep:?}");
            assert!(rep.spread.unwrap() < 1e-9);
            let lambda = rep.common_lambda.unwrap();
            let p = matched_pressure(&rep, Root::Lower).unwrap();
            assert!((m - p - lambda).abs() < 1e-8, "n={n} m={m} p={p} lambda={lambda} {rep:?}");
            assert!(pressure_quadratic(roots.lower, m, h.scal, h.s, n, QuadraticForm::Derived).abs() < 1e-10);
        }
        // the printed coefficients do not admit the umbilic solution on S³
        let h = hg("round_sphere_nd", &[3.0, 1.0], &[0.3, 0.2, -0.1]);
        let printed = consistency_check(&h, QuadraticForm::AsPrinted);
        assert!(!printed.pass);
    }

    #[test]
    fn two_dimensional_reduction() {
        let c = builtin_chart::<f64>("geometric_torus", &[1.0, 2.0]).unwrap();
        for x in [[0.2, 0.4], [1.0, -2.0], [3.0, 2.9]] {
            let s = geometry_at(&c, &x, JetMode::Analytic).unwrap();
            let (k1, k2) = s.principal().unwrap();
            let h = higher_geometry(s, 0).unwrap();
            let roots = pressure_roots_nd(h.mean(), h.scal, h.s, 2, QuadraticForm::Derived).unwrap();
            assert_relative_eq!(roots.lower, k2, epsilon = 1e-12);
            assert_relative_eq!(roots.upper, k1, epsilon = 1e-12);
            let rep = consistency_check(&h, QuadraticForm::Derived);
            let p = matched_pressure(&rep, Root::Lower).unwrap();
            let p2 = pressure_select(k1, k2, Orientation::Chart, Root::Lower).unwrap().p;
            assert_relative_eq!(p, p2, epsilon = 1e-12);
        }
    }

    #[test]
    fn body_force_balances_on_codim_two_graph() {
        let h = hg("graph", &[2.0, 2.0, 0.5, 0.2], &[0.3, -0.4]);
        let st = stress_nd(&h);
        assert!(st.body_force.iter().any(|v| v.abs() > 1e-3));
        assert!(balance_residual(&h, &st) < 1e-12);
        assert_relative_eq!(h.scal, h.scal_extrinsic(), epsilon = 1e-10);
    }

    #[test]
    fn sphere_times_line_root() {
        // S²(r) × R: 𝔪 = 2/r, scal = 2/r², common eigenvalue 1/r, so p = 1/r
        let (r, n) = (0.8f64, 3);
        let m = 2.0 / r;
        let roots = pressure_roots_nd(m, 2.0 / (r * r), 0.0, n, QuadraticForm::Derived).unwrap();
        assert!((roots.lower - 1.0 / r).abs() < 1e-12 || (roots.upper - 1.0 / r).abs() < 1e-12);
    }

    #[test]
    fn velocity_and_flux() {
        let f = [4.0, 2.0, -2.0, 2.0, 1.0, -1.0, -2.0, -1.0, 1.0];
        let v = velocity_nd(&f, 3, 1.0).unwrap();
        assert_eq!(v, vec![2.0, 1.0, -1.0]);
        let a = rank_one_flux(&f, 3, 2.0);
        assert_eq!(a, vec![4.0, 2.0, -2.0]);
        let (g, flipped) = normalize_upper(f.iter().map(|v| -v).collect(), 3).unwrap();
        assert!(flipped);
        assert_eq!(g, f.to_vec());
    }
}
