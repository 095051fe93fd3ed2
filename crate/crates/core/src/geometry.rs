//! Pointwise intrinsic and extrinsic geometry of an embedding.
//!
//! Everything is computed from the third-order chart jet by jet arithmetic:
//! the metric carries two derivatives, Christoffel symbols and second
//! fundamental forms one, curvature none. Index layouts are row-major and
//! documented on each field of [`GeometryState`].

use crate::chart::{jet_with_mode, Chart, Jet3, JetMode};
use crate::error::{Error, Result};
use crate::jet::{dot, Jet};
use crate::linalg;
use crate::report::ResidualReport;
use crate::scalar::Real;

/// Geometry at one parameter point.
#[derive(Clone, Debug)]
pub struct GeometryState<T> {
    pub n: usize,
    pub k: usize,
    pub point: Vec<T>,
    pub y: Vec<T>,
    /// `∂_i y`, one ambient vector per axis.
    pub tangents: Vec<Vec<T>>,
    /// `g_ij` at `[i*n + j]`.
    pub g: Vec<T>,
    pub g_inv: Vec<T>,
    pub det_g: T,
    /// `∂_l g_ij` at `[(l*n + i)*n + j]`.
    pub dg: Vec<T>,
    /// `Γ^i_jk` at `[(i*n + j)*n + k]`.
    pub gamma: Vec<T>,
    /// `∂_l Γ^i_jk` at `[((l*n + i)*n + j)*n + k]`.
    pub dgamma: Vec<T>,
    /// Orthonormal normal frame, `k` ambient vectors.
    pub normals: Vec<Vec<T>>,
    /// `H^μ_ij` at `[(μ*n + i)*n + j]`.
    pub h: Vec<T>,
    /// `∂_l H^μ_ij` at `[((μ*n + l)*n + i)*n + j]`.
    pub dh: Vec<T>,
    /// Normal connection `A^ν_{μi} = ∂_i ν_μ · ν_ν` at `[(ν*k + μ)*n + i]`.
    pub a: Vec<T>,
    /// `∂_j A^ν_{μi}` at `[((ν*k + μ)*n + i)*n + j]`.
    pub da: Vec<T>,
    /// `R_lijk` at `[((l*n + i)*n + j)*n + k]`.
    pub riemann: Vec<T>,
}

impl<T: Real> GeometryState<T> {
    #[inline]
    pub fn g_at(&self, i: usize, j: usize) -> T {
        self.g[i * self.n + j]
    }

    #[inline]
    pub fn g_inv_at(&self, i: usize, j: usize) -> T {
        self.g_inv[i * self.n + j]
    }

    #[inline]
    pub fn gamma_at(&self, i: usize, j: usize, k: usize) -> T {
        self.gamma[(i * self.n + j) * self.n + k]
    }

    #[inline]
    pub fn h_at(&self, mu: usize, i: usize, j: usize) -> T {
        self.h[(mu * self.n + i) * self.n + j]
    }

    #[inline]
    pub fn dh_at(&self, mu: usize, l: usize, i: usize, j: usize) -> T {
        self.dh[((mu * self.n + l) * self.n + i) * self.n + j]
    }

    #[inline]
    pub fn a_at(&self, nu: usize, mu: usize, i: usize) -> T {
        self.a[(nu * self.k + mu) * self.n + i]
    }

    #[inline]
    pub fn riemann_at(&self, l: usize, i: usize, j: usize, k: usize) -> T {
        let n = self.n;
        self.riemann[((l * n + i) * n + j) * n + k]
    }

    /// Second fundamental form for one normal as an `n×n` matrix.
    pub fn h_matrix(&self, mu: usize) -> Vec<T> {
        let nn = self.n * self.n;
        self.h[mu * nn..(mu + 1) * nn].to_vec()
    }

    /// Shape operator `g^{-1} H^μ` (row index raised).
    pub fn shape_operator(&self, mu: usize) -> Vec<T> {
        linalg::matmul(&self.g_inv, &self.h_matrix(mu), self.n)
    }

    /// Mean curvature `g^{ij} H^μ_ij`.
    pub fn mean(&self, mu: usize) -> T {
        linalg::trace(&self.shape_operator(mu), self.n)
    }

    /// Gauss curvature `R_1212 / det g`; surfaces only.
    pub fn kappa(&self) -> T {
        assert_eq!(self.n, 2, "Gauss curvature is defined for surfaces");
        gauss_curvature(&self.riemann, &self.g)
    }

    /// Principal curvatures `κ₁ ≥ κ₂` of the first normal; surfaces only.
    pub fn principal(&self) -> Result<(T, T)> {
        assert_eq!(self.n, 2, "principal curvatures are reported for surfaces");
        let (_, k1, k2) = mean_and_principal(&self.g, &self.h_matrix(0))?;
        Ok((k1, k2))
    }

    /// Same state seen through the opposite orientation of the first normal.
    pub fn flipped(&self) -> Self {
        let mut s = self.clone();
        let n = self.n;
        let k = self.k;
        for v in &mut s.normals[0] {
            *v = -*v;
        }
        for v in &mut s.h[..n * n] {
            *v = -*v;
        }
        for v in &mut s.dh[..n * n * n] {
            *v = -*v;
        }
        // A^ν_{0i} and A^0_{νi} change sign, A^0_{0i} = 0 stays.
        for nu in 0..k {
            for mu in 0..k {
                if (nu == 0) != (mu == 0) {
                    for i in 0..n {
                        let idx = (nu * k + mu) * n + i;
                        s.a[idx] = -s.a[idx];
                        for j in 0..n {
                            s.da[idx * n + j] = -s.da[idx * n + j];
                        }
                    }
                }
            }
        }
        s
    }
}

/// Metric `g_ij = ∂_i y · ∂_j y`.
pub fn first_form<T: Real>(jet: &Jet3<T>) -> Result<Vec<T>> {
    let n = jet.dim_domain();
    let d: Vec<Vec<T>> = (0..n).map(|i| jet.d1(i)).collect();
    let mut g = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..n {
            g[i * n + j] = d[i].iter().zip(&d[j]).map(|(a, b)| *a * *b).sum();
        }
    }
    if linalg::cholesky(&g, n).is_none() {
        return Err(Error::NotPositiveDefinite { point: jet.point.iter().map(|v| v.as_f64()).collect() });
    }
    Ok(g)
}

/// Orthonormal normal frame at the jet's base point (values only).
pub fn normal_frame<T: Real>(jet: &Jet3<T>, hints: Option<&[Vec<T>]>) -> Result<Vec<Vec<T>>> {
    let n = jet.dim_domain();
    let tangents: Vec<Vec<Jet<T>>> = (0..n)
        .map(|i| jet.d1(i).into_iter().map(|v| Jet::constant(n, 0, v)).collect())
        .collect();
    let hints: Option<Vec<Vec<Jet<T>>>> =
        hints.map(|hs| hs.iter().map(|h| h.iter().map(|v| Jet::constant(n, 0, *v)).collect()).collect());
    let frame = normal_frame_jets(&tangents, hints.as_deref(), &jet.point)?;
    Ok(frame.iter().map(|v| v.iter().map(|c| c.value()).collect()).collect())
}

/// Second fundamental forms `H^μ_ij = ∂_i ∂_j y · ν_μ`, laid out `[(μ*n + i)*n + j]`.
pub fn second_form<T: Real>(jet: &Jet3<T>, normals: &[Vec<T>]) -> Vec<T> {
    let n = jet.dim_domain();
    let mut h = vec![T::zero(); normals.len() * n * n];
    for (mu, nu) in normals.iter().enumerate() {
        for i in 0..n {
            for j in 0..n {
                h[(mu * n + i) * n + j] = jet.d2(i, j).iter().zip(nu).map(|(a, b)| *a * *b).sum();
            }
        }
    }
    h
}

/// `Γ^i_jk = ½ g^{il}(∂_j g_kl + ∂_k g_jl − ∂_l g_jk)` with `dg[(l*n+i)*n+j] = ∂_l g_ij`.
pub fn christoffel<T: Real>(g_inv: &[T], dg: &[T], n: usize) -> Vec<T> {
    let half = T::lit(0.5);
    let mut gamma = vec![T::zero(); n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut s = T::zero();
                for l in 0..n {
                    let lower = dg[(j * n + k) * n + l] + dg[(k * n + j) * n + l] - dg[(l * n + j) * n + k];
                    s = s + g_inv[i * n + l] * lower;
                }
                gamma[(i * n + j) * n + k] = half * s;
            }
        }
    }
    gamma
}

/// `R_lijk = g_lp(∂_j Γ^p_ik − ∂_k Γ^p_ij + Γ^p_jq Γ^q_ik − Γ^p_kq Γ^q_ij)`.
pub fn riemann<T: Real>(gamma: &[T], dgamma: &[T], g: &[T], n: usize) -> Vec<T> {
    let gm = |p: usize, i: usize, k: usize| gamma[(p * n + i) * n + k];
    let dgm = |l: usize, p: usize, i: usize, k: usize| dgamma[((l * n + p) * n + i) * n + k];
    let mut upper = vec![T::zero(); n * n * n * n];
    for p in 0..n {
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut s = dgm(j, p, i, k) - dgm(k, p, i, j);
                    for q in 0..n {
                        s = s + gm(p, j, q) * gm(q, i, k) - gm(p, k, q) * gm(q, i, j);
                    }
                    upper[((p * n + i) * n + j) * n + k] = s;
                }
            }
        }
    }
    let mut r = vec![T::zero(); n * n * n * n];
    for l in 0..n {
        for rest in 0..n * n * n {
            let mut s = T::zero();
            for p in 0..n {
                s = s + g[l * n + p] * upper[p * n * n * n + rest];
            }
            r[l * n * n * n + rest] = s;
        }
    }
    r
}

/// Gauss curvature `R_1212 · det g^{-1}` of a surface.
pub fn gauss_curvature<T: Real>(riemann: &[T], g: &[T]) -> T {
    // R_1212 sits at flat index ((0*2 + 1)*2 + 0)*2 + 1
    riemann[5] / linalg::det(g, 2)
}

/// Mean curvature and principal curvatures `κ₁ ≥ κ₂` of one surface normal.
pub fn mean_and_principal<T: Real>(g: &[T], h: &[T]) -> Result<(T, T, T)> {
    let ev = linalg::generalized_symmetric_eigenvalues(h, g, 2).ok_or(Error::NotPositiveDefinite { point: vec![] })?;
    if !ev.iter().all(|v| v.is_finite()) {
        return Err(Error::ComplexEigenvalues(f64::NAN));
    }
    Ok((ev[0] + ev[1], ev[0], ev[1]))
}

fn jet_matrix_inverse<T: Real>(a: &[Jet<T>], n: usize) -> Vec<Jet<T>> {
    // Gauss–Jordan without pivoting; only used on the metric, which is SPD.
    let mut m = a.to_vec();
    let nv = a[0].nvars();
    let ord = a[0].order();
    let mut inv: Vec<Jet<T>> = (0..n * n)
        .map(|idx| Jet::constant(nv, ord, if idx / n == idx % n { T::one() } else { T::zero() }))
        .collect();
    for col in 0..n {
        let d = m[col * n + col].recip();
        for k in 0..n {
            m[col * n + k] = m[col * n + k] * d;
            inv[col * n + k] = inv[col * n + k] * d;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = m[r * n + col];
            for k in 0..n {
                let mk = m[col * n + k];
                let ik = inv[col * n + k];
                m[r * n + k] -= f * mk;
                inv[r * n + k] -= f * ik;
            }
        }
    }
    inv
}

fn jet_det<T: Real>(a: &[Jet<T>], n: usize) -> Jet<T> {
    if n == 1 {
        return a[0];
    }
    if n == 2 {
        return a[0] * a[3] - a[1] * a[2];
    }
    let mut acc: Option<Jet<T>> = None;
    for c in 0..n {
        let minor: Vec<Jet<T>> = (1..n)
            .flat_map(|r| (0..n).filter(move |&cc| cc != c).map(move |cc| (r, cc)))
            .map(|(r, cc)| a[r * n + cc])
            .collect();
        let term = a[c] * jet_det(&minor, n - 1);
        acc = Some(match acc {
            None => term,
            Some(s) if c % 2 == 0 => s + term,
            Some(s) => s - term,
        });
    }
    acc.unwrap()
}

fn normalize<T: Real>(v: &[Jet<T>]) -> Vec<Jet<T>> {
    let inv = dot(v, v).sqrt().recip();
    v.iter().map(|c| *c * inv).collect()
}

fn project_out<T: Real>(w: &mut [Jet<T>], basis: &[Vec<Jet<T>>]) {
    for b in basis {
        let c = dot(w, b);
        for (wi, bi) in w.iter_mut().zip(b) {
            *wi -= c * *bi;
        }
    }
}

/// Normal frame as jets: generalized cross product in codimension one,
/// otherwise Gram–Schmidt of chart hints or ambient basis vectors.
fn normal_frame_jets<T: Real>(
    tangents: &[Vec<Jet<T>>],
    hints: Option<&[Vec<Jet<T>>]>,
    point: &[T],
) -> Result<Vec<Vec<Jet<T>>>> {
    let n = tangents.len();
    let m = tangents[0].len();
    let k = m - n;
    let rank_err = || Error::RankDeficient { point: point.iter().map(|v| v.as_f64()).collect(), ratio: 0.0 };
    if k == 1 {
        // ν_a = (−1)^(n+a) det(tangent matrix without row a)
        let mut c = Vec::with_capacity(m);
        for a in 0..m {
            let minor: Vec<Jet<T>> = (0..m)
                .filter(|&r| r != a)
                .flat_map(|r| (0..n).map(move |i| (r, i)))
                .map(|(r, i)| tangents[i][r])
                .collect();
            let d = jet_det(&minor, n);
            c.push(if (n + a) % 2 == 0 { d } else { -d });
        }
        if dot(&c, &c).value().sqrt() <= T::epsilon() {
            return Err(rank_err());
        }
        return Ok(vec![normalize(&c)]);
    }
    let mut ortho: Vec<Vec<Jet<T>>> = Vec::with_capacity(m);
    for t in tangents {
        let mut w = t.clone();
        project_out(&mut w, &ortho);
        if dot(&w, &w).value().sqrt() <= T::epsilon() {
            return Err(rank_err());
        }
        ortho.push(normalize(&w));
    }
    let threshold = T::lit(1e-6);
    let mut frame: Vec<Vec<Jet<T>>> = Vec::with_capacity(k);
    if let Some(hs) = hints {
        for h in hs.iter().take(k) {
            let mut w = h.clone();
            project_out(&mut w, &ortho);
            project_out(&mut w, &frame);
            if dot(&w, &w).value().sqrt() <= threshold {
                break;
            }
            frame.push(normalize(&w));
        }
    }
    if frame.len() < k {
        // fill up greedily with the ambient axis that keeps the largest residual
        let nv = tangents[0][0].nvars();
        let ord = tangents[0][0].order();
        while frame.len() < k {
            let mut best: Option<(T, Vec<Jet<T>>)> = None;
            for axis in 0..m {
                let mut w: Vec<Jet<T>> = (0..m)
                    .map(|r| Jet::constant(nv, ord, if r == axis { T::one() } else { T::zero() }))
                    .collect();
                project_out(&mut w, &ortho);
                project_out(&mut w, &frame);
                let norm = dot(&w, &w).value().sqrt();
                if best.as_ref().map_or(true, |(b, _)| norm > *b * (T::one() + threshold)) {
                    best = Some((norm, w));
                }
            }
            let (norm, w) = best.unwrap();
            if norm <= threshold {
                return Err(rank_err());
            }
            frame.push(normalize(&w));
        }
    }
    Ok(frame)
}

/// Full geometry from a third-order chart jet.
pub fn geometry_from_jet<T: Real>(jet: &Jet3<T>, hints: Option<&[Vec<Jet<T>>]>) -> Result<GeometryState<T>> {
    let n = jet.dim_domain();
    let m = jet.dim_ambient();
    let k = m - n;
    let point_f64 = || jet.point.iter().map(|v| v.as_f64()).collect::<Vec<f64>>();
    // ∂_i y as order-2 jets
    let tangents: Vec<Vec<Jet<T>>> =
        (0..n).map(|i| jet.components.iter().map(|c| c.deriv(i)).collect()).collect();
    let mut g_jet = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            g_jet.push(dot(&tangents[i], &tangents[j]));
        }
    }
    let g: Vec<T> = g_jet.iter().map(|v| v.value()).collect();
    if linalg::cholesky(&g, n).is_none() {
        return Err(Error::NotPositiveDefinite { point: point_f64() });
    }
    let g_inv_jet = jet_matrix_inverse(&g_jet, n);
    // Γ^i_jk as order-1 jets
    let dg_jet: Vec<Vec<Jet<T>>> = (0..n).map(|l| g_jet.iter().map(|v| v.deriv(l)).collect()).collect();
    let half = T::lit(0.5);
    let mut gamma_jet = Vec::with_capacity(n * n * n);
    for i in 0..n {
        for j in 0..n {
            for kk in 0..n {
                let mut s: Option<Jet<T>> = None;
                for l in 0..n {
                    let lower = dg_jet[j][kk * n + l] + dg_jet[kk][j * n + l] - dg_jet[l][j * n + kk];
                    let term = g_inv_jet[i * n + l] * lower;
                    s = Some(match s {
                        None => term,
                        Some(acc) => acc + term,
                    });
                }
                gamma_jet.push(s.unwrap() * half);
            }
        }
    }
    let g_inv: Vec<T> = g_inv_jet.iter().map(|v| v.value()).collect();
    let mut dg = vec![T::zero(); n * n * n];
    for l in 0..n {
        for ij in 0..n * n {
            dg[l * n * n + ij] = dg_jet[l][ij].value();
        }
    }
    let gamma: Vec<T> = gamma_jet.iter().map(|v| v.value()).collect();
    let mut dgamma = vec![T::zero(); n * n * n * n];
    for l in 0..n {
        for (idx, gj) in gamma_jet.iter().enumerate() {
            dgamma[l * n * n * n + idx] = gj.d1(l);
        }
    }
    let riemann_v = riemann(&gamma, &dgamma, &g, n);

    // normal frame (order 2), second fundamental forms (order 1), normal connection (order 1)
    let frame = normal_frame_jets(&tangents, hints, &jet.point)?;
    let second: Vec<Vec<Jet<T>>> = (0..n * n)
        .map(|ij| jet.components.iter().map(|c| c.deriv(ij / n).deriv(ij % n)).collect())
        .collect();
    let mut h = vec![T::zero(); k * n * n];
    let mut dh = vec![T::zero(); k * n * n * n];
    for mu in 0..k {
        for ij in 0..n * n {
            let hj = dot(&second[ij], &frame[mu]);
            h[mu * n * n + ij] = hj.value();
            for l in 0..n {
                dh[(mu * n + l) * n * n + ij] = hj.d1(l);
            }
        }
    }
    let mut a = vec![T::zero(); k * k * n];
    let mut da = vec![T::zero(); k * k * n * n];
    if k > 1 {
        let dframe: Vec<Vec<Vec<Jet<T>>>> =
            frame.iter().map(|nu| (0..n).map(|i| nu.iter().map(|c| c.deriv(i)).collect()).collect()).collect();
        for nu in 0..k {
            for mu in 0..k {
                for i in 0..n {
                    let aj = dot(&dframe[mu][i], &frame[nu]);
                    let idx = (nu * k + mu) * n + i;
                    a[idx] = aj.value();
                    for j in 0..n {
                        da[idx * n + j] = aj.d1(j);
                    }
                }
            }
        }
    }
    Ok(GeometryState {
        n,
        k,
        point: jet.point.clone(),
        y: jet.value(),
        tangents: tangents.iter().map(|t| t.iter().map(|c| c.value()).collect()).collect(),
        det_g: linalg::det(&g, n),
        g,
        g_inv,
        dg,
        gamma,
        dgamma,
        normals: frame.iter().map(|v| v.iter().map(|c| c.value()).collect()).collect(),
        h,
        dh,
        a,
        da,
        riemann: riemann_v,
    })
}

/// Geometry of `chart` at `x` with derivatives from the requested source.
pub fn geometry_at<T: Real>(chart: &dyn Chart<T>, x: &[T], mode: JetMode<T>) -> Result<GeometryState<T>> {
    let jet = jet_with_mode(chart, x, mode)?;
    let hints = chart.normal_hints(&Jet::seed(x, 2));
    geometry_from_jet(&jet, hints.as_deref())
}

/// Geometry at `x` whose first derivatives of `g`, `Γ`, `H` and `A` come from
/// central differences of neighbouring states at spacing `h`.
///
/// The structure equations hold identically for any single consistent jet,
/// so this is the variant whose residuals expose discretisation error.
pub fn geometry_differenced<T: Real>(chart: &dyn Chart<T>, x: &[T], h: T, mode: JetMode<T>) -> Result<GeometryState<T>> {
    let mut s = geometry_at(chart, x, mode)?;
    let (n, k) = (s.n, s.k);
    let two_h = h + h;
    for l in 0..n {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[l] = xp[l] + h;
        xm[l] = xm[l] - h;
        let shifted = |z: &[T]| {
            geometry_at(chart, z, mode).map_err(|e| match e {
                Error::DomainError { .. } => Error::StencilOutOfDomain {
                    point: x.iter().map(|v| v.as_f64()).collect(),
                    axis: l,
                },
                other => other,
            })
        };
        let (sp, sm) = (shifted(&xp)?, shifted(&xm)?);
        let d = |a: T, b: T| (a - b) / two_h;
        for ij in 0..n * n {
            s.dg[l * n * n + ij] = d(sp.g[ij], sm.g[ij]);
        }
        for ijk in 0..n * n * n {
            s.dgamma[l * n * n * n + ijk] = d(sp.gamma[ijk], sm.gamma[ijk]);
        }
        for mu in 0..k {
            for ij in 0..n * n {
                s.dh[(mu * n + l) * n * n + ij] = d(sp.h[mu * n * n + ij], sm.h[mu * n * n + ij]);
            }
        }
        for idx in 0..k * k * n {
            s.da[idx * n + l] = d(sp.a[idx], sm.a[idx]);
        }
    }
    s.riemann = riemann(&s.gamma, &s.dgamma, &s.g, n);
    Ok(s)
}

/// `∇_k g_ij = ∂_k g_ij − Γ^l_ik g_lj − Γ^l_jk g_il`, sup over components.
pub fn metric_compatibility_residual<T: Real>(s: &GeometryState<T>) -> T {
    let n = s.n;
    let mut worst = T::zero();
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut r = s.dg[(k * n + i) * n + j];
                for l in 0..n {
                    r = r - s.gamma_at(l, i, k) * s.g_at(l, j) - s.gamma_at(l, j, k) * s.g_at(i, l);
                }
                worst = worst.max(r.abs());
            }
        }
    }
    worst
}

/// Gauss equation `Σ_μ (H^μ_ij H^μ_kl − H^μ_ik H^μ_jl) − R_iljk`, sup over components.
pub fn gauss_residual<T: Real>(s: &GeometryState<T>) -> T {
    let n = s.n;
    let mut worst = T::zero();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut lhs = T::zero();
                    for mu in 0..s.k {
                        lhs = lhs + s.h_at(mu, i, j) * s.h_at(mu, k, l) - s.h_at(mu, i, k) * s.h_at(mu, j, l);
                    }
                    worst = worst.max((lhs - s.riemann_at(i, l, j, k)).abs());
                }
            }
        }
    }
    worst
}

/// `∇_i H^μ_jl` including no normal-connection terms.
pub fn covariant_dh<T: Real>(s: &GeometryState<T>, mu: usize, i: usize, j: usize, l: usize) -> T {
    let mut v = s.dh_at(mu, i, j, l);
    for p in 0..s.n {
        v = v - s.gamma_at(p, i, j) * s.h_at(mu, p, l) - s.gamma_at(p, i, l) * s.h_at(mu, j, p);
    }
    v
}

/// Codazzi equation `∇_i H^μ_jl − ∇_j H^μ_il − A^ν_{μi} H^ν_jl + A^ν_{μj} H^ν_il`, sup norm.
pub fn codazzi_residual<T: Real>(s: &GeometryState<T>) -> T {
    let n = s.n;
    let mut worst = T::zero();
    for mu in 0..s.k {
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    let mut r = covariant_dh(s, mu, i, j, l) - covariant_dh(s, mu, j, i, l);
                    for nu in 0..s.k {
                        r = r - s.a_at(nu, mu, i) * s.h_at(nu, j, l) + s.a_at(nu, mu, j) * s.h_at(nu, i, l);
                    }
                    worst = worst.max(r.abs());
                }
            }
        }
    }
    worst
}

/// Ricci equation for the normal connection, sup norm; zero in codimension one.
///
/// `∂_i A^ν_{μj} − ∂_j A^ν_{μi} + A^ν_{ηi} A^η_{μj} − A^ν_{ηj} A^η_{μi}
///  = g^{pq}(H^μ_jp H^ν_iq − H^μ_ip H^ν_jq)`
pub fn ricci_residual<T: Real>(s: &GeometryState<T>) -> T {
    let n = s.n;
    let k = s.k;
    let da = |nu: usize, mu: usize, i: usize, j: usize| s.da[((nu * k + mu) * n + i) * n + j];
    let mut worst = T::zero();
    for nu in 0..k {
        for mu in 0..k {
            for i in 0..n {
                for j in 0..n {
                    let mut lhs = da(nu, mu, j, i) - da(nu, mu, i, j);
                    for eta in 0..k {
                        lhs = lhs + s.a_at(nu, eta, i) * s.a_at(eta, mu, j) - s.a_at(nu, eta, j) * s.a_at(eta, mu, i);
                    }
                    let mut rhs = T::zero();
                    for p in 0..n {
                        for q in 0..n {
                            rhs = rhs
                                + s.g_inv_at(p, q)
                                    * (s.h_at(mu, j, p) * s.h_at(nu, i, q) - s.h_at(mu, i, p) * s.h_at(nu, j, q));
                        }
                    }
                    worst = worst.max((lhs - rhs).abs());
                }
            }
        }
    }
    worst
}

/// Sup norms of the structure equations over a set of states, each checked
/// against `tol`.
pub fn gauss_codazzi_residual<T: Real>(states: &[GeometryState<T>], tol: f64) -> ResidualReport {
    let sup = |f: &dyn Fn(&GeometryState<T>) -> T| states.iter().fold(0.0f64, |m, s| m.max(f(s).as_f64()));
    let mut r = ResidualReport::new();
    r.check("metric_compatibility", sup(&metric_compatibility_residual), tol);
    r.check("gauss", sup(&gauss_residual), tol);
    r.check("codazzi", sup(&codazzi_residual), tol);
    if states.first().map_or(false, |s| s.k > 1) {
        r.check("ricci", sup(&ricci_residual), tol);
    }
    r
}
