//! Parametrized embeddings and their derivative jets.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::linalg;
use crate::scalar::Real;

/// Smallest admissible ratio of singular values of the tangent map.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// A map from a parameter domain in `R^n` into `R^(n+k)`.
///
/// Implementations write the embedding once in terms of [`Jet`] operations;
/// derivatives up to third order then come out exactly.
pub trait Chart<T: Real>: Send + Sync {
    fn name(&self) -> String;
    fn dim_domain(&self) -> usize;
    fn dim_ambient(&self) -> usize;
    /// Period of each axis, `None` for non-periodic axes.
    fn periods(&self) -> Vec<Option<T>>;
    /// Closed bounds of each non-periodic axis, `None` when unbounded or periodic.
    fn bounds(&self) -> Vec<Option<(T, T)>>;
    /// Evaluates the embedding on jet-valued coordinates.
    fn embed(&self, x: &[Jet<T>]) -> Vec<Jet<T>>;
    /// Optional ambient vector fields used to seed a smooth normal frame when
    /// the codimension exceeds one.
    fn normal_hints(&self, _x: &[Jet<T>]) -> Option<Vec<Vec<Jet<T>>>> {
        None
    }

    fn codim(&self) -> usize {
        self.dim_ambient() - self.dim_domain()
    }

    /// Plain point evaluation.
    fn value(&self, x: &[T]) -> Vec<T> {
        let xs = Jet::seed(x, 0);
        self.embed(&xs).iter().map(|j| j.value()).collect()
    }
}

/// Value and derivatives (orders 1–3) of every ambient component at one point.
#[derive(Clone, Debug)]
pub struct Jet3<T> {
    pub point: Vec<T>,
    /// One order-3 jet per ambient coordinate.
    pub components: Vec<Jet<T>>,
}

impl<T: Real> Jet3<T> {
    pub fn dim_domain(&self) -> usize {
        self.point.len()
    }

    pub fn dim_ambient(&self) -> usize {
        self.components.len()
    }

    pub fn value(&self) -> Vec<T> {
        self.components.iter().map(|c| c.value()).collect()
    }

    /// `∂_i y` as an ambient vector.
    pub fn d1(&self, i: usize) -> Vec<T> {
        self.components.iter().map(|c| c.d1(i)).collect()
    }

    pub fn d2(&self, i: usize, j: usize) -> Vec<T> {
        self.components.iter().map(|c| c.d2(i, j)).collect()
    }

    pub fn d3(&self, i: usize, j: usize, k: usize) -> Vec<T> {
        self.components.iter().map(|c| c.d3(i, j, k)).collect()
    }

    /// Ratio of smallest to largest singular value of `∂y`.
    pub fn singular_ratio(&self) -> T {
        let n = self.dim_domain();
        let mut g = vec![T::zero(); n * n];
        for i in 0..n {
            let di = self.d1(i);
            for j in 0..n {
                let dj = self.d1(j);
                g[i * n + j] = di.iter().zip(&dj).map(|(a, b)| *a * *b).sum();
            }
        }
        let (ev, _) = linalg::symmetric_eigen(&g, n);
        let max = ev[0];
        let min = ev[n - 1];
        if max <= T::zero() || min <= T::zero() {
            return T::zero();
        }
        (min / max).sqrt()
    }

    fn check_rank(self) -> Result<Self> {
        let ratio = self.singular_ratio();
        if ratio > T::lit(RANK_TOLERANCE) {
            Ok(self)
        } else {
            Err(Error::RankDeficient {
                point: self.point.iter().map(|v| v.as_f64()).collect(),
                ratio: ratio.as_f64(),
            })
        }
    }
}

fn check_domain<T: Real>(bounds: &[Option<(T, T)>], x: &[T]) -> Result<()> {
    for (axis, (b, &xi)) in bounds.iter().zip(x).enumerate() {
        if let Some((lo, hi)) = b {
            if !(xi >= *lo && xi <= *hi) {
                return Err(Error::DomainError { point: x.iter().map(|v| v.as_f64()).collect(), axis });
            }
        }
    }
    Ok(())
}

/// Exact third-order jet of the embedding at `x`.
pub fn eval_jet<T: Real>(chart: &dyn Chart<T>, x: &[T]) -> Result<Jet3<T>> {
    if x.len() != chart.dim_domain() {
        return Err(Error::InvalidInput(format!(
            "point has {} coordinates, chart expects {}",
            x.len(),
            chart.dim_domain()
        )));
    }
    check_domain(&chart.bounds(), x)?;
    let xs = Jet::seed(x, 3);
    let components = chart.embed(&xs);
    Jet3 { point: x.to_vec(), components }.check_rank()
}

/// Third-order jet from 2nd-order central differences of point values.
///
/// Mixed third derivatives use nested central stencils, so every entry is
/// accurate to `O(h^2)`. Stencils reach `x ± 2h` along each axis.
pub fn finite_difference_jet<T: Real>(chart: &dyn Chart<T>, x: &[T], h: T) -> Result<Jet3<T>> {
    let n = chart.dim_domain();
    if !(h > T::zero()) {
        return Err(Error::InvalidInput("finite-difference step must be positive".into()));
    }
    check_domain(&chart.bounds(), x)?;
    for (axis, b) in chart.bounds().iter().enumerate() {
        if let Some((lo, hi)) = b {
            let two_h = h + h;
            if x[axis] - two_h < *lo || x[axis] + two_h > *hi {
                return Err(Error::StencilOutOfDomain {
                    point: x.iter().map(|v| v.as_f64()).collect(),
                    axis,
                });
            }
        }
    }
    let m = chart.dim_ambient();
    let eval = |offsets: &[(usize, i32)]| -> Vec<T> {
        let mut p = x.to_vec();
        for &(axis, k) in offsets {
            p[axis] = p[axis] + h * T::from_i32(k).unwrap();
        }
        chart.value(&p)
    };
    let two = T::lit(2.0);
    let h2 = h * h;
    let h3 = h2 * h;
    let f0 = eval(&[]);
    let mut d1 = vec![vec![T::zero(); n]; m];
    let mut d2 = vec![vec![T::zero(); n * n]; m];
    let mut d3 = vec![vec![T::zero(); n * n * n]; m];

    // second differences along i, sampled at shifted points, reused for d3_iij
    let second = |i: usize, shift: &[(usize, i32)]| -> Vec<T> {
        let mut plus = shift.to_vec();
        plus.push((i, 1));
        let mut minus = shift.to_vec();
        minus.push((i, -1));
        let fp = eval(&plus);
        let fm = eval(&minus);
        let fc = eval(shift);
        (0..m).map(|a| (fp[a] - two * fc[a] + fm[a]) / h2).collect()
    };

    for i in 0..n {
        let fp = eval(&[(i, 1)]);
        let fm = eval(&[(i, -1)]);
        let fp2 = eval(&[(i, 2)]);
        let fm2 = eval(&[(i, -2)]);
        for a in 0..m {
            d1[a][i] = (fp[a] - fm[a]) / (two * h);
            d2[a][i * n + i] = (fp[a] - two * f0[a] + fm[a]) / h2;
            d3[a][(i * n + i) * n + i] = (fp2[a] - two * fp[a] + two * fm[a] - fm2[a]) / (two * h3);
        }
        for j in 0..n {
            if j == i {
                continue;
            }
            if j > i {
                let fpp = eval(&[(i, 1), (j, 1)]);
                let fpm = eval(&[(i, 1), (j, -1)]);
                let fmp = eval(&[(i, -1), (j, 1)]);
                let fmm = eval(&[(i, -1), (j, -1)]);
                for a in 0..m {
                    let v = (fpp[a] - fpm[a] - fmp[a] + fmm[a]) / (T::lit(4.0) * h2);
                    d2[a][i * n + j] = v;
                    d2[a][j * n + i] = v;
                }
            }
            // ∂_j ∂_i ∂_i
            let sp = second(i, &[(j, 1)]);
            let sm = second(i, &[(j, -1)]);
            for a in 0..m {
                let v = (sp[a] - sm[a]) / (two * h);
                d3[a][(i * n + i) * n + j] = v;
                d3[a][(i * n + j) * n + i] = v;
                d3[a][(j * n + i) * n + i] = v;
            }
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            for k in (j + 1)..n {
                let mut acc = vec![T::zero(); m];
                for si in [-1i32, 1] {
                    for sj in [-1i32, 1] {
                        for sk in [-1i32, 1] {
                            let f = eval(&[(i, si), (j, sj), (k, sk)]);
                            let s = T::from_i32(si * sj * sk).unwrap();
                            for a in 0..m {
                                acc[a] = acc[a] + s * f[a];
                            }
                        }
                    }
                }
                for a in 0..m {
                    let v = acc[a] / (T::lit(8.0) * h3);
                    for &(p, q, r) in &[(i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)] {
                        d3[a][(p * n + q) * n + r] = v;
                    }
                }
            }
        }
    }
    let components = (0..m)
        .map(|a| Jet::from_derivatives(f0[a], &d1[a], Some(&d2[a]), Some(&d3[a])))
        .collect();
    Jet3 { point: x.to_vec(), components }.check_rank()
}

/// Where derivative jets come from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum JetMode<T> {
    Analytic,
    /// Central differences with the given step.
    FiniteDifference(T),
}

/// Evaluates the chart jet in the requested mode.
pub fn jet_with_mode<T: Real>(chart: &dyn Chart<T>, x: &[T], mode: JetMode<T>) -> Result<Jet3<T>> {
    match mode {
        JetMode::Analytic => eval_jet(chart, x),
        JetMode::FiniteDifference(h) => finite_difference_jet(chart, x, h),
    }
}

/// Charts shipped with the library.
#[derive(Clone, Debug, PartialEq)]
pub enum BuiltinChart<T> {
    /// `x ↦ (x, 0)` in `R^(n+k)`.
    Plane { n: usize, k: usize },
    /// Circular cylinder of radius `a` around the third axis.
    Cylinder { a: T },
    /// `r (cos x2 cos x1, cos x2 sin x1, sin x2)`.
    Sphere { r: T },
    /// `((c + a cos x2) cos x1, (c + a cos x2) sin x1, a sin x2)`, `c > a > 0`.
    GeometricTorus { a: T, c: T },
    /// Graph `x ↦ (x, F_1(x), .., F_k(x))` of fixed quadratic-plus-wave functions.
    Graph { n: usize, k: usize, curv: T, amp: T },
    /// `r/√2 (cos x1, sin x1, cos x2, sin x2)` in `R^4`.
    CliffordTorus { r: T },
    /// Round `n`-sphere of radius `r` in hyperspherical coordinates.
    RoundSphere { n: usize, r: T },
}

/// Names accepted by [`builtin_chart`].
pub const BUILTIN_NAMES: &[&str] =
    &["plane", "cylinder", "sphere", "geometric_torus", "graph", "clifford_torus", "round_sphere_nd"];

fn param<T: Real>(p: &BTreeMap<String, f64>, key: &str, default: Option<f64>) -> Result<T> {
    match p.get(key).copied().or(default) {
        Some(v) if v.is_finite() => Ok(T::lit(v)),
        Some(v) => Err(Error::BadParams(format!("{key} = {v} is not finite"))),
        None => Err(Error::BadParams(format!("missing parameter `{key}`"))),
    }
}

fn int_param(p: &BTreeMap<String, f64>, key: &str, default: usize) -> Result<usize> {
    match p.get(key) {
        None => Ok(default),
        Some(&v) if v >= 1.0 && v.fract() == 0.0 && v <= 4.0 => Ok(v as usize),
        Some(&v) => Err(Error::BadParams(format!("{key} = {v} must be an integer in 1..=4"))),
    }
}

impl<T: Real> BuiltinChart<T> {
    /// Builds a chart from named parameters, validating them.
    pub fn from_params(name: &str, p: &BTreeMap<String, f64>) -> Result<Self> {
        let known: &[&str] = match name {
            "plane" => &["n", "k"],
            "cylinder" => &["a"],
            "sphere" => &["r"],
            "geometric_torus" => &["a", "c"],
            "graph" => &["n", "k", "curv", "amp"],
            "clifford_torus" => &["r"],
            "round_sphere_nd" => &["n", "r"],
            _ => return Err(Error::UnknownChart(name.to_string())),
        };
        if let Some(bad) = p.keys().find(|k| !known.contains(&k.as_str())) {
            return Err(Error::BadParams(format!("unknown parameter `{bad}` for chart {name}")));
        }
        let chart = match name {
            "plane" => BuiltinChart::Plane { n: int_param(p, "n", 2)?, k: int_param(p, "k", 1)? },
            "cylinder" => BuiltinChart::Cylinder { a: param(p, "a", Some(1.0))? },
            "sphere" => BuiltinChart::Sphere { r: param(p, "r", Some(1.0))? },
            "geometric_torus" => {
                BuiltinChart::GeometricTorus { a: param(p, "a", Some(1.0))?, c: param(p, "c", Some(2.0))? }
            }
            "graph" => BuiltinChart::Graph {
                n: int_param(p, "n", 2)?,
                k: int_param(p, "k", 1)?,
                curv: param(p, "curv", Some(0.4))?,
                amp: param(p, "amp", Some(0.15))?,
            },
            "clifford_torus" => BuiltinChart::CliffordTorus { r: param(p, "r", Some(1.0))? },
            "round_sphere_nd" => {
                BuiltinChart::RoundSphere { n: int_param(p, "n", 2)?, r: param(p, "r", Some(1.0))? }
            }
            _ => unreachable!(),
        };
        chart.validate()?;
        Ok(chart)
    }

    fn validate(&self) -> Result<()> {
        let pos = |v: T, what: &str| {
            if v > T::zero() {
                Ok(())
            } else {
                Err(Error::BadParams(format!("{what} must be positive, got {v}")))
            }
        };
        match self {
            BuiltinChart::Plane { n, k } => {
                if n + k > 5 {
                    return Err(Error::BadParams("plane dimension n + k must be at most 5".into()));
                }
                Ok(())
            }
            BuiltinChart::Cylinder { a } => pos(*a, "radius a"),
            BuiltinChart::Sphere { r } | BuiltinChart::CliffordTorus { r } => pos(*r, "radius r"),
            BuiltinChart::RoundSphere { n, r } => {
                if *n < 2 || *n > 4 {
                    return Err(Error::BadParams(format!("round sphere dimension {n} not in 2..=4")));
                }
                pos(*r, "radius r")
            }
            BuiltinChart::GeometricTorus { a, c } => {
                pos(*a, "tube radius a")?;
                if *c > *a {
                    Ok(())
                } else {
                    Err(Error::BadParams(format!("torus requires c > a > 0, got a = {a}, c = {c}")))
                }
            }
            BuiltinChart::Graph { n, k, .. } => {
                if n + k > 6 {
                    return Err(Error::BadParams("graph dimension n + k must be at most 6".into()));
                }
                Ok(())
            }
        }
    }
}

/// Looks up a builtin chart from a positional parameter list.
///
/// Parameter order: plane `[n, k]`, cylinder `[a]`, sphere `[r]`,
/// geometric_torus `[a, c]`, graph `[n, k, curv, amp]`, clifford_torus `[r]`,
/// round_sphere_nd `[n, r]`. Missing trailing values take their defaults.
pub fn builtin_chart<T: Real>(name: &str, params: &[f64]) -> Result<BuiltinChart<T>> {
    let keys: &[&str] = match name {
        "plane" => &["n", "k"],
        "cylinder" => &["a"],
        "sphere" => &["r"],
        "geometric_torus" => &["a", "c"],
        "graph" => &["n", "k", "curv", "amp"],
        "clifford_torus" => &["r"],
        "round_sphere_nd" => &["n", "r"],
        _ => return Err(Error::UnknownChart(name.to_string())),
    };
    if params.len() > keys.len() {
        return Err(Error::BadParams(format!(
            "chart {name} takes at most {} parameters, got {}",
            keys.len(),
            params.len()
        )));
    }
    let map = keys.iter().zip(params).map(|(k, v)| (k.to_string(), *v)).collect();
    BuiltinChart::from_params(name, &map)
}

impl<T: Real> Chart<T> for BuiltinChart<T> {
    fn name(&self) -> String {
        match self {
            BuiltinChart::Plane { .. } => "plane",
            BuiltinChart::Cylinder { .. } => "cylinder",
            BuiltinChart::Sphere { .. } => "sphere",
            BuiltinChart::GeometricTorus { .. } => "geometric_torus",
            BuiltinChart::Graph { .. } => "graph",
            BuiltinChart::CliffordTorus { .. } => "clifford_torus",
            BuiltinChart::RoundSphere { .. } => "round_sphere_nd",
        }
        .to_string()
    }

    fn dim_domain(&self) -> usize {
        match self {
            BuiltinChart::Plane { n, .. } | BuiltinChart::Graph { n, .. } | BuiltinChart::RoundSphere { n, .. } => *n,
            _ => 2,
        }
    }

    fn dim_ambient(&self) -> usize {
        match self {
            BuiltinChart::Plane { n, k } | BuiltinChart::Graph { n, k, .. } => n + k,
            BuiltinChart::RoundSphere { n, .. } => n + 1,
            BuiltinChart::CliffordTorus { .. } => 4,
            _ => 3,
        }
    }

    fn periods(&self) -> Vec<Option<T>> {
        let tau = Some(T::TAU());
        match self {
            BuiltinChart::Plane { n, .. } | BuiltinChart::Graph { n, .. } => vec![None; *n],
            BuiltinChart::Cylinder { .. } | BuiltinChart::Sphere { .. } => vec![tau, None],
            BuiltinChart::RoundSphere { n, .. } => {
                let mut p = vec![None; *n];
                p[0] = tau;
                p
            }
            BuiltinChart::GeometricTorus { .. } | BuiltinChart::CliffordTorus { .. } => vec![tau, tau],
        }
    }

    fn bounds(&self) -> Vec<Option<(T, T)>> {
        let half = T::FRAC_PI_2();
        match self {
            BuiltinChart::Sphere { .. } => vec![None, Some((-half, half))],
            BuiltinChart::RoundSphere { n, .. } => {
                let mut b = vec![Some((-half, half)); *n];
                b[0] = None;
                b
            }
            _ => vec![None; self.dim_domain()],
        }
    }

    fn embed(&self, x: &[Jet<T>]) -> Vec<Jet<T>> {
        let nv = x[0].nvars();
        let order = x[0].order();
        let zero = Jet::constant(nv, order, T::zero());
        match self {
            BuiltinChart::Plane { n, k } => {
                let mut y = x[..*n].to_vec();
                y.extend(std::iter::repeat(zero).take(*k));
                y
            }
            BuiltinChart::Cylinder { a } => {
                vec![x[0].cos() * *a, x[0].sin() * *a, x[1]]
            }
            BuiltinChart::Sphere { r } => {
                let c2 = x[1].cos();
                vec![c2 * x[0].cos() * *r, c2 * x[0].sin() * *r, x[1].sin() * *r]
            }
            BuiltinChart::GeometricTorus { a, c } => {
                let ring = x[1].cos() * *a + *c;
                vec![ring * x[0].cos(), ring * x[0].sin(), x[1].sin() * *a]
            }
            BuiltinChart::Graph { n, k, curv, amp } => {
                let mut y = x[..*n].to_vec();
                for mu in 0..*k {
                    y.push(graph_height(x, *n, mu, *curv, *amp));
                }
                y
            }
            BuiltinChart::CliffordTorus { r } => {
                let s = *r / T::SQRT_2();
                vec![x[0].cos() * s, x[0].sin() * s, x[1].cos() * s, x[1].sin() * s]
            }
            BuiltinChart::RoundSphere { n, r } => {
                let n = *n;
                // y_1 = r Π_{j≥2} cos x_j cos x_1, y_2 = r Π_{j≥2} cos x_j sin x_1,
                // y_{m+1} = r Π_{j>m} cos x_j sin x_m
                let cos: Vec<Jet<T>> = x.iter().map(|v| v.cos()).collect();
                let sin: Vec<Jet<T>> = x.iter().map(|v| v.sin()).collect();
                let tail = |from: usize| -> Jet<T> {
                    let mut p = Jet::constant(nv, order, *r);
                    for c in cos.iter().take(n).skip(from) {
                        p *= *c;
                    }
                    p
                };
                let mut y = Vec::with_capacity(n + 1);
                let t1 = tail(1);
                y.push(t1 * cos[0]);
                y.push(t1 * sin[0]);
                for m in 1..n {
                    y.push(tail(m + 1) * sin[m]);
                }
                y
            }
        }
    }

    fn normal_hints(&self, x: &[Jet<T>]) -> Option<Vec<Vec<Jet<T>>>> {
        match self {
            BuiltinChart::CliffordTorus { .. } => {
                let z = Jet::constant(x[0].nvars(), x[0].order(), T::zero());
                Some(vec![
                    vec![x[0].cos(), x[0].sin(), z, z],
                    vec![z, z, x[1].cos(), x[1].sin()],
                ])
            }
            _ => None,
        }
    }
}

/// Height function of the `mu`-th graph component.
fn graph_height<T: Real>(x: &[Jet<T>], n: usize, mu: usize, curv: T, amp: T) -> Jet<T> {
    let nv = x[0].nvars();
    let order = x[0].order();
    let mut f = Jet::constant(nv, order, T::zero());
    let mut phase = Jet::constant(nv, order, T::lit(0.3) * T::from_usize_lossy(mu));
    for i in 0..n {
        let alpha = T::one() + T::lit(0.5) * T::from_usize_lossy(i) - T::lit(0.7) * T::from_usize_lossy(mu);
        f += x[i] * x[i] * (curv * alpha * T::lit(0.5));
        let beta = T::from_usize_lossy(i + 1 + mu) / T::from_usize_lossy(n);
        phase += x[i] * beta;
    }
    if n > 1 {
        f += x[0] * x[n - 1] * (curv * T::lit(0.3) * T::from_usize_lossy(mu + 1));
    }
    f + phase.sin() * amp
}
