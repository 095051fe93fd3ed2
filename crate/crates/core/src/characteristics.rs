//! Density transport along characteristics of a steady continuity equation.
//!
//! The equation is `∂_k(σ a^k) = 0` with `σ = √ρ` and a flux field `a`.
//! Along `dz/dt = a(z)` this gives `ρ(z(t)) = ρ(z(0)) exp(−2 ∫ div a dt)`.
//! Paths integrate `(z, ∫div a)` together with classical RK4.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Flux and its divergence at one point.
#[derive(Clone, Debug)]
pub struct FlowSample<T> {
    pub a: Vec<T>,
    pub div: T,
    /// Smallest diagonal entry of the rank-one form the flux is built from.
    pub min_diag: T,
}

pub trait FlowField<T: Real>: Sync {
    fn dim(&self) -> usize;
    fn periods(&self) -> Vec<Option<T>>;
    fn sample(&self, z: &[T]) -> Result<FlowSample<T>>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Termination {
    TimeLimit,
    LeftDomain,
    /// Flux vanished: static fluid, density stays at its seed value.
    Stagnated,
    /// Some diagonal entry of `f` dropped below `−tol`.
    ExitedPositivityRegion,
}

#[derive(Clone, Debug)]
pub struct CharacteristicPath<T> {
    pub seed: Vec<T>,
    pub rho0: T,
    pub times: Vec<T>,
    pub nodes: Vec<Vec<T>>,
    pub rho_along: Vec<T>,
    pub termination: Termination,
}

#[derive(Clone, Debug)]
pub struct PathOptions<T> {
    pub t_max: T,
    pub dt: T,
    /// Box the paths must stay in; `None` on unbounded or periodic axes.
    pub bounds: Vec<Option<(T, T)>>,
    pub positivity_tol: T,
    pub stagnation_tol: T,
}

impl<T: Real> PathOptions<T> {
    pub fn new(t_max: T, dt: T, bounds: Vec<Option<(T, T)>>) -> Self {
        PathOptions { t_max, dt, bounds, positivity_tol: T::lit(1e-10), stagnation_tol: T::lit(1e-12) }
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > T::zero()) || !(self.t_max >= T::zero()) {
            return Err(Error::InvalidInput(format!("need dt > 0 and t_max >= 0, got dt = {}, t_max = {}", self.dt, self.t_max)));
        }
        Ok(())
    }

    fn inside(&self, z: &[T]) -> bool {
        self.bounds.iter().zip(z).all(|(b, &x)| b.map_or(true, |(lo, hi)| x >= lo && x <= hi))
    }
}

enum Step<T> {
    Ok(Vec<T>, T),
    Stop(Termination),
}

fn norm<T: Real>(v: &[T]) -> T {
    v.iter().map(|x| *x * *x).sum::<T>().sqrt()
}

/// Evaluates the field, folding geometric failures into a termination.
fn probe<T: Real>(field: &dyn FlowField<T>, z: &[T], opts: &PathOptions<T>) -> std::result::Result<FlowSample<T>, Termination> {
    if !opts.inside(z) {
        return Err(Termination::LeftDomain);
    }
    match field.sample(z) {
        Ok(s) if s.min_diag < -opts.positivity_tol => Err(Termination::ExitedPositivityRegion),
        Ok(s) if s.a.iter().all(|v| v.is_finite()) && s.div.is_finite() => Ok(s),
        _ => Err(Termination::LeftDomain),
    }
}

/// One RK4 step of `(z, I)` with `z' = dir·a`, `I' = div a`.
fn rk4<T: Real>(field: &dyn FlowField<T>, z: &[T], dt: T, dir: T, opts: &PathOptions<T>) -> Step<T> {
    let half = T::lit(0.5);
    let n = z.len();
    let shift = |base: &[T], k: &[T], s: T| -> Vec<T> { (0..n).map(|i| base[i] + k[i] * s).collect() };
    let s1 = match probe(field, z, opts) {
        Ok(s) => s,
        Err(t) => return Step::Stop(t),
    };
    let k1: Vec<T> = s1.a.iter().map(|v| *v * dir).collect();
    let s2 = match probe(field, &shift(z, &k1, dt * half), opts) {
        Ok(s) => s,
        Err(t) => return Step::Stop(t),
    };
    let k2: Vec<T> = s2.a.iter().map(|v| *v * dir).collect();
    let s3 = match probe(field, &shift(z, &k2, dt * half), opts) {
        Ok(s) => s,
        Err(t) => return Step::Stop(t),
    };
    let k3: Vec<T> = s3.a.iter().map(|v| *v * dir).collect();
    let s4 = match probe(field, &shift(z, &k3, dt), opts) {
        Ok(s) => s,
        Err(t) => return Step::Stop(t),
    };
    let k4: Vec<T> = s4.a.iter().map(|v| *v * dir).collect();
    let sixth = dt / T::lit(6.0);
    let two = T::lit(2.0);
    let z_new = (0..n).map(|i| z[i] + sixth * (k1[i] + two * k2[i] + two * k3[i] + k4[i])).collect();
    let di = sixth * (s1.div + two * s2.div + two * s3.div + s4.div);
    Step::Ok(z_new, di)
}

/// Integrates one characteristic forward from `seed` with density `rho0`.
pub fn integrate_path<T: Real>(
    field: &dyn FlowField<T>,
    seed: &[T],
    rho0: T,
    opts: &PathOptions<T>,
) -> Result<CharacteristicPath<T>> {
    if !(rho0 > T::zero()) {
        return Err(Error::NonPositiveSeed(rho0.as_f64()));
    }
    opts.validate()?;
    let two = T::lit(2.0);
    let mut z = seed.to_vec();
    let mut t = T::zero();
    let mut integral = T::zero();
    let mut path = CharacteristicPath {
        seed: seed.to_vec(),
        rho0,
        times: vec![t],
        nodes: vec![z.clone()],
        rho_along: vec![rho0],
        termination: Termination::TimeLimit,
    };
    match probe(field, &z, opts) {
        Err(term) => {
            path.termination = term;
            return Ok(path);
        }
        Ok(s) if norm(&s.a) <= opts.stagnation_tol => {
            path.termination = Termination::Stagnated;
            return Ok(path);
        }
        Ok(_) => {}
    }
    while t < opts.t_max {
        let dt = opts.dt.min(opts.t_max - t);
        match rk4(field, &z, dt, T::one(), opts) {
            Step::Ok(zn, di) => {
                z = zn;
                integral = integral + di;
                t = t + dt;
                path.times.push(t);
                path.nodes.push(z.clone());
                path.rho_along.push(rho0 * (-two * integral).exp());
            }
            Step::Stop(term) => {
                path.termination = term;
                return Ok(path);
            }
        }
    }
    Ok(path)
}

/// Integrates every seed; paths are returned in seed order.
pub fn solve_paths<T: Real>(
    field: &dyn FlowField<T>,
    seeds: &[(Vec<T>, T)],
    opts: &PathOptions<T>,
) -> Result<Vec<CharacteristicPath<T>>> {
    if let Some((_, r)) = seeds.iter().find(|(_, r)| !(*r > T::zero())) {
        return Err(Error::NonPositiveSeed(r.as_f64()));
    }
    seeds.par_iter().map(|(z, r)| integrate_path(field, z, *r, opts)).collect()
}

/// Hypersurface `z[axis] = value` carrying the initial density.
#[derive(Clone, Debug)]
pub struct Inflow<T> {
    pub axis: usize,
    pub value: T,
    /// Density samples on the inflow surface; interpolated by inverse distance.
    pub seeds: Vec<(Vec<T>, T)>,
}

impl<T: Real> Inflow<T> {
    /// Initial density at a point of the inflow surface.
    pub fn rho0(&self, z: &[T], periods: &[Option<T>]) -> T {
        idw(self.seeds.iter().map(|(p, r)| (p.as_slice(), *r)), z, periods, 4)
    }
}

fn wrapped_dist2<T: Real>(a: &[T], b: &[T], periods: &[Option<T>]) -> T {
    a.iter()
        .zip(b)
        .enumerate()
        .map(|(i, (x, y))| {
            let mut d = (*x - *y).abs();
            if let Some(Some(p)) = periods.get(i) {
                d = d % *p;
                d = d.min(*p - d);
            }
            d * d
        })
        .sum()
}

/// Inverse-distance weighting over the `k` nearest samples.
fn idw<'a, T: Real>(samples: impl Iterator<Item = (&'a [T], T)>, z: &[T], periods: &[Option<T>], k: usize) -> T {
    let mut near: Vec<(T, T)> = samples.map(|(p, v)| (wrapped_dist2(p, z, periods), v)).collect();
    near.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    near.truncate(k);
    if near.is_empty() {
        return T::nan();
    }
    if near[0].0 <= T::epsilon() * T::epsilon() {
        return near[0].1;
    }
    let (mut num, mut den) = (T::zero(), T::zero());
    for (d2, v) in near {
        let w = d2.recip();
        num = num + w * v;
        den = den + w;
    }
    num / den
}

/// Density at `z` by inverse-distance weighting of path samples (first-order
/// accurate; kept for comparison with the characteristic resampler).
pub fn density_idw<T: Real>(paths: &[CharacteristicPath<T>], z: &[T], periods: &[Option<T>], k: usize) -> T {
    let samples = paths
        .iter()
        .flat_map(|p| p.nodes.iter().zip(&p.rho_along).map(|(n, r)| (n.as_slice(), *r)));
    idw(samples, z, periods, k)
}

/// Density at `z` by following its characteristic to the inflow surface.
///
/// Tries the backward direction first, then forward. Returns `None` when
/// neither reaches the surface within `t_max`; stagnant points take the
/// inflow density evaluated at `z` itself.
pub fn density_along_characteristic<T: Real>(
    field: &dyn FlowField<T>,
    z0: &[T],
    inflow: &Inflow<T>,
    opts: &PathOptions<T>,
) -> Result<Option<T>> {
    opts.validate()?;
    let periods = field.periods();
    let axis = inflow.axis;
    let period = periods[axis];
    // signed offset from the surface, wrapped into (-P/2, P/2] on periodic axes
    let offset = |x: T| -> T {
        let d = x - inflow.value;
        match period {
            Some(p) => {
                let m = (d / p).round();
                d - m * p
            }
            None => d,
        }
    };
    if offset(z0[axis]).abs() <= T::epsilon() * (T::one() + inflow.value.abs()) * T::lit(8.0) {
        return Ok(Some(inflow.rho0(z0, &periods)));
    }
    let start = match probe(field, z0, opts) {
        Ok(s) => s,
        Err(Termination::ExitedPositivityRegion) => {
            return Err(Error::PathExitsPositivityRegion {
                seed: z0.iter().map(|v| v.as_f64()).collect(),
                point: z0.iter().map(|v| v.as_f64()).collect(),
            })
        }
        Err(_) => return Ok(None),
    };
    if norm(&start.a) <= opts.stagnation_tol {
        return Ok(Some(inflow.rho0(z0, &periods)));
    }
    let two = T::lit(2.0);
    for dir in [-T::one(), T::one()] {
        let mut z = z0.to_vec();
        let mut integral = T::zero();
        let mut t = T::zero();
        // unwrapped distance travelled towards the surface along `axis`
        let mut prev_off = offset(z[axis]);
        while t < opts.t_max {
            let dt = opts.dt.min(opts.t_max - t);
            let (zn, di) = match rk4(field, &z, dt, dir, opts) {
                Step::Ok(zn, di) => (zn, di),
                Step::Stop(Termination::ExitedPositivityRegion) => {
                    return Err(Error::PathExitsPositivityRegion {
                        seed: z0.iter().map(|v| v.as_f64()).collect(),
                        point: z.iter().map(|v| v.as_f64()).collect(),
                    })
                }
                Step::Stop(_) => break,
            };
            let moved = zn[axis] - z[axis];
            let new_off = prev_off + moved;
            if prev_off == T::zero() || (prev_off > T::zero()) != (new_off > T::zero()) || new_off == T::zero() {
                // crossed: shorten the final step so it lands on the surface
                // (Illinois regula falsi on the step length)
                let (mut lo, mut f_lo) = (T::zero(), prev_off);
                let (mut hi, mut f_hi) = (dt, new_off);
                let mut best = (zn.clone(), di);
                let tol = T::epsilon() * T::lit(16.0) * (T::one() + inflow.value.abs());
                let mut side = 0i8;
                let mut bisect = false;
                for _ in 0..60 {
                    if f_hi.abs() <= tol || hi - lo <= T::epsilon() * dt {
                        break;
                    }
                    let mut mid = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
                    if bisect || !(mid > lo && mid < hi) {
                        mid = (lo + hi) * T::lit(0.5);
                    }
                    match rk4(field, &z, mid, dir, opts) {
                        Step::Ok(zm, dm) => {
                            let f_m = prev_off + (zm[axis] - z[axis]);
                            best = (zm, dm);
                            if f_m.abs() <= tol {
                                break;
                            }
                            if (f_m > T::zero()) == (f_lo > T::zero()) {
                                lo = mid;
                                f_lo = f_m;
                                if side == -1 {
                                    f_hi = f_hi * T::lit(0.5);
                                }
                                side = -1;
                            } else {
                                hi = mid;
                                f_hi = f_m;
                                if side == 1 {
                                    f_lo = f_lo * T::lit(0.5);
                                }
                                side = 1;
                            }
                        }
                        // the stage left the domain; `f_hi` is stale, so bisect
                        Step::Stop(_) => {
                            hi = mid;
                            bisect = true;
                        }
                    }
                }
                let (zh, dh) = best;
                let total = integral + dh;
                let rho0 = inflow.rho0(&zh, &periods);
                return Ok(Some(rho0 * (two * dir * total).exp()));
            }
            z = zn;
            integral = integral + di;
            prev_off = new_off;
            t = t + dt;
        }
    }
    Ok(None)
}
