//! Truncated multivariate Taylor arithmetic ("jets") up to total degree three.
//!
//! A [`Jet`] carries the Taylor coefficients of a function of up to
//! [`MAX_VARS`] variables around a base point. Arithmetic propagates them
//! exactly, so a chart written once in terms of `Jet` operations yields its
//! first, second and third derivatives without differencing error.
//!
//! Every jet has an `order`: the highest total degree whose coefficients are
//! valid. Differentiating lowers it by one and binary operations keep the
//! minimum of the operands, so stale top-degree coefficients never leak into
//! lower-order results.

use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use std::sync::OnceLock;

use crate::scalar::Real;

/// Maximum number of independent variables.
pub const MAX_VARS: usize = 4;
/// Maximum total degree carried.
pub const MAX_ORDER: usize = 3;
/// Coefficient capacity: binomial(MAX_VARS + MAX_ORDER, MAX_ORDER).
pub const MAX_COEFFS: usize = 35;

struct Tables {
    /// Number of monomials of total degree `<= d`, for d = 0..=3.
    len_upto: [usize; MAX_ORDER + 1],
    /// Product triplets (a, b, c), sorted by degree of c.
    mul: Vec<(u8, u8, u8)>,
    /// Number of product triplets with result degree `<= d`.
    mul_upto: [usize; MAX_ORDER + 1],
    /// Per variable: (source, destination, factor) for the partial derivative.
    deriv: Vec<Vec<(u8, u8, u8)>>,
    idx1: [u8; MAX_VARS],
    idx2: [[u8; MAX_VARS]; MAX_VARS],
    idx3: [[[u8; MAX_VARS]; MAX_VARS]; MAX_VARS],
    /// Multi-index factorial alpha! per monomial.
    fact: Vec<u8>,
}

fn build_tables(n: usize) -> Tables {
    let mut monos: Vec<[u8; MAX_VARS]> = Vec::new();
    let mut len_upto = [0usize; MAX_ORDER + 1];
    for deg in 0..=MAX_ORDER {
        // lexicographic enumeration of exponent vectors with the given degree
        let mut stack = vec![([0u8; MAX_VARS], 0usize, deg)];
        let mut level = Vec::new();
        while let Some((e, var, left)) = stack.pop() {
            if n == 0 || var == n - 1 {
                if n == 0 {
                    if left == 0 {
                        level.push(e);
                    }
                } else {
                    let mut e2 = e;
                    e2[var] = left as u8;
                    level.push(e2);
                }
                continue;
            }
            for k in 0..=left {
                let mut e2 = e;
                e2[var] = k as u8;
                stack.push((e2, var + 1, left - k));
            }
        }
        level.sort_by(|a, b| b.cmp(a));
        monos.extend(level);
        len_upto[deg] = monos.len();
    }
    let find = |e: &[u8; MAX_VARS]| monos.iter().position(|m| m == e);
    let degree = |e: &[u8; MAX_VARS]| e.iter().map(|&v| v as usize).sum::<usize>();

    let mut mul = Vec::new();
    for (a, ea) in monos.iter().enumerate() {
        for (b, eb) in monos.iter().enumerate() {
            if degree(ea) + degree(eb) > MAX_ORDER {
                continue;
            }
            let mut ec = [0u8; MAX_VARS];
            for v in 0..MAX_VARS {
                ec[v] = ea[v] + eb[v];
            }
            let c = find(&ec).expect("product monomial present");
            mul.push((a as u8, b as u8, c as u8));
        }
    }
    mul.sort_by_key(|&(_, _, c)| degree(&monos[c as usize]));
    let mut mul_upto = [0usize; MAX_ORDER + 1];
    for d in 0..=MAX_ORDER {
        mul_upto[d] = mul
            .iter()
            .filter(|&&(_, _, c)| degree(&monos[c as usize]) <= d)
            .count();
    }

    let mut deriv = Vec::with_capacity(n);
    for v in 0..n {
        let mut list = Vec::new();
        for (s, e) in monos.iter().enumerate() {
            if e[v] == 0 {
                continue;
            }
            let mut d = *e;
            d[v] -= 1;
            let t = find(&d).expect("derivative monomial present");
            list.push((s as u8, t as u8, e[v]));
        }
        deriv.push(list);
    }

    let mut idx1 = [0u8; MAX_VARS];
    let mut idx2 = [[0u8; MAX_VARS]; MAX_VARS];
    let mut idx3 = [[[0u8; MAX_VARS]; MAX_VARS]; MAX_VARS];
    for i in 0..n {
        let mut e = [0u8; MAX_VARS];
        e[i] += 1;
        idx1[i] = find(&e).unwrap() as u8;
        for j in 0..n {
            let mut e2 = e;
            e2[j] += 1;
            idx2[i][j] = find(&e2).unwrap() as u8;
            for k in 0..n {
                let mut e3 = e2;
                e3[k] += 1;
                idx3[i][j][k] = find(&e3).unwrap() as u8;
            }
        }
    }
    let fact = monos
        .iter()
        .map(|e| e.iter().map(|&k| (1..=k).product::<u8>().max(1)).product())
        .collect();

    Tables { len_upto, mul, mul_upto, deriv, idx1, idx2, idx3, fact }
}

fn tables(n: usize) -> &'static Tables {
    static TABLES: OnceLock<Vec<Tables>> = OnceLock::new();
    &TABLES.get_or_init(|| (0..=MAX_VARS).map(build_tables).collect())[n]
}

/// Number of Taylor coefficients for `n` variables up to total degree `order`.
pub fn coeff_count(n: usize, order: usize) -> usize {
    tables(n).len_upto[order]
}

/// Truncated Taylor polynomial in up to four variables.
#[derive(Clone, Copy, Debug)]
pub struct Jet<T> {
    c: [T; MAX_COEFFS],
    nvars: u8,
    order: u8,
}

impl<T: Real> Jet<T> {
    /// Constant function.
    pub fn constant(nvars: usize, order: usize, value: T) -> Self {
        assert!(nvars <= MAX_VARS && order <= MAX_ORDER);
        let mut c = [T::zero(); MAX_COEFFS];
        c[0] = value;
        Jet { c, nvars: nvars as u8, order: order as u8 }
    }

    /// The coordinate function `x_var` expanded around `value`.
    pub fn variable(nvars: usize, order: usize, var: usize, value: T) -> Self {
        assert!(var < nvars);
        let mut j = Self::constant(nvars, order, value);
        if order >= 1 {
            j.c[tables(nvars).idx1[var] as usize] = T::one();
        }
        j
    }

    /// Independent variables of a jet expansion at `point`.
    pub fn seed(point: &[T], order: usize) -> Vec<Self> {
        let n = point.len();
        (0..n).map(|i| Self::variable(n, order, i, point[i])).collect()
    }

    /// Builds a jet from value and derivative arrays (`d2`, `d3` flattened row-major).
    pub fn from_derivatives(value: T, d1: &[T], d2: Option<&[T]>, d3: Option<&[T]>) -> Self {
        let n = d1.len();
        let order = if d3.is_some() { 3 } else if d2.is_some() { 2 } else { 1 };
        let t = tables(n);
        let mut j = Self::constant(n, order, value);
        for i in 0..n {
            j.c[t.idx1[i] as usize] = d1[i];
        }
        if let Some(d2) = d2 {
            for i in 0..n {
                for k in i..n {
                    let idx = t.idx2[i][k] as usize;
                    j.c[idx] = d2[i * n + k] / T::from_u8(t.fact[idx]).unwrap();
                }
            }
        }
        if let Some(d3) = d3 {
            for i in 0..n {
                for k in i..n {
                    for l in k..n {
                        let idx = t.idx3[i][k][l] as usize;
                        j.c[idx] = d3[(i * n + k) * n + l] / T::from_u8(t.fact[idx]).unwrap();
                    }
                }
            }
        }
        j
    }

    #[inline]
    pub fn nvars(&self) -> usize {
        self.nvars as usize
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.order as usize
    }

    #[inline]
    fn len(&self) -> usize {
        tables(self.nvars as usize).len_upto[self.order as usize]
    }

    #[inline]
    pub fn value(&self) -> T {
        self.c[0]
    }

    /// First partial derivative at the base point.
    pub fn d1(&self, i: usize) -> T {
        debug_assert!(self.order >= 1);
        self.c[tables(self.nvars()).idx1[i] as usize]
    }

    /// Second partial derivative at the base point.
    pub fn d2(&self, i: usize, j: usize) -> T {
        debug_assert!(self.order >= 2);
        let t = tables(self.nvars());
        let idx = t.idx2[i][j] as usize;
        self.c[idx] * T::from_u8(t.fact[idx]).unwrap()
    }

    /// Third partial derivative at the base point.
    pub fn d3(&self, i: usize, j: usize, k: usize) -> T {
        debug_assert!(self.order >= 3);
        let t = tables(self.nvars());
        let idx = t.idx3[i][j][k] as usize;
        self.c[idx] * T::from_u8(t.fact[idx]).unwrap()
    }

    /// Partial derivative as a jet of one lower order.
    pub fn deriv(&self, var: usize) -> Self {
        assert!(self.order >= 1, "cannot differentiate an order-0 jet");
        let t = tables(self.nvars());
        let mut out = Self::constant(self.nvars(), self.order() - 1, T::zero());
        let limit = t.len_upto[self.order()];
        for &(s, d, f) in &t.deriv[var] {
            if (s as usize) < limit {
                out.c[d as usize] = self.c[s as usize] * T::from_u8(f).unwrap();
            }
        }
        out
    }

    /// Drops coefficients above `order`.
    pub fn truncate(&self, order: usize) -> Self {
        let mut out = *self;
        let o = order.min(self.order());
        let t = tables(self.nvars());
        for v in out.c[t.len_upto[o]..t.len_upto[self.order()]].iter_mut() {
            *v = T::zero();
        }
        out.order = o as u8;
        out
    }

    /// Replaces the value with `v`, keeping the derivative coefficients.
    pub fn with_value(mut self, v: T) -> Self {
        self.c[0] = v;
        self
    }

    pub fn scale(mut self, s: T) -> Self {
        let len = self.len();
        for v in self.c[..len].iter_mut() {
            *v = *v * s;
        }
        self
    }

    fn check_compat(&self, other: &Self) {
        debug_assert_eq!(self.nvars, other.nvars, "jets over different variable sets");
    }

    /// Composes a scalar function given its value and first three derivatives at `self.value()`.
    pub fn compose(&self, f: [T; 4]) -> Self {
        let order = self.order();
        let mut out = Self::constant(self.nvars(), order, f[0]);
        if order == 0 {
            return out;
        }
        let mut delta = *self;
        delta.c[0] = T::zero();
        let two = T::lit(2.0);
        let six = T::lit(6.0);
        out += delta.scale(f[1]);
        if order >= 2 {
            let d2 = delta * delta;
            out += d2.scale(f[2] / two);
            if order >= 3 {
                let d3 = d2 * delta;
                out += d3.scale(f[3] / six);
            }
        }
        out
    }

    pub fn sin(&self) -> Self {
        let (s, c) = self.value().sin_cos();
        self.compose([s, c, -s, -c])
    }

    pub fn cos(&self) -> Self {
        let (s, c) = self.value().sin_cos();
        self.compose([c, -s, -c, s])
    }

    pub fn exp(&self) -> Self {
        let e = self.value().exp();
        self.compose([e, e, e, e])
    }

    pub fn ln(&self) -> Self {
        let x = self.value();
        let r = x.recip();
        self.compose([x.ln(), r, -r * r, T::lit(2.0) * r * r * r])
    }

    pub fn sqrt(&self) -> Self {
        let x = self.value();
        let s = x.sqrt();
        let d1 = T::lit(0.5) / s;
        let d2 = -T::lit(0.25) / (s * x);
        let d3 = T::lit(0.375) / (s * x * x);
        self.compose([s, d1, d2, d3])
    }

    pub fn recip(&self) -> Self {
        let x = self.value();
        let r = x.recip();
        let r2 = r * r;
        self.compose([r, -r2, T::lit(2.0) * r2 * r, -T::lit(6.0) * r2 * r2])
    }

    pub fn powi(&self, k: i32) -> Self {
        let x = self.value();
        let kf = T::from_i32(k).unwrap();
        let one = T::one();
        let two = T::lit(2.0);
        self.compose([
            x.powi(k),
            kf * x.powi(k - 1),
            kf * (kf - one) * x.powi(k - 2),
            kf * (kf - one) * (kf - two) * x.powi(k - 3),
        ])
    }

    pub fn sqr(&self) -> Self {
        *self * *self
    }

    /// Largest absolute coefficient, used for scale-aware tolerances.
    pub fn max_abs(&self) -> T {
        self.c[..self.len()].iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

impl<T: Real> Add for Jet<T> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl<T: Real> AddAssign for Jet<T> {
    fn add_assign(&mut self, rhs: Self) {
        self.check_compat(&rhs);
        self.order = self.order.min(rhs.order);
        let len = self.len();
        for (a, b) in self.c[..len].iter_mut().zip(&rhs.c[..len]) {
            *a = *a + *b;
        }
    }
}

impl<T: Real> Sub for Jet<T> {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        self -= rhs;
        self
    }
}

impl<T: Real> SubAssign for Jet<T> {
    fn sub_assign(&mut self, rhs: Self) {
        self.check_compat(&rhs);
        self.order = self.order.min(rhs.order);
        let len = self.len();
        for (a, b) in self.c[..len].iter_mut().zip(&rhs.c[..len]) {
            *a = *a - *b;
        }
    }
}

impl<T: Real> Neg for Jet<T> {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-T::one())
    }
}

impl<T: Real> Mul for Jet<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        self.check_compat(&rhs);
        let order = self.order.min(rhs.order) as usize;
        let t = tables(self.nvars());
        let mut out = Self::constant(self.nvars(), order, T::zero());
        for &(a, b, c) in &t.mul[..t.mul_upto[order]] {
            out.c[c as usize] = out.c[c as usize] + self.c[a as usize] * rhs.c[b as usize];
        }
        out
    }
}

impl<T: Real> MulAssign for Jet<T> {
    fn mul_assign(&mut self, rhs: Self) {
        *self = *self * rhs;
    }
}

impl<T: Real> Div for Jet<T> {
    type Output = Self;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Self) -> Self {
        self * rhs.recip()
    }
}

impl<T: Real> Add<T> for Jet<T> {
    type Output = Self;
    fn add(mut self, rhs: T) -> Self {
        self.c[0] = self.c[0] + rhs;
        self
    }
}

impl<T: Real> Sub<T> for Jet<T> {
    type Output = Self;
    fn sub(mut self, rhs: T) -> Self {
        self.c[0] = self.c[0] - rhs;
        self
    }
}

impl<T: Real> Mul<T> for Jet<T> {
    type Output = Self;
    fn mul(self, rhs: T) -> Self {
        self.scale(rhs)
    }
}

impl<T: Real> Div<T> for Jet<T> {
    type Output = Self;
    fn div(self, rhs: T) -> Self {
        self.scale(rhs.recip())
    }
}

/// Dot product of two jet vectors.
pub fn dot<T: Real>(a: &[Jet<T>], b: &[Jet<T>]) -> Jet<T> {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = a[0] * b[0];
    for (x, y) in a.iter().zip(b).skip(1) {
        acc += *x * *y;
    }
    acc
}
