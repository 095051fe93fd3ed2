//! Small dense linear algebra on row-major square matrices.
//!
//! Matrices here are at most a handful of rows (metric tensors, shape
//! operators), so everything is direct: Cholesky, Gauss–Jordan, cyclic Jacobi.

use crate::scalar::Real;

#[inline]
pub fn at<T: Copy>(a: &[T], n: usize, i: usize, j: usize) -> T {
    a[i * n + j]
}

pub fn identity<T: Real>(n: usize) -> Vec<T> {
    let mut m = vec![T::zero(); n * n];
    for i in 0..n {
        m[i * n + i] = T::one();
    }
    m
}

pub fn matmul<T: Real>(a: &[T], b: &[T], n: usize) -> Vec<T> {
    let mut c = vec![T::zero(); n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            for j in 0..n {
                c[i * n + j] = c[i * n + j] + aik * b[k * n + j];
            }
        }
    }
    c
}

pub fn transpose<T: Real>(a: &[T], n: usize) -> Vec<T> {
    let mut t = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..n {
            t[j * n + i] = a[i * n + j];
        }
    }
    t
}

pub fn trace<T: Real>(a: &[T], n: usize) -> T {
    (0..n).map(|i| a[i * n + i]).sum()
}

/// Lower-triangular Cholesky factor, `None` unless `a` is symmetric positive definite.
pub fn cholesky<T: Real>(a: &[T], n: usize) -> Option<Vec<T>> {
    let mut l = vec![T::zero(); n * n];
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d = d - l[j * n + k] * l[j * n + k];
        }
        if !(d > T::zero()) {
            return None;
        }
        let djj = d.sqrt();
        l[j * n + j] = djj;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s = s - l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / djj;
        }
    }
    Some(l)
}

/// Inverse by Gauss–Jordan elimination with partial pivoting.
pub fn inverse<T: Real>(a: &[T], n: usize) -> Option<Vec<T>> {
    let mut m = a.to_vec();
    let mut inv = identity::<T>(n);
    let scale = a.iter().fold(T::zero(), |s, v| s.max(v.abs()));
    if scale == T::zero() {
        return None;
    }
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&r, &s| m[r * n + col].abs().partial_cmp(&m[s * n + col].abs()).unwrap())
            .unwrap();
        if m[piv * n + col].abs() <= scale * T::epsilon() * T::lit(16.0) {
            return None;
        }
        if piv != col {
            for k in 0..n {
                m.swap(piv * n + k, col * n + k);
                inv.swap(piv * n + k, col * n + k);
            }
        }
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
            if f == T::zero() {
                continue;
            }
            for k in 0..n {
                m[r * n + k] = m[r * n + k] - f * m[col * n + k];
                inv[r * n + k] = inv[r * n + k] - f * inv[col * n + k];
            }
        }
    }
    Some(inv)
}

/// Determinant via LU with partial pivoting.
pub fn det<T: Real>(a: &[T], n: usize) -> T {
    match n {
        0 => T::one(),
        1 => a[0],
        2 => a[0] * a[3] - a[1] * a[2],
        _ => {
            let mut m = a.to_vec();
            let mut d = T::one();
            for col in 0..n {
                let piv = (col..n)
                    .max_by(|&r, &s| {
                        m[r * n + col].abs().partial_cmp(&m[s * n + col].abs()).unwrap()
                    })
                    .unwrap();
                if m[piv * n + col] == T::zero() {
                    return T::zero();
                }
                if piv != col {
                    for k in 0..n {
                        m.swap(piv * n + k, col * n + k);
                    }
                    d = -d;
                }
                let p = m[col * n + col];
                d = d * p;
                for r in (col + 1)..n {
                    let f = m[r * n + col] / p;
                    for k in col..n {
                        m[r * n + k] = m[r * n + k] - f * m[col * n + k];
                    }
                }
            }
            d
        }
    }
}

/// Adjugate (transpose of the cofactor matrix) of a 2×2 matrix.
pub fn adjugate2<T: Real>(a: &[T]) -> [T; 4] {
    [a[3], -a[1], -a[2], a[0]]
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in descending order and the matching orthonormal
/// eigenvectors as columns of a row-major matrix.
pub fn symmetric_eigen<T: Real>(a: &[T], n: usize) -> (Vec<T>, Vec<T>) {
    let mut m = a.to_vec();
    // symmetrize against roundoff in the caller
    for i in 0..n {
        for j in (i + 1)..n {
            let s = (m[i * n + j] + m[j * n + i]) * T::lit(0.5);
            m[i * n + j] = s;
            m[j * n + i] = s;
        }
    }
    let mut v = identity::<T>(n);
    for _sweep in 0..64 {
        let off: T = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j] * m[i * n + j])
            .sum();
        let diag: T = (0..n).map(|i| m[i * n + i] * m[i * n + i]).sum();
        if off <= diag * T::epsilon() * T::epsilon() || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq == T::zero() {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = (t * t + T::one()).sqrt().recip();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| m[b * n + b].partial_cmp(&m[a * n + a]).unwrap());
    let vals = order.iter().map(|&i| m[i * n + i]).collect();
    let mut vecs = vec![T::zero(); n * n];
    for (col, &src) in order.iter().enumerate() {
        for k in 0..n {
            vecs[k * n + col] = v[k * n + src];
        }
    }
    (vals, vecs)
}

/// Eigenvalues (descending) of the symmetric-definite pencil `h w = λ g w`.
///
/// Reduces to a standard symmetric problem through the Cholesky factor of
/// `g`, so the result is real whenever `h` is symmetric and `g` positive
/// definite. Returns `None` if `g` is not positive definite.
pub fn generalized_symmetric_eigenvalues<T: Real>(h: &[T], g: &[T], n: usize) -> Option<Vec<T>> {
    let l = cholesky(g, n)?;
    // C = L^{-1} H L^{-T}; solve column by column with forward substitution.
    let linv = lower_inverse(&l, n);
    let c = matmul(&matmul(&linv, h, n), &transpose(&linv, n), n);
    Some(symmetric_eigen(&c, n).0)
}

fn lower_inverse<T: Real>(l: &[T], n: usize) -> Vec<T> {
    let mut inv = vec![T::zero(); n * n];
    for col in 0..n {
        for i in col..n {
            let mut s = if i == col { T::one() } else { T::zero() };
            for k in col..i {
                s = s - l[i * n + k] * inv[k * n + col];
            }
            inv[i * n + col] = s / l[i * n + i];
        }
    }
    inv
}
