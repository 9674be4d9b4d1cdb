//! Small dense linear-algebra kernels: symmetric eigendecomposition, least
//! squares by Householder QR, and eigenvalues of upper-Hessenberg matrices.
//!
//! Matrices are row-major `Vec<T>` with explicit dimensions. Sizes in this
//! crate stay below ~50, so none of this is blocked or vectorized.

use crate::scalar::Scalar;

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Returns `(values, vectors)` with eigenvalues in descending order and
/// `vectors[i]` the unit eigenvector for `values[i]`.
pub fn symmetric_eigen<T: Scalar>(a: &[T], n: usize) -> (Vec<T>, Vec<Vec<T>>) {
    assert_eq!(a.len(), n * n);
    let mut m = a.to_vec();
    let mut v = vec![T::zero(); n * n];
    for i in 0..n {
        v[i * n + i] = T::one();
    }
    let two = T::lit(2.0);
    let scale = m.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt();
    for _sweep in 0..100 {
        let mut off = T::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off = off + m[p * n + q] * m[p * n + q];
            }
        }
        if off.sqrt() <= T::epsilon() * T::lit(1e-3) * scale || off == T::zero() {
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
                let theta = (aqq - app) / (two * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let t = if theta == T::zero() { T::one() } else { t };
                let c = T::one() / (t * t + T::one()).sqrt();
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
    order.sort_by(|&i, &j| {
        m[j * n + j]
            .partial_cmp(&m[i * n + i])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let values = order.iter().map(|&i| m[i * n + i]).collect();
    let vectors = order
        .iter()
        .map(|&j| (0..n).map(|k| v[k * n + j]).collect())
        .collect();
    (values, vectors)
}

/// Least-squares solution of `x * b = y` for `x` (rows x cols, full column
/// rank expected) and `y` (rows x targets) via Householder QR.
///
/// Columns whose remaining norm falls below `rank_tol` times the original
/// column norm are treated as dependent and get zero coefficients. Returns
/// `b` as cols x targets together with the indices of dropped columns.
pub fn lstsq_qr<T: Scalar>(
    x: &[T],
    rows: usize,
    cols: usize,
    y: &[T],
    targets: usize,
    rank_tol: T,
) -> (Vec<T>, Vec<usize>) {
    assert_eq!(x.len(), rows * cols);
    assert_eq!(y.len(), rows * targets);
    assert!(rows >= cols);
    let mut a = x.to_vec();
    let mut q_ty = y.to_vec();
    let col_norms: Vec<T> = (0..cols)
        .map(|j| (0..rows).map(|i| a[i * cols + j] * a[i * cols + j]).fold(T::zero(), |s, v| s + v).sqrt())
        .collect();
    let mut dropped = Vec::new();
    let mut diag = vec![T::zero(); cols];
    for j in 0..cols {
        // Householder reflector for column j below the diagonal.
        let norm = (j..rows)
            .map(|i| a[i * cols + j] * a[i * cols + j])
            .fold(T::zero(), |s, v| s + v)
            .sqrt();
        if norm <= rank_tol * col_norms[j] || norm == T::zero() {
            dropped.push(j);
            continue;
        }
        let alpha = if a[j * cols + j] > T::zero() { -norm } else { norm };
        let mut v: Vec<T> = (j..rows).map(|i| a[i * cols + j]).collect();
        v[0] = v[0] - alpha;
        let vnorm2 = v.iter().fold(T::zero(), |s, &e| s + e * e);
        if vnorm2 == T::zero() {
            diag[j] = a[j * cols + j];
            continue;
        }
        let apply = |m: &mut [T], width: usize, start: usize| {
            for c in start..width {
                let d = v
                    .iter()
                    .enumerate()
                    .fold(T::zero(), |s, (k, &e)| s + e * m[(j + k) * width + c]);
                let f = T::lit(2.0) * d / vnorm2;
                for (k, &e) in v.iter().enumerate() {
                    m[(j + k) * width + c] = m[(j + k) * width + c] - f * e;
                }
            }
        };
        apply(&mut a, cols, j);
        apply(&mut q_ty, targets, 0);
        diag[j] = a[j * cols + j];
    }
    // Back substitution on the kept columns.
    let mut b = vec![T::zero(); cols * targets];
    for t in 0..targets {
        for j in (0..cols).rev() {
            if dropped.contains(&j) {
                continue;
            }
            let mut s = q_ty[j * targets + t];
            for k in (j + 1)..cols {
                if !dropped.contains(&k) {
                    s = s - a[j * cols + k] * b[k * targets + t];
                }
            }
            b[j * targets + t] = s / diag[j];
        }
    }
    (b, dropped)
}

/// Eigenvalues of an upper-Hessenberg matrix by the Francis double-shift QR
/// algorithm. `h` is row-major n x n and is destroyed.
///
/// Returns `None` if some eigenvalue fails to converge in 30 iterations.
pub fn hessenberg_eigenvalues<T: Scalar>(h: &mut [T], n: usize) -> Option<Vec<(T, T)>> {
    assert_eq!(h.len(), n * n);
    let idx = |r: usize, c: usize| r * n + c;
    let mut out = vec![(T::zero(), T::zero()); n];
    let mut anorm = T::zero();
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm = anorm + h[idx(i, j)].abs();
        }
    }
    let two = T::lit(2.0);
    let eps = T::epsilon();
    let mut nn = n as isize - 1;
    let mut t = T::zero();
    while nn >= 0 {
        let mut its = 0;
        loop {
            // Look for a single small subdiagonal element.
            let mut l = nn;
            while l >= 1 {
                let lu = l as usize;
                let s = h[idx(lu - 1, lu - 1)].abs() + h[idx(lu, lu)].abs();
                let s = if s == T::zero() { anorm } else { s };
                if h[idx(lu, lu - 1)].abs() <= eps * s {
                    h[idx(lu, lu - 1)] = T::zero();
                    break;
                }
                l -= 1;
            }
            let nu = nn as usize;
            let x = h[idx(nu, nu)];
            if l == nn {
                out[nu] = (x + t, T::zero());
                nn -= 1;
                break;
            }
            let y = h[idx(nu - 1, nu - 1)];
            let w = h[idx(nu, nu - 1)] * h[idx(nu - 1, nu)];
            if l == nn - 1 {
                let p = T::lit(0.5) * (y - x);
                let q = p * p + w;
                let z = q.abs().sqrt();
                let xx = x + t;
                if q >= T::zero() {
                    let z = p + if p >= T::zero() { z } else { -z };
                    let r1 = xx + z;
                    let r2 = if z != T::zero() { xx - w / z } else { r1 };
                    out[nu - 1] = (r1, T::zero());
                    out[nu] = (r2, T::zero());
                } else {
                    out[nu - 1] = (xx + p, z);
                    out[nu] = (xx + p, -z);
                }
                nn -= 2;
                break;
            }
            if its == 30 {
                return None;
            }
            let (mut x, mut y, mut w) = (x, y, w);
            if its == 10 || its == 20 {
                // Exceptional shift.
                t = t + x;
                for i in 0..=nu {
                    h[idx(i, i)] = h[idx(i, i)] - x;
                }
                let s = h[idx(nu, nu - 1)].abs() + h[idx(nu - 1, nu - 2)].abs();
                x = T::lit(0.75) * s;
                y = x;
                w = T::lit(-0.4375) * s * s;
            }
            its += 1;
            let lu = l as usize;
            let mut m = nu - 2;
            let (mut p, mut q, mut r);
            loop {
                let z = h[idx(m, m)];
                let r0 = x - z;
                let s0 = y - z;
                p = (r0 * s0 - w) / h[idx(m + 1, m)] + h[idx(m, m + 1)];
                q = h[idx(m + 1, m + 1)] - z - r0 - s0;
                r = h[idx(m + 2, m + 1)];
                let s = p.abs() + q.abs() + r.abs();
                p = p / s;
                q = q / s;
                r = r / s;
                if m == lu {
                    break;
                }
                let u = h[idx(m, m - 1)].abs() * (q.abs() + r.abs());
                let v = p.abs()
                    * (h[idx(m - 1, m - 1)].abs() + z.abs() + h[idx(m + 1, m + 1)].abs());
                if u <= eps * v {
                    break;
                }
                m -= 1;
            }
            for i in (m + 2)..=nu {
                h[idx(i, i - 2)] = T::zero();
                if i != m + 2 {
                    h[idx(i, i - 3)] = T::zero();
                }
            }
            let mut k = m;
            while k + 1 <= nu {
                if k != m {
                    p = h[idx(k, k - 1)];
                    q = h[idx(k + 1, k - 1)];
                    r = T::zero();
                    if k + 1 != nu {
                        r = h[idx(k + 2, k - 1)];
                    }
                    x = p.abs() + q.abs() + r.abs();
                    if x != T::zero() {
                        p = p / x;
                        q = q / x;
                        r = r / x;
                    }
                }
                let s0 = (p * p + q * q + r * r).sqrt();
                let s = if p >= T::zero() { s0 } else { -s0 };
                if s != T::zero() {
                    if k == m {
                        if l as usize != m {
                            h[idx(k, k - 1)] = -h[idx(k, k - 1)];
                        }
                    } else {
                        h[idx(k, k - 1)] = -s * x;
                    }
                    p = p + s;
                    x = p / s;
                    y = q / s;
                    let z = r / s;
                    q = q / p;
                    r = r / p;
                    for j in k..=nu {
                        let mut pp = h[idx(k, j)] + q * h[idx(k + 1, j)];
                        if k + 1 != nu {
                            pp = pp + r * h[idx(k + 2, j)];
                            h[idx(k + 2, j)] = h[idx(k + 2, j)] - pp * z;
                        }
                        h[idx(k + 1, j)] = h[idx(k + 1, j)] - pp * y;
                        h[idx(k, j)] = h[idx(k, j)] - pp * x;
                    }
                    let mmin = if nu < k + 3 { nu } else { k + 3 };
                    for i in lu..=mmin {
                        let mut pp = x * h[idx(i, k)] + y * h[idx(i, k + 1)];
                        if k + 1 != nu {
                            pp = pp + z * h[idx(i, k + 2)];
                            h[idx(i, k + 2)] = h[idx(i, k + 2)] - pp * r;
                        }
                        h[idx(i, k + 1)] = h[idx(i, k + 1)] - pp * q;
                        h[idx(i, k)] = h[idx(i, k)] - pp;
                    }
                }
                k += 1;
            }
            let _ = two;
        }
    }
    Some(out)
}

/// Diagonal similarity scaling by powers of two that evens out row and
/// column norms (Parlett-Reinsch). Keeps Hessenberg structure and the
/// eigenvalues; improves their accuracy for badly scaled matrices such as
/// polynomial companions.
pub fn balance<T: Scalar>(a: &mut [T], n: usize) {
    assert_eq!(a.len(), n * n);
    let radix = T::lit(2.0);
    let sqrdx = radix * radix;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let (mut r, mut c) = (T::zero(), T::zero());
            for j in 0..n {
                if j != i {
                    c = c + a[j * n + i].abs();
                    r = r + a[i * n + j].abs();
                }
            }
            if c == T::zero() || r == T::zero() {
                continue;
            }
            let s = c + r;
            let mut f = T::one();
            let mut g = r / radix;
            while c < g {
                f = f * radix;
                c = c * sqrdx;
            }
            g = r * radix;
            while c > g {
                f = f / radix;
                c = c / sqrdx;
            }
            if (c + r) / f < T::lit(0.95) * s {
                done = false;
                let g = T::one() / f;
                for j in 0..n {
                    a[i * n + j] = a[i * n + j] * g;
                }
                for j in 0..n {
                    a[j * n + i] = a[j * n + i] * f;
                }
            }
        }
    }
}
