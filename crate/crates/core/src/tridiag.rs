//! Symmetric tridiagonal kernels: Sturm counting, bisection eigenvalues,
//! QL eigenpairs, and shifted complex solves for resolvent columns.

use crate::mat2::C64;

/// Number of eigenvalues strictly below `lambda` (Sturm / LDL^T pivot count).
pub fn sturm_count(diag: &[f64], off: &[f64], lambda: f64) -> usize {
    let n = diag.len();
    if n == 0 {
        return 0;
    }
    let mut count = 0usize;
    let mut q = diag[0] - lambda;
    if q < 0.0 {
        count += 1;
    }
    for i in 1..n {
        let q_safe = if q.abs() < 1e-300 {
            if q >= 0.0 {
                1e-300
            } else {
                -1e-300
            }
        } else {
            q
        };
        q = (diag[i] - lambda) - off[i - 1] * off[i - 1] / q_safe;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Gershgorin interval containing all eigenvalues.
pub fn gershgorin(diag: &[f64], off: &[f64]) -> (f64, f64) {
    let n = diag.len();
    let mut lo = f64::MAX;
    let mut hi = f64::MIN;
    for i in 0..n {
        let e_left = if i > 0 { off[i - 1].abs() } else { 0.0 };
        let e_right = if i < n - 1 { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - e_left - e_right);
        hi = hi.max(diag[i] + e_left + e_right);
    }
    (lo - 1e-10, hi + 1e-10)
}

/// All eigenvalues, ascending, via Sturm bisection. O(n^2 log(1/eps)).
pub fn eigenvalues(diag: &[f64], off: &[f64]) -> Vec<f64> {
    let n = diag.len();
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![diag[0]];
    }
    let (glo, ghi) = gershgorin(diag, off);
    let mut evs = Vec::with_capacity(n);
    for k in 0..n {
        // Bisect for the (k+1)-th smallest eigenvalue.
        let (mut lo, mut hi) = (glo, ghi);
        while hi - lo > 1e-13 * (1.0 + lo.abs().max(hi.abs())) {
            let mid = 0.5 * (lo + hi);
            if sturm_count(diag, off, mid) <= k {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        evs.push(0.5 * (lo + hi));
    }
    evs
}

/// Full eigendecomposition by QL with implicit shifts.
///
/// Returns eigenvalues ascending and the eigenvector matrix stored row-major:
/// `vecs[j * n + k]` is component j of the k-th eigenvector.
pub fn eigen_pairs(diag: &[f64], off: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut e = vec![0.0f64; n];
    e[..n - 1].copy_from_slice(off);
    // z starts as the identity; z[j * n + k] = component j of vector k.
    let mut z = vec![0.0f64; n * n];
    for j in 0..n {
        z[j * n + j] = 1.0;
    }

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m < n - 1 {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            assert!(iter <= 50, "QL iteration failed to converge");
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c) = (1.0f64, 1.0f64);
            let mut p = 0.0f64;
            let mut underflow_recovery = false;
            let mut i = m as i64 - 1;
            while i >= l as i64 {
                let iu = i as usize;
                let mut f = s * e[iu];
                let b = c * e[iu];
                r = f.hypot(g);
                e[iu + 1] = r;
                if r == 0.0 {
                    d[iu + 1] -= p;
                    e[m] = 0.0;
                    underflow_recovery = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[iu + 1] - p;
                r = (d[iu] - g) * s + 2.0 * c * b;
                p = s * r;
                d[iu + 1] = g + p;
                g = c * r - b;
                for k in 0..n {
                    f = z[k * n + iu + 1];
                    z[k * n + iu + 1] = s * z[k * n + iu] + c * f;
                    z[k * n + iu] = c * z[k * n + iu] - s * f;
                }
                i -= 1;
            }
            if underflow_recovery {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }

    // Sort ascending, permuting vectors accordingly.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let evs: Vec<f64> = order.iter().map(|&k| d[k]).collect();
    let mut vecs = vec![0.0f64; n * n];
    for (new_k, &old_k) in order.iter().enumerate() {
        for j in 0..n {
            vecs[j * n + new_k] = z[j * n + old_k];
        }
    }
    (evs, vecs)
}

/// Solve (J - z) x = b for a real symmetric tridiagonal J and complex z by
/// LU with partial pivoting (gtsv-style, one extra superdiagonal of fill-in).
pub fn solve_shifted(diag: &[f64], off: &[f64], z: C64, b: &mut [C64]) {
    let n = diag.len();
    assert_eq!(b.len(), n);
    let mut d: Vec<C64> = diag.iter().map(|&v| C64::new(v, 0.0) - z).collect();
    let mut du: Vec<C64> = off.iter().map(|&t| C64::new(t, 0.0)).collect();
    let mut dl: Vec<C64> = du.clone();
    let mut du2: Vec<C64> = vec![C64::ZERO; n.saturating_sub(2)];

    for i in 0..n - 1 {
        if d[i].norm_sqr() >= dl[i].norm_sqr() {
            let fact = dl[i] / d[i];
            d[i + 1] -= fact * du[i];
            b[i + 1] -= fact * b[i];
            if i < n - 2 {
                du2[i] = C64::ZERO;
            }
        } else {
            let fact = d[i] / dl[i];
            d[i] = dl[i];
            let temp = d[i + 1];
            d[i + 1] = du[i] - fact * temp;
            if i < n - 2 {
                du2[i] = du[i + 1];
                du[i + 1] = -fact * du2[i];
            }
            du[i] = temp;
            let bt = b[i];
            b[i] = b[i + 1];
            b[i + 1] = bt - fact * b[i + 1];
        }
    }

    b[n - 1] /= d[n - 1];
    if n >= 2 {
        b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / d[n - 2];
    }
    for i in (0..n.saturating_sub(2)).rev() {
        b[i] = (b[i] - du[i] * b[i + 1] - du2[i] * b[i + 2]) / d[i];
    }
}

/// Max-norm of the residual (J - z) x - b relative to |b|.
pub fn residual_shifted(diag: &[f64], off: &[f64], z: C64, x: &[C64], b: &[C64]) -> f64 {
    let n = diag.len();
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for i in 0..n {
        let mut r = (C64::new(diag[i], 0.0) - z) * x[i] - b[i];
        if i > 0 {
            r += off[i - 1] * x[i - 1];
        }
        if i < n - 1 {
            r += off[i] * x[i + 1];
        }
        worst = worst.max(r.norm());
        scale = scale.max(b[i].norm()).max(x[i].norm());
    }
    worst / scale.max(1e-300)
}
