//! Small statistics and least-squares helpers shared by the experiments.

/// Running mean/variance accumulator (Welford), mergeable in a fixed order
/// so parallel reductions stay bit-identical for any thread count.
#[derive(Clone, Copy, Debug, Default)]
pub struct MeanVar {
    pub n: u64,
    pub mean: f64,
    m2: f64,
}

impl MeanVar {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &MeanVar) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n1 = self.n as f64;
        let n2 = other.n as f64;
        let d = other.mean - self.mean;
        let n = n1 + n2;
        self.mean += d * n2 / n;
        self.m2 += other.m2 + d * d * n1 * n2 / n;
        self.n += other.n;
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n as f64 - 1.0)
        }
    }

    /// Standard error of the mean.
    pub fn stderr(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

/// Wilson 95% score interval for a binomial proportion.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959963984540054; // 97.5% normal quantile
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * ((p * (1.0 - p) + z2 / (4.0 * n)) / n).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Ordinary least squares y = a + b x. Returns (a, b, stderr_b).
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    assert!(x.len() >= 2);
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|&xi| (xi - mx) * (xi - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(&xi, &yi)| (xi - mx) * (yi - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let dof = (x.len() as f64 - 2.0).max(1.0);
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(&xi, &yi)| {
            let r = yi - a - b * xi;
            r * r
        })
        .sum();
    let se_b = (ss_res / dof / sxx).sqrt();
    (a, b, se_b)
}

/// Weighted least squares for y = sum_k beta_k phi_k(x) with a small number
/// of basis columns. `design[i]` is the row of basis values for point i.
/// Returns (beta, stderr_beta).
pub fn weighted_lsq(design: &[Vec<f64>], y: &[f64], weights: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let m = design[0].len();
    let n = design.len();
    assert!(n >= m);
    // Normal equations A beta = rhs with A = X^T W X.
    let mut a = vec![0.0f64; m * m];
    let mut rhs = vec![0.0f64; m];
    for i in 0..n {
        let w = weights[i];
        for j in 0..m {
            rhs[j] += w * design[i][j] * y[i];
            for k in 0..m {
                a[j * m + k] += w * design[i][j] * design[i][k];
            }
        }
    }
    let a_inv = invert_small(&a, m);
    let beta: Vec<f64> = (0..m)
        .map(|j| (0..m).map(|k| a_inv[j * m + k] * rhs[k]).sum())
        .collect();
    // Residual variance (weighted) for parameter errors.
    let dof = (n as f64 - m as f64).max(1.0);
    let mut chi2 = 0.0;
    for i in 0..n {
        let fit: f64 = (0..m).map(|j| design[i][j] * beta[j]).sum();
        chi2 += weights[i] * (y[i] - fit) * (y[i] - fit);
    }
    let scale = (chi2 / dof).max(1.0); // inflate errors if the fit is poor
    let se: Vec<f64> = (0..m).map(|j| (a_inv[j * m + j] * scale).sqrt()).collect();
    (beta, se)
}

/// Gauss-Jordan inverse for tiny dense systems (m <= 4).
fn invert_small(a: &[f64], m: usize) -> Vec<f64> {
    let mut aug = vec![0.0f64; m * 2 * m];
    for i in 0..m {
        for j in 0..m {
            aug[i * 2 * m + j] = a[i * m + j];
        }
        aug[i * 2 * m + m + i] = 1.0;
    }
    for col in 0..m {
        let mut piv = col;
        for r in col + 1..m {
            if aug[r * 2 * m + col].abs() > aug[piv * 2 * m + col].abs() {
                piv = r;
            }
        }
        assert!(aug[piv * 2 * m + col].abs() > 1e-300, "singular normal equations");
        if piv != col {
            for j in 0..2 * m {
                aug.swap(col * 2 * m + j, piv * 2 * m + j);
            }
        }
        let inv = 1.0 / aug[col * 2 * m + col];
        for j in 0..2 * m {
            aug[col * 2 * m + j] *= inv;
        }
        for r in 0..m {
            if r != col {
                let f = aug[r * 2 * m + col];
                for j in 0..2 * m {
                    aug[r * 2 * m + j] -= f * aug[col * 2 * m + j];
                }
            }
        }
    }
    let mut out = vec![0.0f64; m * m];
    for i in 0..m {
        for j in 0..m {
            out[i * m + j] = aug[i * 2 * m + m + j];
        }
    }
    out
}

/// log-sum-exp of a slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + xs.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn welford_merge_matches_sequential() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 7919) % 101) as f64 * 0.01).collect();
        let mut whole = MeanVar::default();
        xs.iter().for_each(|&x| whole.push(x));
        let mut left = MeanVar::default();
        let mut right = MeanVar::default();
        xs[..400].iter().for_each(|&x| left.push(x));
        xs[400..].iter().for_each(|&x| right.push(x));
        left.merge(&right);
        assert!((whole.mean - left.mean).abs() < 1e-12);
        assert!((whole.variance() - left.variance()).abs() < 1e-12);
    }

    #[test]
    fn wilson_brackets_p_hat() {
        let (lo, hi) = wilson_interval(37, 100);
        assert!(lo <= 0.37 && 0.37 <= hi);
        assert!(lo > 0.25 && hi < 0.5);
    }

    #[test]
    fn linear_fit_recovers_line() {
        let x: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|&xi| 3.0 - 0.5 * xi).collect();
        let (a, b, se) = linear_fit(&x, &y);
        assert!((a - 3.0).abs() < 1e-12);
        assert!((b + 0.5).abs() < 1e-12);
        assert!(se < 1e-12);
    }

    #[test]
    fn weighted_lsq_quadratic() {
        let x: Vec<f64> = (1..30).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = x.iter().map(|&xi| 2.0 * xi * xi - 0.3 * xi * xi * xi).collect();
        let design: Vec<Vec<f64>> = x.iter().map(|&xi| vec![xi * xi, xi * xi * xi]).collect();
        let w = vec![1.0; x.len()];
        let (beta, _) = weighted_lsq(&design, &y, &w);
        assert!((beta[0] - 2.0).abs() < 1e-10);
        assert!((beta[1] + 0.3).abs() < 1e-10);
    }
}
