//! Integrated density of states by eigenvalue counting, its slope at
//! critical energies, and Borel-transform bounds for Lipschitz measures.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::green::{BoundKind, BoundReport};
use crate::mat2::C64;
use crate::model::{materialize, sample_realization, PolymerSpec};
use crate::stats::{weighted_lsq, MeanVar};
use crate::tridiag::sturm_count;

/// Disorder-averaged IDS sampled on an energy grid.
#[derive(Clone, Debug)]
pub struct IdsCurve {
    pub energies: Vec<f64>,
    pub n_hat: Vec<f64>,
    pub stderr: Vec<f64>,
    pub window_sites: usize,
    pub samples: usize,
}

/// Fraction of window eigenvalues at or below each energy, disorder
/// averaged. Dirichlet windows; the boundary effect is O(1/window).
pub fn ids_curve(
    spec: &PolymerSpec,
    energies: &[f64],
    half_width: usize,
    samples: usize,
    seed: u64,
) -> Result<IdsCurve> {
    let sites = 2 * half_width + 1;
    if sites < 1000 {
        return Err(Error::InvalidParameter(format!(
            "IDS window has {sites} sites; need at least 1000"
        )));
    }
    let mut sorted = energies.to_vec();
    sorted.sort_by(f64::total_cmp);

    let per_sample: Vec<Vec<f64>> = (0..samples)
        .into_par_iter()
        .map(|idx| {
            let real = sample_realization(spec, seed, idx as u64, half_width).expect("window");
            let w = materialize(&real);
            sorted
                .iter()
                .map(|&e| sturm_count(&w.diag, &w.off, e.next_up()) as f64 / sites as f64)
                .collect()
        })
        .collect();

    let mut n_hat = Vec::with_capacity(sorted.len());
    let mut stderr = Vec::with_capacity(sorted.len());
    for k in 0..sorted.len() {
        let mut acc = MeanVar::default();
        for row in &per_sample {
            acc.push(row[k]);
        }
        n_hat.push(acc.mean);
        stderr.push(acc.stderr());
    }
    Ok(IdsCurve {
        energies: sorted,
        n_hat,
        stderr,
        window_sites: sites,
        samples,
    })
}

/// Linear-coefficient fit of the symmetric IDS increment at a critical
/// energy.
#[derive(Clone, Debug)]
pub struct IdsSlopeFit {
    pub d_prime_hat: f64,
    pub stderr: f64,
    /// (eps, increment, stderr) measurements.
    pub measurements: Vec<(f64, f64, f64)>,
    /// Increment/eps ratios, the constancy diagnostic.
    pub ratios: Vec<f64>,
    pub flagged_nonpositive: bool,
}

/// Fit N(E_c + eps) - N(E_c - eps) = D' eps + c eps^2.
pub fn ids_slope_at_critical(
    spec: &PolymerSpec,
    e_c: f64,
    epsilons: &[f64],
    half_width: usize,
    samples: usize,
    seed: u64,
) -> Result<IdsSlopeFit> {
    if epsilons.len() < 2 {
        return Err(Error::InvalidParameter(
            "need at least two epsilon values".into(),
        ));
    }
    let sites = 2 * half_width + 1;
    let deltas: Vec<(f64, MeanVar)> = {
        let per_sample: Vec<Vec<f64>> = (0..samples)
            .into_par_iter()
            .map(|idx| {
                let real =
                    sample_realization(spec, seed, idx as u64, half_width).expect("window");
                let w = materialize(&real);
                epsilons
                    .iter()
                    .map(|&eps| {
                        let above = sturm_count(&w.diag, &w.off, (e_c + eps).next_up());
                        let below = sturm_count(&w.diag, &w.off, (e_c - eps).next_up());
                        (above - below) as f64 / sites as f64
                    })
                    .collect()
            })
            .collect();
        epsilons
            .iter()
            .enumerate()
            .map(|(k, &eps)| {
                let mut acc = MeanVar::default();
                for row in &per_sample {
                    acc.push(row[k]);
                }
                (eps, acc)
            })
            .collect()
    };

    let design: Vec<Vec<f64>> = deltas.iter().map(|&(e, _)| vec![e, e * e]).collect();
    let y: Vec<f64> = deltas.iter().map(|(_, a)| a.mean).collect();
    let w: Vec<f64> = deltas
        .iter()
        .map(|(_, a)| 1.0 / a.stderr().powi(2).max(1e-30))
        .collect();
    let (beta, se) = weighted_lsq(&design, &y, &w);
    let measurements: Vec<(f64, f64, f64)> = deltas
        .iter()
        .map(|&(e, ref a)| (e, a.mean, a.stderr()))
        .collect();
    let ratios: Vec<f64> = measurements.iter().map(|&(e, v, _)| v / e).collect();
    let d_prime_hat = beta[0];
    Ok(IdsSlopeFit {
        d_prime_hat,
        stderr: se[0],
        measurements,
        ratios,
        flagged_nonpositive: d_prime_hat <= 0.0 && d_prime_hat.abs() > 2.0 * se[0],
    })
}

/// Finite approximation of a probability measure on the line.
#[derive(Clone, Debug)]
pub enum MeasureApprox {
    /// Point masses (location, weight).
    Atoms(Vec<(f64, f64)>),
    /// Piecewise-constant density: density[i] on [edges[i], edges[i+1]).
    Piecewise { edges: Vec<f64>, density: Vec<f64> },
}

impl MeasureApprox {
    pub fn atoms(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.iter().any(|&(_, w)| w <= 0.0) {
            return Err(Error::InvalidParameter("atom weights must be positive".into()));
        }
        let total: f64 = atoms.iter().map(|&(_, w)| w).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "atom weights sum to {total}, not 1"
            )));
        }
        Ok(MeasureApprox::Atoms(atoms))
    }

    pub fn piecewise(edges: Vec<f64>, density: Vec<f64>) -> Result<Self> {
        if edges.len() != density.len() + 1 || density.is_empty() {
            return Err(Error::InvalidParameter(
                "need edges.len() = density.len() + 1".into(),
            ));
        }
        if edges.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("edges must increase".into()));
        }
        if density.iter().any(|&d| d < 0.0) {
            return Err(Error::InvalidParameter("density must be nonnegative".into()));
        }
        let total: f64 = density
            .iter()
            .enumerate()
            .map(|(i, &d)| d * (edges[i + 1] - edges[i]))
            .sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "density integrates to {total}, not 1"
            )));
        }
        Ok(MeasureApprox::Piecewise { edges, density })
    }

    /// mu([E - eps, E + eps]).
    pub fn interval_mass(&self, e: f64, eps: f64) -> f64 {
        match self {
            MeasureApprox::Atoms(atoms) => atoms
                .iter()
                .filter(|&&(x, _)| (x - e).abs() <= eps)
                .map(|&(_, w)| w)
                .sum(),
            MeasureApprox::Piecewise { edges, density } => {
                let (lo, hi) = (e - eps, e + eps);
                let mut mass = 0.0;
                for (i, &d) in density.iter().enumerate() {
                    let a = edges[i].max(lo);
                    let b = edges[i + 1].min(hi);
                    if b > a {
                        mass += d * (b - a);
                    }
                }
                mass
            }
        }
    }
}

/// Borel transform in the Herglotz convention B(z) = integral mu(de)/(e - z),
/// so Im B(E + i delta) = integral mu(de) delta/((e-E)^2 + delta^2) > 0 — the
/// positive Poisson kernel.
pub fn borel_transform(mu: &MeasureApprox, z: C64) -> Result<C64> {
    if !(z.im > 0.0) {
        return Err(Error::NonPositiveImaginaryPart(z.im));
    }
    Ok(match mu {
        MeasureApprox::Atoms(atoms) => atoms
            .iter()
            .map(|&(e, w)| w / (C64::new(e, 0.0) - z))
            .sum(),
        MeasureApprox::Piecewise { edges, density } => {
            // integral rho de / (e - z) = rho [ln(b - z) - ln(a - z)];
            // Im(e - z) = -Im z < 0 throughout, so the principal branch is
            // continuous along the integration path.
            let mut total = C64::ZERO;
            for (i, &rho) in density.iter().enumerate() {
                let a = C64::new(edges[i], 0.0) - z;
                let b = C64::new(edges[i + 1], 0.0) - z;
                total += rho * (b.ln() - a.ln());
            }
            total
        }
    })
}

/// Exact integral of Im B(E + eps + i delta) over eps in [0, eps0].
fn integrated_im_borel(mu: &MeasureApprox, e: f64, delta: f64, eps0: f64) -> f64 {
    match mu {
        MeasureApprox::Atoms(atoms) => atoms
            .iter()
            .map(|&(x, w)| {
                w * (((e + eps0 - x) / delta).atan() - ((e - x) / delta).atan())
            })
            .sum(),
        MeasureApprox::Piecewise { edges, density } => {
            // Im B(E'+i d) for one block [a, b] is
            // rho [atan((b-E')/d) - atan((a-E')/d)]; integrating over E' from
            // E to E+eps0 gives rho d [F(u)] with F(u) = u atan u - ln(1+u^2)/2.
            let f = |u: f64| u * u.atan() - 0.5 * u.mul_add(u, 1.0).ln();
            let mut total = 0.0;
            for (i, &rho) in density.iter().enumerate() {
                let (a, b) = (edges[i], edges[i + 1]);
                let term = |x: f64| -> f64 {
                    // integral over eps of atan((x - E - eps)/delta)
                    delta * (f((x - e) / delta) - f((x - e - eps0) / delta))
                };
                total += rho * (term(b) - term(a));
            }
            total
        }
    }
}

const BOREL_EPS_MIN: f64 = 1e-4;

/// Check both Borel-transform bounds for a measure that is Lipschitz at E:
/// Im B(E + i delta) < (pi/2) C, and
/// integral_0^{eps0} Im B(E + eps + i delta) d eps < pi^2 C eps0.
///
/// The Lipschitz certificate mu([E-eps, E+eps]) <= C eps is verified first
/// on a dyadic grid down to eps = 1e-4; below that it is unverified.
pub fn check_borel_bounds(
    mu: &MeasureApprox,
    e: f64,
    lipschitz_c: f64,
    deltas: &[f64],
    eps0s: &[f64],
) -> Result<Vec<BoundReport>> {
    // Certificate grid spans from the largest scale of interest down.
    let span = 2.0 * eps0s.iter().cloned().fold(1.0f64, f64::max);
    let mut eps = span;
    while eps >= BOREL_EPS_MIN {
        let mass = mu.interval_mass(e, eps);
        let bound = lipschitz_c * eps;
        if mass > bound * (1.0 + 1e-12) {
            return Err(Error::LipschitzCertificateFailed {
                energy: e,
                eps,
                mass,
                bound,
            });
        }
        eps *= 0.5;
    }

    let mut out = Vec::new();
    for &delta in deltas {
        let im_b = borel_transform(mu, C64::new(e, delta))?.im;
        let rhs = std::f64::consts::FRAC_PI_2 * lipschitz_c;
        out.push(BoundReport {
            kind: BoundKind::BorelPointwise,
            descriptor: format!("delta = {delta:.3e}"),
            lhs: im_b,
            rhs,
            satisfied: im_b <= rhs * (1.0 + 1e-8),
            margin: (rhs - im_b) / rhs,
        });
        for &eps0 in eps0s {
            let lhs = integrated_im_borel(mu, e, delta, eps0);
            let rhs = std::f64::consts::PI * std::f64::consts::PI * lipschitz_c * eps0;
            out.push(BoundReport {
                kind: BoundKind::BorelIntegrated,
                descriptor: format!("delta = {delta:.3e}, eps0 = {eps0:.3e}"),
                lhs,
                rhs,
                satisfied: lhs <= rhs * (1.0 + 1e-8),
                margin: (rhs - lhs) / rhs,
            });
        }
    }
    Ok(out)
}

/// Smoothed-indicator IDS through the spectral theorem:
/// E <0| f(H) |0> with f a linear ramp from 1 to 0 across [E - s, E + s].
pub fn ids_smoothed_indicator(
    spec: &PolymerSpec,
    e: f64,
    smoothing: f64,
    half_width: usize,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let mut acc = MeanVar::default();
    let results: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|idx| {
            let real = sample_realization(spec, seed, idx as u64, half_width).expect("window");
            let w = materialize(&real);
            let (evs, vecs) = crate::tridiag::eigen_pairs(&w.diag, &w.off);
            let n = w.size();
            let origin = half_width;
            let f = |x: f64| -> f64 {
                if x <= e - smoothing {
                    1.0
                } else if x >= e + smoothing {
                    0.0
                } else {
                    (e + smoothing - x) / (2.0 * smoothing)
                }
            };
            (0..n)
                .map(|j| {
                    let psi0 = vecs[origin * n + j];
                    f(evs[j]) * psi0 * psi0
                })
                .sum()
        })
        .collect();
    for v in results {
        acc.push(v);
    }
    Ok((acc.mean, acc.stderr()))
}

/// Free-lattice IDS oracle: N(E) = arccos(-E/2)/pi on [-2, 2].
pub fn free_ids(e: f64) -> f64 {
    if e <= -2.0 {
        0.0
    } else if e >= 2.0 {
        1.0
    } else {
        (-e / 2.0).acos() / std::f64::consts::PI
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::dimer_spec;

    #[test]
    fn free_lattice_ids_matches_arccos() {
        let spec = dimer_spec(0.0, 0.5).unwrap();
        let curve = ids_curve(&spec, &[-1.0, 0.0, 1.0], 600, 2, 1).unwrap();
        assert!((curve.n_hat[1] - 0.5).abs() < 3e-3, "N(0) = {}", curve.n_hat[1]);
        assert!(
            (curve.n_hat[2] - 2.0 / 3.0).abs() < 3e-3,
            "N(1) = {}",
            curve.n_hat[2]
        );
        assert!((curve.n_hat[0] - free_ids(-1.0)).abs() < 3e-3);
    }

    #[test]
    fn dimer_ids_monotone_with_full_range() {
        let spec = dimer_spec(0.5, 0.5).unwrap();
        let grid: Vec<f64> = (0..13).map(|i| -3.0 + 0.5 * i as f64).collect();
        let curve = ids_curve(&spec, &grid, 500, 6, 2).unwrap();
        assert_eq!(curve.n_hat.first().copied().unwrap(), 0.0);
        assert_eq!(curve.n_hat.last().copied().unwrap(), 1.0);
        for w in curve.n_hat.windows(2) {
            assert!(w[1] >= w[0] - 1e-12);
        }
    }

    #[test]
    fn free_lattice_slope_at_band_center() {
        // Increment slope = 2 rho(0) = 1/pi.
        let spec = dimer_spec(0.0, 0.5).unwrap();
        let eps: Vec<f64> = vec![0.05, 0.1, 0.2];
        let fit = ids_slope_at_critical(&spec, 0.0, &eps, 600, 2, 3).unwrap();
        let want = 1.0 / std::f64::consts::PI;
        assert!(
            (fit.d_prime_hat - want).abs() < 0.02,
            "slope {} vs {}",
            fit.d_prime_hat,
            want
        );
    }

    #[test]
    fn borel_point_mass_positive_kernel() {
        let mu = MeasureApprox::atoms(vec![(0.0, 1.0)]).unwrap();
        let b = borel_transform(&mu, C64::new(0.0, 1.0)).unwrap();
        // Positive Poisson kernel convention: Im B = +1 here.
        assert!((b.im - 1.0).abs() < 1e-15);
        assert!(b.re.abs() < 1e-15);
    }

    #[test]
    fn borel_uniform_density_arctan() {
        let mu = MeasureApprox::piecewise(vec![0.0, 1.0], vec![1.0]).unwrap();
        for delta in [0.1, 0.01, 1e-3] {
            let b = borel_transform(&mu, C64::new(0.5, delta)).unwrap();
            let want = 2.0 * (0.5f64 / delta).atan();
            assert!((b.im - want).abs() < 1e-12, "delta {delta}");
        }
        // delta -> 0 limit is pi * rho.
        let b = borel_transform(&mu, C64::new(0.5, 1e-9)).unwrap();
        assert!((b.im - std::f64::consts::PI).abs() < 1e-6);
    }

    #[test]
    fn borel_total_mass_sum_rule() {
        // (1/pi) integral of Im B over a wide energy interval is close to 1.
        let mu = MeasureApprox::piecewise(vec![-0.5, 0.5], vec![1.0]).unwrap();
        let delta = 1e-3;
        // integrated_im_borel integrates from E upward; take E far left.
        let total = integrated_im_borel(&mu, -60.0, delta, 120.0) / std::f64::consts::PI;
        assert!((total - 1.0).abs() < 1e-3, "total {total}");
    }

    #[test]
    fn borel_bounds_uniform_measure() {
        let mu = MeasureApprox::piecewise(vec![0.0, 1.0], vec![1.0]).unwrap();
        let reports =
            check_borel_bounds(&mu, 0.5, 2.0, &[1e-1, 1e-2, 1e-3, 1e-4], &[0.1, 0.4]).unwrap();
        for r in &reports {
            assert!(r.satisfied, "{}: lhs {} rhs {}", r.descriptor, r.lhs, r.rhs);
        }
    }

    #[test]
    fn borel_point_mass_rejected_by_certificate() {
        let mu = MeasureApprox::atoms(vec![(0.5, 1.0)]).unwrap();
        let err = check_borel_bounds(&mu, 0.5, 2.0, &[0.1], &[0.1]);
        assert!(matches!(err, Err(Error::LipschitzCertificateFailed { .. })));
    }

    #[test]
    fn counting_ids_matches_spectral_weights() {
        let spec = dimer_spec(0.5, 0.5).unwrap();
        let e = 0.3;
        let (avg_f, se_f) = ids_smoothed_indicator(&spec, e, 1e-2, 300, 50, 9).unwrap();
        let curve = ids_curve(&spec, &[e], 500, 50, 9).unwrap();
        let tol = 2.0 * (se_f + curve.stderr[0]) + 0.01;
        assert!(
            (avg_f - curve.n_hat[0]).abs() < tol,
            "spectral {avg_f} vs counting {}",
            curve.n_hat[0]
        );
    }
}
