//! Monte-Carlo estimation of Lyapunov exponents, the quadratic coefficient
//! of their growth away from a critical energy, and empirical probabilities
//! of transfer-matrix large-deviation events.
//!
//! Per-sample randomness is keyed by (seed, sample_index); samples are
//! processed in fixed-size chunks merged in index order, so results are
//! bit-identical for any thread count.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mat2::{C64, ScaledMat2};
use crate::model::{sample_realization, PolymerSpec, Realization};
use crate::pairmax::max_pair_log_norm;
use crate::stats::{log_sum_exp, weighted_lsq, wilson_interval, MeanVar};
use crate::transfer::single_transfer;

const CHUNK: usize = 16;

/// Monte-Carlo estimate of the Lyapunov exponent at one complex energy.
#[derive(Clone, Copy, Debug)]
pub struct LyapunovEstimate {
    pub z: C64,
    /// Per-site log growth of the cocycle norm.
    pub gamma: f64,
    pub stderr: f64,
    /// Sites per sample.
    pub n_sites: usize,
    pub samples: usize,
}

/// Running product T(n, 0) over sites 0..n with scaled arithmetic.
fn forward_product(real: &Realization, z: C64, n: usize) -> ScaledMat2 {
    let mut p = ScaledMat2::identity();
    for j in 0..n as i64 {
        p = p.premul(&single_transfer(z, real.v_at(j), real.t_at(j)));
    }
    p
}

fn map_samples<F>(samples: usize, f: F) -> MeanVar
where
    F: Fn(u64) -> f64 + Sync,
{
    let chunks: Vec<(usize, usize)> = (0..samples)
        .step_by(CHUNK)
        .map(|s| (s, (s + CHUNK).min(samples)))
        .collect();
    let partials: Vec<MeanVar> = chunks
        .par_iter()
        .map(|&(lo, hi)| {
            let mut acc = MeanVar::default();
            for i in lo..hi {
                acc.push(f(i as u64));
            }
            acc
        })
        .collect();
    let mut total = MeanVar::default();
    for p in &partials {
        total.merge(p);
    }
    total
}

/// Mean over disorder of (1/N) log ||T^z(N, 0)||.
pub fn lyapunov(
    spec: &PolymerSpec,
    z: C64,
    n: usize,
    samples: usize,
    seed: u64,
) -> Result<LyapunovEstimate> {
    if n < 10 * spec.correlation_length {
        return Err(Error::InvalidParameter(format!(
            "N = {n} is below 10 correlation lengths"
        )));
    }
    let acc = map_samples(samples, |i| {
        let real = sample_realization(spec, seed, i, n).expect("window checked");
        forward_product(&real, z, n).log_frobenius() / n as f64
    });
    Ok(LyapunovEstimate {
        z,
        gamma: acc.mean,
        stderr: acc.stderr(),
        n_sites: n,
        samples,
    })
}

/// Difference estimator (log ||T(N, 0)|| - log ||T(N/2, 0)||) / (N - N/2).
///
/// The plain (1/N) log-norm estimator carries an O(1/N) positive offset from
/// the bounded prefactor of the cocycle; the two-point difference cancels the
/// offset, which matters when gamma itself is at the 1/N scale (near critical
/// energies). Values may be slightly negative by noise.
pub fn lyapunov_slope(
    spec: &PolymerSpec,
    z: C64,
    n: usize,
    samples: usize,
    seed: u64,
) -> Result<LyapunovEstimate> {
    if n < 10 * spec.correlation_length {
        return Err(Error::InvalidParameter(format!(
            "N = {n} is below 10 correlation lengths"
        )));
    }
    let half = n / 2;
    let acc = map_samples(samples, |i| {
        let real = sample_realization(spec, seed, i, n).expect("window checked");
        let p_half = forward_product(&real, z, half);
        let mut p = p_half;
        for j in half as i64..n as i64 {
            p = p.premul(&single_transfer(z, real.v_at(j), real.t_at(j)));
        }
        (p.log_frobenius() - p_half.log_frobenius()) / (n - half) as f64
    });
    Ok(LyapunovEstimate {
        z,
        gamma: acc.mean,
        stderr: acc.stderr(),
        n_sites: n,
        samples,
    })
}

/// Quadratic-coefficient fit of gamma(E_c + eps) against eps^2.
#[derive(Clone, Debug)]
pub struct QuadraticFit {
    pub d_hat: f64,
    pub d_stderr: f64,
    /// Cubic nuisance coefficient.
    pub cubic: f64,
    /// Finite-size intercept absorbed by the fit.
    pub intercept: f64,
    /// Largest eps with relative fit residual below 20%.
    pub eps0: f64,
    /// (eps, gamma, stderr) measurements.
    pub measurements: Vec<(f64, f64, f64)>,
    /// Relative residuals per eps.
    pub rel_residuals: Vec<f64>,
    /// Set when the fitted D is non-positive beyond 2 sigma.
    pub flagged_nonpositive: bool,
}

/// Fit gamma(E_c + eps) = intercept + D eps^2 + c eps^3 by weighted least
/// squares; the intercept absorbs the O(1/N) estimator offset.
pub fn fit_d(
    spec: &PolymerSpec,
    e_c: f64,
    epsilons: &[f64],
    n: usize,
    samples: usize,
    seed: u64,
) -> Result<QuadraticFit> {
    if epsilons.len() < 3 {
        return Err(Error::InvalidParameter(
            "fit_d needs at least three epsilon values".into(),
        ));
    }
    let mut meas = Vec::with_capacity(epsilons.len());
    for (k, &eps) in epsilons.iter().enumerate() {
        let est = lyapunov_slope(
            spec,
            C64::new(e_c + eps, 0.0),
            n,
            samples,
            seed.wrapping_add(k as u64),
        )?;
        meas.push((eps, est.gamma, est.stderr));
    }
    let design: Vec<Vec<f64>> = meas
        .iter()
        .map(|&(e, _, _)| vec![1.0, e * e, e * e * e])
        .collect();
    let y: Vec<f64> = meas.iter().map(|&(_, g, _)| g).collect();
    let w: Vec<f64> = meas
        .iter()
        .map(|&(_, _, se)| 1.0 / (se * se).max(1e-30))
        .collect();
    let (beta, se) = weighted_lsq(&design, &y, &w);

    let rel_residuals: Vec<f64> = meas
        .iter()
        .map(|&(e, g, _)| {
            let fit = beta[0] + beta[1] * e * e + beta[2] * e * e * e;
            ((g - fit) / g.abs().max(1e-300)).abs()
        })
        .collect();
    let mut eps0 = 0.0;
    for (k, &(e, _, _)) in meas.iter().enumerate() {
        if rel_residuals[k] < 0.2 {
            eps0 = eps0.max(e);
        }
    }
    let d_hat = beta[1];
    let flagged = d_hat <= 0.0 && d_hat.abs() > 2.0 * se[1];
    Ok(QuadraticFit {
        d_hat,
        d_stderr: se[1],
        cubic: beta[2],
        intercept: beta[0],
        eps0,
        measurements: meas,
        rel_residuals,
        flagged_nonpositive: flagged,
    })
}

/// Which transfer-matrix event a probability estimate refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EventKind {
    /// ||T(N, 0)||^2 >= threshold.
    NormExceeds,
    /// max_{0 <= n <= N} ||T(n, 0)||^2 >= threshold.
    RunningMaxExceeds,
    /// max_{0 <= n, m <= N} ||T(n, m)|| <= threshold for all probe energies.
    UniformBounded,
}

/// Empirical probability of a transfer-matrix event with a Wilson interval.
#[derive(Clone, Debug)]
pub struct EventProbability {
    pub kind: EventKind,
    /// Probe energies (one entry except for the uniform-bounded event).
    pub probes: Vec<C64>,
    pub n_sites: usize,
    pub log_threshold: f64,
    pub p_hat: f64,
    pub wilson: (f64, f64),
    pub samples: usize,
}

/// Monte-Carlo frequency of one event at a single probe energy.
pub fn event_probability(
    spec: &PolymerSpec,
    kind: EventKind,
    z: C64,
    n: usize,
    log_threshold: f64,
    samples: usize,
    seed: u64,
) -> Result<EventProbability> {
    event_probability_probes(spec, kind, &[z], n, log_threshold, samples, seed)
}

/// Monte-Carlo frequency of an event evaluated jointly over probe energies.
/// Exceedance events trigger if any probe exceeds; the uniform-bounded event
/// requires the bound to hold at every probe.
pub fn event_probability_probes(
    spec: &PolymerSpec,
    kind: EventKind,
    probes: &[C64],
    n: usize,
    log_threshold: f64,
    samples: usize,
    seed: u64,
) -> Result<EventProbability> {
    if probes.is_empty() {
        return Err(Error::InvalidParameter("no probe energies".into()));
    }
    let hits: Vec<u64> = {
        let chunks: Vec<(usize, usize)> = (0..samples)
            .step_by(CHUNK)
            .map(|s| (s, (s + CHUNK).min(samples)))
            .collect();
        chunks
            .par_iter()
            .map(|&(lo, hi)| {
                let mut count = 0u64;
                for i in lo..hi {
                    let real = sample_realization(spec, seed, i as u64, n).expect("window");
                    let hit = match kind {
                        EventKind::NormExceeds => probes.iter().any(|&z| {
                            2.0 * forward_product(&real, z, n).log_frobenius() >= log_threshold
                        }),
                        EventKind::RunningMaxExceeds => probes.iter().any(|&z| {
                            running_max_log_norm(&real, z, n) * 2.0 >= log_threshold
                        }),
                        EventKind::UniformBounded => probes.iter().all(|&z| {
                            max_pair_log_norm(&real, z, n, Some(log_threshold))
                                .is_at_most(log_threshold)
                        }),
                    };
                    if hit {
                        count += 1;
                    }
                }
                count
            })
            .collect()
    };
    let successes: u64 = hits.iter().sum();
    let p_hat = successes as f64 / samples as f64;
    Ok(EventProbability {
        kind,
        probes: probes.to_vec(),
        n_sites: n,
        log_threshold,
        p_hat,
        wilson: wilson_interval(successes, samples as u64),
        samples,
    })
}

/// max over 0 <= k <= n of log ||T(k, 0)||_F.
pub fn running_max_log_norm(real: &Realization, z: C64, n: usize) -> f64 {
    let mut p = ScaledMat2::identity();
    let mut best = p.log_frobenius();
    for j in 0..n as i64 {
        p = p.premul(&single_transfer(z, real.v_at(j), real.t_at(j)));
        best = best.max(p.log_frobenius());
    }
    best
}

/// max over -n <= k <= n of log ||T(k, 0)||_F (two-sided).
pub fn running_max_log_norm_two_sided(real: &Realization, z: C64, n: usize) -> f64 {
    let mut best = running_max_log_norm(real, z, n);
    // Leftward: T(-k, 0) = T(0, -k)^{-1}; same Frobenius norm as T(0, -k).
    let mut p = ScaledMat2::identity();
    for j in (-(n as i64)..0).rev() {
        p = p.mul(&ScaledMat2::from_mat(single_transfer(z, real.v_at(j), real.t_at(j))));
        best = best.max(p.log_frobenius());
    }
    best
}

/// Per-sample values of the uniform-bound statistic
/// max over probes of max_{0 <= n, m <= N} log ||T^z(n, m)||_F,
/// used to calibrate the bound level of the uniform-bounded event.
pub fn uniform_max_statistic(
    spec: &PolymerSpec,
    probes: &[C64],
    n: usize,
    samples: usize,
    seed: u64,
) -> Vec<f64> {
    let chunks: Vec<(usize, usize)> = (0..samples)
        .step_by(CHUNK)
        .map(|s| (s, (s + CHUNK).min(samples)))
        .collect();
    let nested: Vec<Vec<f64>> = chunks
        .par_iter()
        .map(|&(lo, hi)| {
            (lo..hi)
                .map(|i| {
                    let real = sample_realization(spec, seed, i as u64, n).expect("window");
                    probes
                        .iter()
                        .map(|&z| max_pair_log_norm(&real, z, n, None).value())
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .collect()
        })
        .collect();
    nested.into_iter().flatten().collect()
}

/// log of the Monte-Carlo mean of 1 / max_{0 <= |k| <= N} ||T^z(k, 0)||^2,
/// accumulated in log space.
pub fn corollary_expectation(
    spec: &PolymerSpec,
    z: C64,
    n: usize,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    if n < 10 * spec.correlation_length {
        return Err(Error::InvalidParameter(format!(
            "N = {n} is below 10 correlation lengths"
        )));
    }
    let chunks: Vec<(usize, usize)> = (0..samples)
        .step_by(CHUNK)
        .map(|s| (s, (s + CHUNK).min(samples)))
        .collect();
    let logs: Vec<Vec<f64>> = chunks
        .par_iter()
        .map(|&(lo, hi)| {
            (lo..hi)
                .map(|i| {
                    let real = sample_realization(spec, seed, i as u64, n).expect("window");
                    -2.0 * running_max_log_norm_two_sided(&real, z, n)
                })
                .collect()
        })
        .collect();
    let flat: Vec<f64> = logs.into_iter().flatten().collect();
    Ok(log_sum_exp(&flat) - (samples as f64).ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{anderson_spec, dimer_spec};
    use crate::transfer::gamma1_bound;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn free_lattice_outside_spectrum() {
        let spec = dimer_spec(0.0, 0.5).unwrap();
        let est = lyapunov(&spec, c(3.0, 0.0), 4000, 8, 1).unwrap();
        let rate = ((3.0 + 5.0f64.sqrt()) / 2.0).ln();
        assert!((est.gamma - rate).abs() < 1e-3, "gamma {}", est.gamma);
    }

    #[test]
    fn free_lattice_inside_spectrum() {
        // Elliptic constant cocycle: gamma = 0; the norm stays bounded, so
        // the estimate is at most (log of the bounded prefactor)/N.
        let spec = dimer_spec(0.0, 0.5).unwrap();
        let n = 10_000;
        let est = lyapunov(&spec, c(1.0, 0.0), n, 4, 1).unwrap();
        assert!(est.gamma.abs() < 10.0 / n as f64, "gamma {}", est.gamma);
        assert!(est.gamma >= -1e-6);
    }

    #[test]
    fn dimer_gamma_vanishes_at_critical_energy() {
        let spec = dimer_spec(0.5, 0.5).unwrap();
        let est = lyapunov_slope(&spec, c(0.5, 0.0), 20_000, 24, 3).unwrap();
        assert!(
            est.gamma.abs() < 3.0 * est.stderr.max(1e-7),
            "gamma {} stderr {}",
            est.gamma,
            est.stderr
        );
    }

    #[test]
    fn gamma_bounded_by_gamma1() {
        let spec = anderson_spec(1.0, 0.5).unwrap();
        let z = c(0.7, 0.0);
        let est = lyapunov(&spec, z, 2000, 16, 9).unwrap();
        assert!(est.gamma > 0.0);
        assert!(est.gamma <= gamma1_bound(&spec, z));
    }

    #[test]
    fn subadditivity_in_n() {
        let spec = anderson_spec(1.0, 0.5).unwrap();
        let z = c(0.3, 0.0);
        let mut prev = f64::INFINITY;
        let mut prev_se = 0.0;
        for n in [1000, 2000, 4000, 8000] {
            let est = lyapunov(&spec, z, n, 32, 5).unwrap();
            assert!(
                est.gamma <= prev + 2.0 * (est.stderr + prev_se),
                "not subadditive at N = {n}"
            );
            prev = est.gamma;
            prev_se = est.stderr;
        }
    }

    #[test]
    fn trivial_norm_event_has_probability_one() {
        let spec = dimer_spec(0.5, 0.5).unwrap();
        let ev = event_probability(
            &spec,
            EventKind::NormExceeds,
            c(0.4, 0.0),
            200,
            0.0,
            200,
            7,
        )
        .unwrap();
        assert_eq!(ev.p_hat, 1.0);
        assert!(ev.wilson.0 <= ev.p_hat && ev.p_hat <= ev.wilson.1);
    }

    #[test]
    fn lemma_simple_lower_bound_anderson() {
        // p(Omega_N) >= gamma0 / (2 gamma1 - gamma0) - 3 sigma with
        // gamma0 = half the fitted Lyapunov exponent.
        let spec = anderson_spec(1.0, 0.5).unwrap();
        let n = 600;
        let samples = 400;
        for (k, e) in [-1.5, -0.7, 0.0, 0.8, 1.6].iter().enumerate() {
            let z = c(*e, 0.0);
            let gamma_hat = lyapunov(&spec, z, 4000, 48, 100 + k as u64).unwrap().gamma;
            let gamma0 = 0.5 * gamma_hat;
            let gamma1 = gamma1_bound(&spec, z);
            let ev = event_probability(
                &spec,
                EventKind::NormExceeds,
                z,
                n,
                gamma0 * n as f64,
                samples,
                200 + k as u64,
            )
            .unwrap();
            let bound = gamma0 / (2.0 * gamma1 - gamma0);
            let sigma = (ev.p_hat * (1.0 - ev.p_hat) / samples as f64).sqrt();
            assert!(
                ev.p_hat >= bound - 3.0 * sigma.max(1e-3),
                "E = {e}: p_hat {} < bound {}",
                ev.p_hat,
                bound
            );
        }
    }

    #[test]
    fn corollary_expectation_free_lattice_order_one() {
        // Inside the spectrum of the free lattice the cocycle is bounded, so
        // the expectation stays of order one (log-mean near zero, not
        // decaying with N).
        let spec = dimer_spec(0.0, 0.5).unwrap();
        let a = corollary_expectation(&spec, c(1.0, 0.0), 200, 16, 3).unwrap();
        let b = corollary_expectation(&spec, c(1.0, 0.0), 3200, 16, 3).unwrap();
        assert!(a > -4.0 && b > -4.0, "log means {a}, {b}");
        assert!((a - b).abs() < 2.0, "should not decay with N: {a} vs {b}");
    }

    #[test]
    fn corollary_expectation_anderson_decays_linearly() {
        // In the localized phase the decay rate of the log-mean in N is
        // about twice the Lyapunov exponent.
        let spec = anderson_spec(1.0, 0.5).unwrap();
        let z = c(0.5, 0.0);
        let gamma = lyapunov(&spec, z, 4000, 64, 11).unwrap().gamma;
        let n1 = 200;
        let n2 = 400;
        let a = corollary_expectation(&spec, z, n1, 400, 13).unwrap();
        let b = corollary_expectation(&spec, z, n2, 400, 13).unwrap();
        let rate = (a - b) / (n2 - n1) as f64;
        assert!(
            (rate - 2.0 * gamma).abs() < 0.6 * gamma,
            "rate {rate} vs 2 gamma {}",
            2.0 * gamma
        );
    }
}
