//! Random polymer Jacobi-matrix families and disorder sampling.
//!
//! A polymer family is built from two finite blocks of (hopping, potential)
//! pairs. A disorder configuration juxtaposes independent copies of the
//! blocks, chosen with probabilities `p_plus` / `p_minus`, and places the
//! lattice origin at a random offset inside one block. The offset law is
//! length-weighted, `P(sign s, offset l) = p_s / (p_+ L_+ + p_- L_-)`, the
//! unique choice that makes the site process stationary under the shift.

use crate::error::{Error, Result};
use crate::rng::CounterRng;

/// Sign of a polymer block.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockSign {
    Plus,
    Minus,
}

/// Model data for a two-block random polymer family.
#[derive(Clone, Debug)]
pub struct PolymerSpec {
    pub t_plus: Vec<f64>,
    pub v_plus: Vec<f64>,
    pub t_minus: Vec<f64>,
    pub v_minus: Vec<f64>,
    pub p_plus: f64,
    /// max{L_+, L_-}; sites this far apart are independent.
    pub correlation_length: usize,
    /// Global bound on |v|, t and 1/t, computed from the block entries.
    pub bound_c: f64,
}

impl PolymerSpec {
    pub fn p_minus(&self) -> f64 {
        1.0 - self.p_plus
    }

    pub fn block(&self, sign: BlockSign) -> (&[f64], &[f64]) {
        match sign {
            BlockSign::Plus => (&self.t_plus, &self.v_plus),
            BlockSign::Minus => (&self.t_minus, &self.v_minus),
        }
    }

    pub fn block_len(&self, sign: BlockSign) -> usize {
        match sign {
            BlockSign::Plus => self.t_plus.len(),
            BlockSign::Minus => self.t_minus.len(),
        }
    }

    /// sup of the hoppings.
    pub fn t_sup(&self) -> f64 {
        self.t_plus
            .iter()
            .chain(self.t_minus.iter())
            .fold(f64::MIN, |m, &t| m.max(t))
    }

    /// sup of 1/t over the hoppings.
    pub fn t_inv_sup(&self) -> f64 {
        self.t_plus
            .iter()
            .chain(self.t_minus.iter())
            .fold(f64::MIN, |m, &t| m.max(1.0 / t))
    }

    /// sup of |v| over the potentials.
    pub fn v_sup(&self) -> f64 {
        self.v_plus
            .iter()
            .chain(self.v_minus.iter())
            .fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    /// A-priori bracket containing the spectrum of every realization:
    /// [-|v|_inf - 2 t_inf, |v|_inf + 2 t_inf].
    pub fn spectrum_bracket(&self) -> (f64, f64) {
        let r = self.v_sup() + 2.0 * self.t_sup();
        (-r, r)
    }

    /// The distinct (t, v) site values this family can produce.
    pub fn site_values(&self) -> Vec<(f64, f64)> {
        let mut vals: Vec<(f64, f64)> = Vec::new();
        for (t, v) in self
            .t_plus
            .iter()
            .zip(&self.v_plus)
            .chain(self.t_minus.iter().zip(&self.v_minus))
        {
            if !vals.iter().any(|&(a, b)| a == *t && b == *v) {
                vals.push((*t, *v));
            }
        }
        vals
    }
}

fn validate_block(side: char, t: &[f64], v: &[f64]) -> Result<()> {
    if t.is_empty() {
        return Err(Error::EmptyBlock { side });
    }
    if t.len() != v.len() {
        return Err(Error::MismatchedBlock {
            side,
            t_len: t.len(),
            v_len: v.len(),
        });
    }
    for (i, &ti) in t.iter().enumerate() {
        if !(ti > 0.0) {
            return Err(Error::NonPositiveHopping {
                side,
                index: i,
                value: ti,
            });
        }
    }
    Ok(())
}

/// Validate block data and assemble a spec.
pub fn build_spec(
    t_plus: Vec<f64>,
    v_plus: Vec<f64>,
    t_minus: Vec<f64>,
    v_minus: Vec<f64>,
    p_plus: f64,
) -> Result<PolymerSpec> {
    validate_block('+', &t_plus, &v_plus)?;
    validate_block('-', &t_minus, &v_minus)?;
    if !(p_plus > 0.0 && p_plus < 1.0) {
        return Err(Error::InvalidProbability(p_plus));
    }
    let correlation_length = t_plus.len().max(t_minus.len());
    let bound_c = {
        let mut c = 0.0f64;
        for (t, v) in t_plus
            .iter()
            .zip(&v_plus)
            .chain(t_minus.iter().zip(&v_minus))
        {
            c = c.max(*t).max(1.0 / *t).max(v.abs());
        }
        c
    };
    Ok(PolymerSpec {
        t_plus,
        v_plus,
        t_minus,
        v_minus,
        p_plus,
        correlation_length,
        bound_c,
    })
}

/// Dimer family: two-site blocks with unit hopping and potentials +-lambda.
pub fn dimer_spec(lambda: f64, p_plus: f64) -> Result<PolymerSpec> {
    build_spec(
        vec![1.0, 1.0],
        vec![lambda, lambda],
        vec![1.0, 1.0],
        vec![-lambda, -lambda],
        p_plus,
    )
}

/// Bernoulli-Anderson family: single-site blocks, unit hopping, v = +-lambda.
pub fn anderson_spec(lambda: f64, p_plus: f64) -> Result<PolymerSpec> {
    build_spec(vec![1.0], vec![lambda], vec![1.0], vec![-lambda], p_plus)
}

/// One disorder configuration materialized on the window [-half_width, half_width].
#[derive(Clone, Debug)]
pub struct Realization {
    pub signs: Vec<BlockSign>,
    /// Index into `signs` of the block containing the origin.
    pub origin_block_index: usize,
    /// Offset of the origin inside its block (0 <= l < L_sigma1).
    pub origin_offset: usize,
    pub half_width: usize,
    /// Hopping t_n for n in [-half_width, half_width], indexed by n + half_width.
    pub t: Vec<f64>,
    /// Potential v_n, same indexing.
    pub v: Vec<f64>,
}

impl Realization {
    #[inline]
    pub fn idx(&self, n: i64) -> usize {
        (n + self.half_width as i64) as usize
    }

    #[inline]
    pub fn t_at(&self, n: i64) -> f64 {
        self.t[self.idx(n)]
    }

    #[inline]
    pub fn v_at(&self, n: i64) -> f64 {
        self.v[self.idx(n)]
    }

    pub fn contains(&self, n: i64) -> bool {
        n.unsigned_abs() as usize <= self.half_width
    }
}

/// Draw a realization as a pure function of (seed, sample_index).
///
/// Draw order is fixed: origin block and offset first, then blocks to the
/// right of the origin block, then blocks to the left. Partial blocks at the
/// window edges are truncated.
pub fn sample_realization(
    spec: &PolymerSpec,
    seed: u64,
    sample_index: u64,
    half_width: usize,
) -> Result<Realization> {
    if half_width < spec.correlation_length {
        return Err(Error::WindowTooSmall {
            window: half_width,
            correlation_length: spec.correlation_length,
        });
    }
    let mut rng = CounterRng::new(seed, sample_index);

    // Length-weighted stationary origin law.
    let lp = spec.block_len(BlockSign::Plus);
    let lm = spec.block_len(BlockSign::Minus);
    let z = spec.p_plus * lp as f64 + spec.p_minus() * lm as f64;
    let u = rng.uniform() * z;
    let (origin_sign, origin_offset) = if u < spec.p_plus * lp as f64 {
        (BlockSign::Plus, (u / spec.p_plus) as usize % lp)
    } else {
        let u2 = u - spec.p_plus * lp as f64;
        (BlockSign::Minus, (u2 / spec.p_minus()) as usize % lm)
    };

    let size = 2 * half_width + 1;
    let mut t = vec![0.0; size];
    let mut v = vec![0.0; size];
    let mut signs = Vec::new();

    let hw = half_width as i64;
    let l = origin_offset as i64;

    // Origin block occupies sites [-l, -l + L - 1].
    let mut fill_block = |sign: BlockSign, start: i64, t: &mut [f64], v: &mut [f64]| {
        let (bt, bv) = spec.block(sign);
        for (j, (&tj, &vj)) in bt.iter().zip(bv.iter()).enumerate() {
            let n = start + j as i64;
            if (-hw..=hw).contains(&n) {
                t[(n + hw) as usize] = tj;
                v[(n + hw) as usize] = vj;
            }
        }
    };

    signs.push(origin_sign);
    fill_block(origin_sign, -l, &mut t, &mut v);

    // Rightward blocks.
    let mut pos = -l + spec.block_len(origin_sign) as i64;
    while pos <= hw {
        let s = if rng.bernoulli(spec.p_plus) {
            BlockSign::Plus
        } else {
            BlockSign::Minus
        };
        signs.push(s);
        fill_block(s, pos, &mut t, &mut v);
        pos += spec.block_len(s) as i64;
    }

    // Leftward blocks; each new block ends just before the previous start.
    let mut end = -l - 1;
    let mut left_signs = Vec::new();
    while end >= -hw {
        let s = if rng.bernoulli(spec.p_plus) {
            BlockSign::Plus
        } else {
            BlockSign::Minus
        };
        left_signs.push(s);
        let start = end - spec.block_len(s) as i64 + 1;
        fill_block(s, start, &mut t, &mut v);
        end = start - 1;
    }
    left_signs.reverse();
    let origin_block_index = left_signs.len();
    left_signs.extend(signs);

    Ok(Realization {
        signs: left_signs,
        origin_block_index,
        origin_offset,
        half_width,
        t,
        v,
    })
}

/// Symmetric tridiagonal operator data on a finite index range with
/// Dirichlet truncation.
#[derive(Clone, Debug)]
pub struct JacobiWindow {
    /// First lattice index of the window.
    pub start: i64,
    /// Diagonal v_n in window order.
    pub diag: Vec<f64>,
    /// Off-diagonal coupling site (start+i) to (start+i+1): t_{start+i+1}.
    pub off: Vec<f64>,
}

impl JacobiWindow {
    pub fn size(&self) -> usize {
        self.diag.len()
    }

    /// Position of lattice site n inside the window arrays.
    pub fn offset_of(&self, n: i64) -> usize {
        (n - self.start) as usize
    }

    /// Gershgorin-type spectrum bracket for this window.
    pub fn bracket(&self) -> (f64, f64) {
        let v_sup = self.diag.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
        let t_sup = self.off.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
        let r = v_sup + 2.0 * t_sup;
        (-r, r)
    }

    pub fn t_sup(&self) -> f64 {
        self.off.iter().fold(f64::MIN, |m, &x| m.max(x))
    }
}

/// Materialize the full window [-half_width, half_width].
pub fn materialize(real: &Realization) -> JacobiWindow {
    let hw = real.half_width as i64;
    materialize_range(real, -hw, hw)
}

/// Materialize sites [lo, hi] of a realization as a Dirichlet window.
pub fn materialize_range(real: &Realization, lo: i64, hi: i64) -> JacobiWindow {
    assert!(lo <= hi && real.contains(lo) && real.contains(hi));
    let n = (hi - lo + 1) as usize;
    let mut diag = Vec::with_capacity(n);
    let mut off = Vec::with_capacity(n - 1);
    for site in lo..=hi {
        diag.push(real.v_at(site));
        if site < hi {
            off.push(real.t_at(site + 1));
        }
    }
    JacobiWindow {
        start: lo,
        diag,
        off,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn anderson_spec_has_unit_correlation_length() {
        let s = anderson_spec(1.0, 0.5).unwrap();
        assert_eq!(s.correlation_length, 1);
        assert_eq!(s.bound_c, 1.0);
    }

    #[test]
    fn dimer_spec_matches_definition() {
        let s = dimer_spec(0.5, 0.5).unwrap();
        assert_eq!(s.t_plus, vec![1.0, 1.0]);
        assert_eq!(s.v_plus, vec![0.5, 0.5]);
        assert_eq!(s.v_minus, vec![-0.5, -0.5]);
        assert_eq!(s.correlation_length, 2);
    }

    #[test]
    fn zero_lambda_dimer_is_free() {
        let s = dimer_spec(0.0, 0.5).unwrap();
        assert_eq!(s.v_plus, s.v_minus);
        assert_eq!(s.t_plus, s.t_minus);
    }

    #[test]
    fn nonpositive_hopping_rejected_with_index() {
        let e = build_spec(vec![0.0, 1.0], vec![0.0, 0.0], vec![1.0], vec![0.0], 0.5).unwrap_err();
        match e {
            Error::NonPositiveHopping { side, index, .. } => {
                assert_eq!(side, '+');
                assert_eq!(index, 0);
            }
            other => panic!("unexpected error {other:?}"),
        }
        assert!(build_spec(vec![2.0, 1.0], vec![0.0, 0.0], vec![1.0], vec![0.0], 0.5).is_ok());
    }

    #[test]
    fn empty_block_rejected() {
        assert!(matches!(
            build_spec(vec![], vec![], vec![1.0], vec![0.0], 0.5),
            Err(Error::EmptyBlock { side: '+' })
        ));
    }

    #[test]
    fn sampling_is_deterministic() {
        let s = dimer_spec(0.5, 0.5).unwrap();
        let a = sample_realization(&s, 42, 7, 100).unwrap();
        let b = sample_realization(&s, 42, 7, 100).unwrap();
        assert_eq!(a.t, b.t);
        assert_eq!(a.v, b.v);
        assert_eq!(a.origin_offset, b.origin_offset);
    }

    #[test]
    fn anderson_realization_is_iid_signs() {
        let s = anderson_spec(1.0, 0.5).unwrap();
        let r = sample_realization(&s, 1, 0, 50).unwrap();
        assert_eq!(r.origin_offset, 0);
        assert!(r.t.iter().all(|&t| t == 1.0));
        assert!(r.v.iter().all(|&v| v == 1.0 || v == -1.0));
    }

    #[test]
    fn dimer_origin_marginal_within_3_sigma() {
        // P(v_0 = +lambda) = 1/2 under the stationary law.
        let s = dimer_spec(0.5, 0.5).unwrap();
        let n = 100_000;
        let mut plus = 0usize;
        for i in 0..n {
            let r = sample_realization(&s, 99, i as u64, 4).unwrap();
            if r.v_at(0) > 0.0 {
                plus += 1;
            }
        }
        let p_hat = plus as f64 / n as f64;
        let sigma = (0.25 / n as f64).sqrt();
        assert!(
            (p_hat - 0.5).abs() < 3.0 * sigma,
            "p_hat = {p_hat}, sigma = {sigma}"
        );
    }

    #[test]
    fn realization_is_block_juxtaposition() {
        let s = build_spec(
            vec![1.0, 2.0, 3.0],
            vec![0.1, 0.2, 0.3],
            vec![4.0],
            vec![-0.4],
            0.5,
        )
        .unwrap();
        for idx in 0..50 {
            let r = sample_realization(&s, 5, idx, 30).unwrap();
            let hw = r.half_width as i64;
            // Lay the recorded blocks out so the origin block starts at
            // -origin_offset and compare with the stored arrays.
            let left_len: i64 = r.signs[..r.origin_block_index]
                .iter()
                .map(|&x| s.block_len(x) as i64)
                .sum();
            let mut pos = -(r.origin_offset as i64) - left_len;
            let mut t = vec![0.0; 2 * r.half_width + 1];
            let mut v = vec![0.0; 2 * r.half_width + 1];
            for &sg in &r.signs {
                let (bt, bv) = s.block(sg);
                for (j, (&tj, &vj)) in bt.iter().zip(bv).enumerate() {
                    let site = pos + j as i64;
                    if (-hw..=hw).contains(&site) {
                        t[(site + hw) as usize] = tj;
                        v[(site + hw) as usize] = vj;
                    }
                }
                pos += s.block_len(sg) as i64;
            }
            assert_eq!(t, r.t, "hoppings disagree (idx {idx})");
            assert_eq!(v, r.v, "potentials disagree (idx {idx})");
        }
    }

    #[test]
    fn materialize_free_window() {
        let s = dimer_spec(0.0, 0.5).unwrap();
        let r = sample_realization(&s, 0, 0, 2).unwrap();
        let w = materialize(&r);
        assert_eq!(w.size(), 5);
        assert!(w.diag.iter().all(|&d| d == 0.0));
        assert!(w.off.iter().all(|&t| t == 1.0));
    }

    #[test]
    fn dimer_diagonal_constant_on_blocks() {
        let s = dimer_spec(0.5, 0.5).unwrap();
        let r = sample_realization(&s, 3, 1, 20).unwrap();
        let w = materialize(&r);
        // Pairs aligned to block boundaries: the block containing the origin
        // starts at -origin_offset; every block is two sites of equal v.
        let mut site = -(r.origin_offset as i64);
        while site >= -(r.half_width as i64) + 2 {
            site -= 2;
        }
        let hw = r.half_width as i64;
        let mut n = site;
        while n + 1 <= hw {
            if n >= -hw {
                assert_eq!(w.diag[(n + hw) as usize], w.diag[(n + 1 + hw) as usize]);
            }
            n += 2;
        }
    }

    #[test]
    fn window_below_correlation_length_rejected() {
        let s = dimer_spec(0.5, 0.5).unwrap();
        assert!(matches!(
            sample_realization(&s, 0, 0, 1),
            Err(Error::WindowTooSmall { .. })
        ));
    }

    #[test]
    fn independence_at_distance_correlation_length() {
        // Empirical correlation of v_0 and v_n vanishes for |n| >= L.
        let s = dimer_spec(1.0, 0.5).unwrap();
        let n_samples = 20_000;
        let mut sums = [0.0f64; 3]; // E[v0*v2], E[v0], E[v2]
        for i in 0..n_samples {
            let r = sample_realization(&s, 11, i as u64, 8).unwrap();
            let (a, b) = (r.v_at(0), r.v_at(2));
            sums[0] += a * b;
            sums[1] += a;
            sums[2] += b;
        }
        let n = n_samples as f64;
        let cov = sums[0] / n - (sums[1] / n) * (sums[2] / n);
        // v in {-1, 1}: var = 1, so correlation = cov; 3 sigma ~ 3/sqrt(n)
        assert!(cov.abs() < 3.0 / n.sqrt(), "corr = {cov}");
    }

    #[test]
    fn shift_coupling_marginal_chi_square() {
        // The marginal of v at a shifted site matches the stationary law.
        // Dimer, p = 0.4: P(v = +l) = 0.4. Chi-square at the 1% level, 1 dof.
        let s = dimer_spec(0.5, 0.4).unwrap();
        let n = 10_000usize;
        for site in [0i64, 3, 7] {
            let mut plus = 0usize;
            for i in 0..n {
                let r = sample_realization(&s, 17, i as u64, 10).unwrap();
                if r.v_at(site) > 0.0 {
                    plus += 1;
                }
            }
            let expected_plus = 0.4 * n as f64;
            let expected_minus = 0.6 * n as f64;
            let minus = (n - plus) as f64;
            let chi2 = (plus as f64 - expected_plus).powi(2) / expected_plus
                + (minus - expected_minus).powi(2) / expected_minus;
            // chi-square 1% critical value, 1 dof
            assert!(chi2 < 6.635, "site {site}: chi2 = {chi2}");
        }
    }
}
