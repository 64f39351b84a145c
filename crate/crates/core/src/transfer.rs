//! Transfer-matrix cocycles, polymer block matrices, and critical energies.
//!
//! The single-site transfer matrix at complex energy z for site data (v, t)
//! is `[[(z - v)/t, -t], [1/t, 0]]`; it is unimodular for every (v, t).
//! Cocycles are ordered products of site matrices; critical energies are the
//! real energies at which both polymer block matrices are elliptic (or equal
//! to plus or minus the identity) and commute.

use crate::error::{Error, Result};
use crate::mat2::{C64, Mat2, ScaledMat2};
use crate::model::{BlockSign, PolymerSpec, Realization};
use crate::stats::linear_fit;

/// Single-site transfer matrix for site data (v, t) at energy z.
#[inline]
pub fn single_transfer(z: C64, v: f64, t: f64) -> Mat2 {
    let ti = 1.0 / t;
    Mat2::new(
        (z - v) * ti,
        C64::new(-t, 0.0),
        C64::new(ti, 0.0),
        C64::ZERO,
    )
}

/// Scaled form of [`single_transfer`] (log_scale 0 unless entries are huge).
pub fn single_transfer_scaled(z: C64, v: f64, t: f64) -> ScaledMat2 {
    ScaledMat2::from_mat(single_transfer(z, v, t))
}

/// Cocycle T^z(n, m): the product T_{n-1} ... T_m for n > m, the identity for
/// n = m, and the inverse of T^z(m, n) for n < m.
pub fn cocycle(real: &Realization, z: C64, n: i64, m: i64) -> Result<ScaledMat2> {
    for idx in [n, m] {
        if idx.abs() > real.half_width as i64 {
            return Err(Error::IndexOutsideWindow {
                index: idx,
                half_width: real.half_width,
            });
        }
    }
    if n == m {
        return Ok(ScaledMat2::identity());
    }
    let (lo, hi) = (n.min(m), n.max(m));
    let mut p = ScaledMat2::identity();
    for j in lo..hi {
        p = p.premul(&single_transfer(z, real.v_at(j), real.t_at(j)));
    }
    if n > m {
        Ok(p)
    } else {
        Ok(p.inverse_unimodular())
    }
}

/// Polymer block matrix T^z_sign: the product over one full block in
/// descending site order.
pub fn polymer_matrix(spec: &PolymerSpec, sign: BlockSign, z: C64) -> ScaledMat2 {
    let (bt, bv) = spec.block(sign);
    let mut p = ScaledMat2::identity();
    for (&t, &v) in bt.iter().zip(bv.iter()) {
        p = p.premul(&single_transfer(z, v, t));
    }
    p
}

/// Uniform growth bound gamma_1 at energy z: max over the site values this
/// family can produce of log ||T^z_{v,t}||_F. Then log ||T^z(n, m)|| <=
/// gamma_1 |n - m| for every realization.
pub fn gamma1_bound(spec: &PolymerSpec, z: C64) -> f64 {
    spec.site_values()
        .iter()
        .map(|&(t, v)| single_transfer(z, v, t).frobenius().ln())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Ellipticity classification of a polymer matrix at a real energy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixKind {
    Elliptic,
    PlusIdentity,
    MinusIdentity,
}

const IDENTITY_TOL: f64 = 1e-9;
const ELLIPTIC_TRACE_MARGIN: f64 = 1e-6;

fn classify(m: &Mat2) -> Option<MatrixKind> {
    let id = Mat2::identity();
    if m.sub(&id).frobenius() < IDENTITY_TOL {
        return Some(MatrixKind::PlusIdentity);
    }
    if m.sub(&id.scale(-1.0)).frobenius() < IDENTITY_TOL {
        return Some(MatrixKind::MinusIdentity);
    }
    let tr = m.trace();
    if tr.re.abs() < 2.0 - ELLIPTIC_TRACE_MARGIN && tr.im.abs() < IDENTITY_TOL {
        return Some(MatrixKind::Elliptic);
    }
    None
}

/// Rotation angle eta in [0, pi] of an elliptic or +-identity SL(2) matrix.
fn rotation_angle(kind: MatrixKind, m: &Mat2) -> f64 {
    match kind {
        MatrixKind::PlusIdentity => 0.0,
        MatrixKind::MinusIdentity => std::f64::consts::PI,
        MatrixKind::Elliptic => (m.trace().re / 2.0).clamp(-1.0, 1.0).acos(),
    }
}

/// Diagnostic record for one accepted critical energy.
#[derive(Clone, Debug)]
pub struct CriticalEnergyReport {
    pub energy: f64,
    pub trace_plus: C64,
    pub trace_minus: C64,
    pub commutator_norm: f64,
    pub kind_plus: MatrixKind,
    pub kind_minus: MatrixKind,
    pub eta_plus: f64,
    pub eta_minus: f64,
    /// E(e^{2 i eta}) = 1 within 1e-8.
    pub flag_2eta: bool,
    /// E(e^{4 i eta}) = 1 within 1e-8.
    pub flag_4eta: bool,
}

const DEGENERACY_TOL: f64 = 1e-8;

fn degeneracy_flags(spec: &PolymerSpec, eta_p: f64, eta_m: f64) -> (bool, bool) {
    let mean = |k: f64| -> C64 {
        C64::from_polar(1.0, k * eta_p) * spec.p_plus
            + C64::from_polar(1.0, k * eta_m) * spec.p_minus()
    };
    let one = C64::new(1.0, 0.0);
    (
        (mean(2.0) - one).norm() < DEGENERACY_TOL,
        (mean(4.0) - one).norm() < DEGENERACY_TOL,
    )
}

fn commutator_norm_at(spec: &PolymerSpec, energy: f64) -> f64 {
    let z = C64::new(energy, 0.0);
    let tp = polymer_matrix(spec, BlockSign::Plus, z).to_mat2();
    let tm = polymer_matrix(spec, BlockSign::Minus, z).to_mat2();
    tm.commutator(&tp).frobenius()
}

fn report_at(spec: &PolymerSpec, energy: f64) -> Option<CriticalEnergyReport> {
    let z = C64::new(energy, 0.0);
    let tp = polymer_matrix(spec, BlockSign::Plus, z).to_mat2();
    let tm = polymer_matrix(spec, BlockSign::Minus, z).to_mat2();
    let comm = tm.commutator(&tp).frobenius();
    if comm >= IDENTITY_TOL {
        return None;
    }
    let kind_plus = classify(&tp)?;
    let kind_minus = classify(&tm)?;
    let eta_plus = rotation_angle(kind_plus, &tp);
    let eta_minus = rotation_angle(kind_minus, &tm);
    let (flag_2eta, flag_4eta) = degeneracy_flags(spec, eta_plus, eta_minus);
    Some(CriticalEnergyReport {
        energy,
        trace_plus: tp.trace(),
        trace_minus: tm.trace(),
        commutator_norm: comm,
        kind_plus,
        kind_minus,
        eta_plus,
        eta_minus,
        flag_2eta,
        flag_4eta,
    })
}

/// Scan [lo, hi] for critical energies.
///
/// The commutator norm f(E) = ||[T^E_-, T^E_+]||_F is nonnegative, so zeros
/// show up as local minima of the grid scan; each bracketed minimum is
/// narrowed by golden-section until the bracket is below `tol` and accepted
/// only if the refined norm is below 1e-9 with both matrices elliptic or
/// +-identity.
pub fn find_critical_energies(
    spec: &PolymerSpec,
    interval: (f64, f64),
    grid_step: f64,
    tol: f64,
) -> Result<Vec<CriticalEnergyReport>> {
    if !(grid_step > 0.0) || !(tol > 0.0) {
        return Err(Error::InvalidParameter(
            "grid_step and tol must be positive".into(),
        ));
    }
    // Identical blocks commute trivially everywhere; there is no isolated
    // critical energy to report.
    if spec.t_plus == spec.t_minus && spec.v_plus == spec.v_minus {
        return Ok(Vec::new());
    }
    let (lo, hi) = interval;
    let n_pts = ((hi - lo) / grid_step).ceil() as usize + 1;
    let f: Vec<f64> = (0..n_pts)
        .map(|i| commutator_norm_at(spec, lo + i as f64 * grid_step))
        .collect();

    let mut found: Vec<CriticalEnergyReport> = Vec::new();
    for i in 1..n_pts.saturating_sub(1) {
        if f[i] <= f[i - 1] && f[i] <= f[i + 1] {
            let a = lo + (i - 1) as f64 * grid_step;
            let b = lo + (i + 1) as f64 * grid_step;
            let e_star = golden_min(|e| commutator_norm_at(spec, e), a, b, tol);
            if let Some(rep) = report_at(spec, e_star) {
                let duplicate = found
                    .iter()
                    .any(|r| (r.energy - rep.energy).abs() < 2.0 * tol.max(grid_step * 1e-6));
                if !duplicate {
                    found.push(rep);
                }
            }
        }
    }
    found.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    Ok(found)
}

fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a) > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Rotation angles and degeneracy flags at an accepted critical energy.
pub fn rotation_angles(spec: &PolymerSpec, e_c: f64) -> Result<CriticalEnergyReport> {
    report_at(spec, e_c).ok_or_else(|| Error::NotCritical(e_c, commutator_norm_at(spec, e_c)))
}

/// Least-squares slope of log ||[T^{E_c+eps}_-, T^{E_c+eps}_+]|| against
/// log eps. A slope near 1 certifies the linear commutator growth that
/// guarantees a strictly positive quadratic Lyapunov coefficient.
pub fn commutator_growth(spec: &PolymerSpec, e_c: f64, epsilons: &[f64]) -> Result<f64> {
    if epsilons.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::InvalidParameter("epsilons must be positive".into()));
    }
    let norms: Vec<f64> = epsilons
        .iter()
        .map(|&eps| commutator_norm_at(spec, e_c + eps))
        .collect();
    if norms.iter().all(|&x| x < 1e-14) {
        return Err(Error::DegenerateCommutator);
    }
    let lx: Vec<f64> = epsilons.iter().map(|&e| e.ln()).collect();
    let ly: Vec<f64> = norms.iter().map(|&x| x.max(1e-300).ln()).collect();
    let (_, slope, _) = linear_fit(&lx, &ly);
    Ok(slope)
}
