//! Error type shared by all modules of the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("hopping t_{side}[{index}] = {value} must be strictly positive")]
    NonPositiveHopping {
        side: char,
        index: usize,
        value: f64,
    },

    #[error("block t_{side} is empty; polymer blocks need at least one site")]
    EmptyBlock { side: char },

    #[error("block lengths differ: t_{side} has {t_len} entries, v_{side} has {v_len}")]
    MismatchedBlock {
        side: char,
        t_len: usize,
        v_len: usize,
    },

    #[error("p_plus = {0} must lie strictly inside (0, 1)")]
    InvalidProbability(f64),

    #[error("window half-width {window} is below the correlation length {correlation_length}")]
    WindowTooSmall {
        window: usize,
        correlation_length: usize,
    },

    #[error("index {index} outside the realization window [-{half_width}, {half_width}]")]
    IndexOutsideWindow { index: i64, half_width: usize },

    #[error("Green's function requires Im z > 0, got Im z = {0}")]
    NonPositiveImaginaryPart(f64),

    #[error("z = {re} + {im}i lies in the spectrum (distance {dist}); bound undefined")]
    ZeroSpectralDistance { re: f64, im: f64, dist: f64 },

    #[error("E = {0} is not an accepted critical energy (commutator norm {1:.3e})")]
    NotCritical(f64, f64),

    #[error("commutator vanishes identically over the probe range; growth slope is degenerate")]
    DegenerateCommutator,

    #[error("spec has no critical energy in [{lo}, {hi}]; operation requires one")]
    NoCriticalEnergy { lo: f64, hi: f64 },

    #[error("window of {sites} sites too small for T = {t_cut}: policy needs {needed} sites")]
    WindowTooSmallForTime {
        sites: usize,
        t_cut: f64,
        needed: usize,
    },

    #[error("window of {sites} sites exceeds the dense-eigendecomposition limit {limit}")]
    WindowTooLargeForDense { sites: usize, limit: usize },

    #[error("measure is not Lipschitz at E = {energy}: mu([E-eps, E+eps]) = {mass} > C*eps = {bound} for eps = {eps}")]
    LipschitzCertificateFailed {
        energy: f64,
        eps: f64,
        mass: f64,
        bound: f64,
    },

    #[error("{0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
