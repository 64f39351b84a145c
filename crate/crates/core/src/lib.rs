//! Numerical laboratory for quantum transport in one-dimensional random
//! polymer chains.
//!
//! The crate simulates wavepacket spreading under random Jacobi matrices
//! built from two-block polymer disorder. It provides transfer-matrix
//! cocycles with overflow-safe scaling, Monte-Carlo Lyapunov exponents,
//! resolvent (Green's function) columns with machine checks of the
//! deterministic decay inequalities, disorder-averaged moments of the
//! position operator by two independent routes, diffusion-exponent fits,
//! the integrated density of states, and Borel-transform bounds.

pub mod error;
pub mod green;
pub mod ids;
pub mod lyapunov;
pub mod mat2;
pub mod model;
pub mod moments;
pub mod pairmax;
pub mod rng;
pub mod stats;
pub mod transfer;
pub mod tridiag;

pub use error::{Error, Result};
pub use mat2::{C64, Mat2, ScaledMat2};
pub use model::{
    anderson_spec, build_spec, dimer_spec, materialize, sample_realization, BlockSign,
    JacobiWindow, PolymerSpec, Realization,
};
