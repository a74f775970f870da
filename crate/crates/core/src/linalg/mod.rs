//! Dense kernels: symmetric eigensolve, log-norm, matrix exponential and its
//! parameter derivative, Lyapunov solve and finite-horizon Gramian.

mod eig;
mod expm;
mod lyap;

pub use eig::{log_norm, norm2, spectral_abscissa, sym_eig, sym_eig_max, sym_sqrt, LogNormResult, SymEigen};
pub use expm::{expm, expm_param_derivative};
pub use lyap::{gramian_finite, lyap_observability, LyapunovSolution};
