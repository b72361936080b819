//! Greedy sparse recovery: orthogonal matching pursuit computed by successive
//! regression, its blocked generalisation, the usual OMP baselines, coherence
//! diagnostics and a benchmark workbench.
//!
//! All solvers count floating-point operations through [`FlopCounter`], with
//! per-kernel attribution, so cost claims can be checked exactly.

pub mod diagnostics;
pub mod dictionary;
pub mod error;
pub mod matrix;
pub mod pursuit;
pub mod workbench;

#[cfg(test)]
pub(crate) mod testutil;

pub use dictionary::Dictionary;
pub use error::{Error, Result};
pub use matrix::{DenseMatrix, FlopCounter, Flops, Kernel, KernelFlops};
pub use pursuit::{
    bsr, gomp, omp_naive, omp_qr, omp_sr, HaltReason, Method, SolverConfig, SolverFailure,
    SolverResult, SparseSignal,
};
