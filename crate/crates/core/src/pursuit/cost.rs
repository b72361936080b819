//! Closed-form per-iteration flop counts.

use super::Method;
use crate::error::{Error, Result};
use crate::matrix::Kernel;

/// Flops of iteration `t` (1-based, `t` atoms selected after it) for an
/// `N x d` dictionary, excluding atom selection and the residual update.
///
/// * `omp_qr`: `(d - t)(4N - 1) + 5N + 1 + t^2`
/// * `omp_sr`: `t(2N - 1) + 4N - 1 + t^2`
pub fn cost_model(method: Method, t: u64, n: u64, d: u64) -> Result<u64> {
    if t == 0 || t > d || n == 0 {
        return Err(Error::Parameter(format!(
            "cost model needs 1 <= t <= d and N > 0 (t={t}, N={n}, d={d})"
        )));
    }
    match method {
        Method::OmpQr => Ok((d - t) * (4 * n - 1) + 5 * n + 1 + t * t),
        Method::OmpSr => Ok(t * (2 * n - 1) + 4 * n - 1 + t * t),
        other => Err(Error::Parameter(format!("no cost model for {other}"))),
    }
}

/// `cost_model(omp_qr) - cost_model(omp_sr)`, signed.
pub fn qr_minus_sr_margin(t: u64, n: u64, d: u64) -> Result<i128> {
    Ok(cost_model(Method::OmpQr, t, n, d)? as i128 - cost_model(Method::OmpSr, t, n, d)? as i128)
}

/// Kernels of the successive-regression update that carry the regressions,
/// the new coefficient and the back-tracking (the divides that scale the
/// regression coefficients are tallied separately under
/// [`Kernel::GammaDivide`]).
pub fn sr_core_kernels() -> [Kernel; 3] {
    [Kernel::GammaInner, Kernel::Beta, Kernel::Backtrack]
}
