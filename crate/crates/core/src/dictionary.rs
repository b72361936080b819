//! Dictionaries of unit-norm atoms and their coherence quantities.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::matrix::{dot_plain, norm2, DenseMatrix, RANK_TOL};

/// Tolerance on `| ||phi_j|| - 1 |` for a valid dictionary.
pub const UNIT_NORM_TOL: f64 = 1e-12;

/// An `N x d` matrix whose columns (atoms) have unit Euclidean norm.
#[derive(Clone, Debug, PartialEq)]
pub struct Dictionary {
    matrix: DenseMatrix,
}

impl Dictionary {
    /// Wraps a matrix whose columns are already unit norm.
    pub fn new(matrix: DenseMatrix) -> Result<Self> {
        if matrix.rows() == 0 || matrix.cols() == 0 {
            return Err(Error::Dimension(format!(
                "dictionary must be at least 1x1, got {}x{}",
                matrix.rows(),
                matrix.cols()
            )));
        }
        for (j, c) in matrix.columns().enumerate() {
            let n = norm2(c);
            if (n - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::Parameter(format!(
                    "atom {j} has norm {n:.15}, expected 1"
                )));
            }
        }
        Ok(Dictionary { matrix })
    }

    pub fn n_measurements(&self) -> usize {
        self.matrix.rows()
    }

    pub fn n_atoms(&self) -> usize {
        self.matrix.cols()
    }

    pub fn atom(&self, j: usize) -> &[f64] {
        self.matrix.col(j)
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    /// `Phi^T r`.
    pub fn correlations(&self, r: &[f64]) -> Result<Vec<f64>> {
        self.matrix.tr_mul_vec(r)
    }

    /// `sum_j x_j phi_j` for a dense coefficient vector.
    pub fn synthesize(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.matrix.mul_vec(x)
    }

    /// Absolute inner products `|<phi_j, psi>|` of atom `psi` with every
    /// other atom, in atom order with `psi` itself skipped.
    fn abs_inner_products_with(&self, psi: usize) -> Vec<f64> {
        let p = self.atom(psi);
        (0..self.n_atoms())
            .filter(|&j| j != psi)
            .map(|j| dot_plain(self.atom(j), p).abs())
            .collect()
    }
}

/// Scales every column to unit norm; returns the dictionary and the
/// original column norms (divide recovered coefficients by them to map
/// back to the raw matrix).
pub fn normalize_columns(raw: &DenseMatrix) -> Result<(Dictionary, Vec<f64>)> {
    let scale = raw.columns().map(norm2).fold(0.0, f64::max);
    let mut m = raw.clone();
    let mut factors = Vec::with_capacity(raw.cols());
    for j in 0..raw.cols() {
        let n = norm2(raw.col(j));
        if n == 0.0 || n <= RANK_TOL * scale {
            return Err(Error::DegenerateAtom { column: j, norm: n });
        }
        m.col_mut(j).iter_mut().for_each(|v| *v /= n);
        factors.push(n);
    }
    Ok((Dictionary::new(m)?, factors))
}

/// Largest absolute inner product between two distinct atoms.
pub fn coherence(d: &Dictionary) -> Result<f64> {
    let n = d.n_atoms();
    if n < 2 {
        return Err(Error::InsufficientAtoms { needed: 2, found: n });
    }
    let mut mu = 0.0f64;
    for j in 0..n {
        for k in j + 1..n {
            mu = mu.max(dot_plain(d.atom(j), d.atom(k)).abs());
        }
    }
    Ok(mu.min(1.0))
}

/// Cumulative coherence for every `m` in `0..=max_m` at once.
///
/// Entry `m` is the largest sum of the `m` biggest absolute inner products
/// any atom has with the other atoms; entry 0 is 0.
pub fn cumulative_coherence_profile(d: &Dictionary, max_m: usize) -> Result<Vec<f64>> {
    let n = d.n_atoms();
    if n < 2 {
        return Err(Error::InsufficientAtoms { needed: 2, found: n });
    }
    if max_m > n - 1 {
        return Err(Error::Parameter(format!(
            "cumulative coherence order {max_m} exceeds d-1 = {}",
            n - 1
        )));
    }
    let mut best = vec![0.0f64; max_m + 1];
    for psi in 0..n {
        let mut c = d.abs_inner_products_with(psi);
        if max_m < c.len() {
            c.select_nth_unstable_by(max_m, |a, b| b.total_cmp(a));
            c.truncate(max_m);
        }
        c.sort_by(|a, b| b.total_cmp(a));
        let mut acc = 0.0;
        for (m, v) in c.iter().take(max_m).enumerate() {
            acc += v;
            best[m + 1] = best[m + 1].max(acc);
        }
    }
    Ok(best)
}

/// Cumulative coherence `mu_1(m)` for `1 <= m <= d - 1`.
pub fn cumulative_coherence(d: &Dictionary, m: usize) -> Result<f64> {
    let n = d.n_atoms();
    if m == 0 || m + 1 > n {
        return Err(Error::Parameter(format!(
            "cumulative coherence order {m} outside 1..={}",
            n.saturating_sub(1)
        )));
    }
    Ok(cumulative_coherence_profile(d, m)?[m])
}

/// `mu * (2k - 1) < 1`, strict.
pub fn strong_condition_from_mu(mu: f64, k: usize) -> bool {
    k >= 1 && mu * ((2 * k - 1) as f64) < 1.0
}

/// Coherence-based sufficient condition for exact recovery of every
/// `k`-sparse signal.
pub fn check_strong_condition(d: &Dictionary, k: usize) -> Result<bool> {
    if k == 0 || k > d.n_atoms() {
        return Err(Error::Parameter(format!(
            "sparsity {k} outside 1..={}",
            d.n_atoms()
        )));
    }
    Ok(strong_condition_from_mu(coherence(d)?, k))
}

/// Returns `(mu_1(l) + mu_1(n) < 1, mu_1(l) + mu_1(n))`, with `mu_1(0) = 0`.
pub fn check_cumulative_condition(d: &Dictionary, l: usize, n: usize) -> Result<(bool, f64)> {
    let atoms = d.n_atoms();
    if n == 0 || n + 1 > atoms || l + 1 > atoms {
        return Err(Error::Parameter(format!(
            "cumulative condition needs 0 <= l <= d-1 and 1 <= n <= d-1 (d = {atoms}), got l={l}, n={n}"
        )));
    }
    let profile = cumulative_coherence_profile(d, l.max(n))?;
    let sum = profile[l] + profile[n];
    Ok((sum < 1.0, sum))
}

/// Coherence summary for a dictionary and sparsity level.
#[derive(Clone, Debug, PartialEq)]
pub struct RecoveryConditionReport {
    pub mu: f64,
    /// `mu_1(m)` for `m = 1..=max(l, n)`.
    pub mu1_values: BTreeMap<usize, f64>,
    pub strong_ok: bool,
    pub l: usize,
    pub n: usize,
    pub weak_sum: f64,
}

impl RecoveryConditionReport {
    pub fn weak_ok(&self) -> bool {
        self.weak_sum < 1.0
    }
}

/// Builds the report for sparsity `k` with the weak condition evaluated at
/// `(l, n)`. The usual starting point is `l = k - 1`, `n = k`.
pub fn recovery_report(
    d: &Dictionary,
    k: usize,
    l: usize,
    n: usize,
) -> Result<RecoveryConditionReport> {
    let mu = coherence(d)?;
    let (_, weak_sum) = check_cumulative_condition(d, l, n)?;
    let top = l.max(n).max(1);
    let profile = cumulative_coherence_profile(d, top)?;
    Ok(RecoveryConditionReport {
        mu,
        mu1_values: (1..=top).map(|m| (m, profile[m])).collect(),
        strong_ok: check_strong_condition(d, k)?,
        l,
        n,
        weak_sum,
    })
}
