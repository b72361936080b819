//! Greedy-choice ratios, the pseudo-inverse quantity behind the cumulative
//! coherence condition, error metrics, and a per-iteration condition trace
//! over a blocked run.

use std::collections::BTreeSet;

use crate::dictionary::{cumulative_coherence_profile, Dictionary};
use crate::error::{Error, Result};
use crate::matrix::{dot_plain, norm2, DenseMatrix, FlopCounter, HouseholderQr};
use crate::pursuit::{bsr_observed, IterationView, SolverConfig, SolverResult, SparseSignal};

/// Largest `C(d, c)` that [`greedy_ratio_block`] will enumerate.
pub const ENUMERATION_LIMIT: u128 = 1_000_000;

/// `Phi = [Phi_opt | Psi]`: the optimal atoms and the rest.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OptimalPartition {
    lambda_opt: Vec<usize>,
    psi: Vec<usize>,
    is_opt: Vec<bool>,
}

impl OptimalPartition {
    pub fn new(d: usize, lambda_opt: &[usize]) -> Result<Self> {
        let mut is_opt = vec![false; d];
        for &j in lambda_opt {
            let slot = is_opt
                .get_mut(j)
                .ok_or_else(|| Error::Parameter(format!("optimal index {j} >= {d}")))?;
            if *slot {
                return Err(Error::Parameter(format!("duplicate optimal index {j}")));
            }
            *slot = true;
        }
        let lambda_opt = (0..d).filter(|&j| is_opt[j]).collect();
        let psi = (0..d).filter(|&j| !is_opt[j]).collect();
        Ok(OptimalPartition {
            lambda_opt,
            psi,
            is_opt,
        })
    }

    pub fn from_signal(x: &SparseSignal) -> Result<Self> {
        Self::new(x.dim(), x.support())
    }

    pub fn lambda_opt(&self) -> &[usize] {
        &self.lambda_opt
    }

    pub fn psi_indices(&self) -> &[usize] {
        &self.psi
    }

    pub fn is_optimal(&self, j: usize) -> bool {
        self.is_opt[j]
    }

    pub fn k(&self) -> usize {
        self.lambda_opt.len()
    }

    pub fn dim(&self) -> usize {
        self.is_opt.len()
    }

    fn check(&self, d: &Dictionary) -> Result<()> {
        if self.dim() != d.n_atoms() {
            return Err(Error::Dimension(format!(
                "partition over {} atoms for a dictionary with {}",
                self.dim(),
                d.n_atoms()
            )));
        }
        Ok(())
    }
}

fn correlations(d: &Dictionary, r: &[f64]) -> Result<Vec<f64>> {
    if r.len() != d.n_measurements() {
        return Err(Error::Dimension(format!(
            "residual of length {} for {} rows",
            r.len(),
            d.n_measurements()
        )));
    }
    Ok((0..d.n_atoms()).map(|j| dot_plain(d.atom(j), r)).collect())
}

/// `||Psi^T r||_inf / ||Phi_opt^T r||_inf`.
pub fn greedy_ratio(d: &Dictionary, r: &[f64], part: &OptimalPartition) -> Result<f64> {
    part.check(d)?;
    let corr = correlations(d, r)?;
    let max_over = |idx: &[usize]| idx.iter().map(|&j| corr[j].abs()).fold(0.0, f64::max);
    let den = max_over(part.lambda_opt());
    if den == 0.0 {
        return Err(Error::DegenerateResidual(
            "residual is orthogonal to every optimal atom".into(),
        ));
    }
    Ok(max_over(part.psi_indices()) / den)
}

/// How the block ratio combines its two constrained subsets.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BlockRatioReading {
    /// Largest per-pair ratio `||Phi_{O1}^T r|| / ||Phi_{O2}^T r||` over all
    /// pairs where `O2` holds more optimal atoms than `O1`.
    #[default]
    PairSupremum,
    /// Largest admissible numerator over largest admissible denominator,
    /// maximised separately.
    SeparateMaxima,
    /// Only the members that cannot be swapped between the two subsets:
    /// the strongest `s` non-optimal atoms against the strongest `s` optimal
    /// ones, maximised over `1 <= s <= c`.
    Switched,
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Block greedy-choice ratio over size-`c` subsets of the atoms not in
/// `selected`, computed by exhaustive enumeration (pair-supremum reading).
///
/// Returns 0 when no admissible pair exists (every subset holds the same
/// number of optimal atoms).
pub fn greedy_ratio_block(
    d: &Dictionary,
    r: &[f64],
    part: &OptimalPartition,
    c: usize,
    selected: &[usize],
) -> Result<f64> {
    greedy_ratio_block_with(d, r, part, c, selected, BlockRatioReading::PairSupremum)
}

pub fn greedy_ratio_block_with(
    d: &Dictionary,
    r: &[f64],
    part: &OptimalPartition,
    c: usize,
    selected: &[usize],
    reading: BlockRatioReading,
) -> Result<f64> {
    part.check(d)?;
    if c == 0 {
        return Err(Error::Parameter("block size 0".into()));
    }
    let subsets = binomial(d.n_atoms(), c);
    if subsets > ENUMERATION_LIMIT {
        return Err(Error::InstanceTooLarge {
            subsets,
            limit: ENUMERATION_LIMIT,
        });
    }
    let corr = correlations(d, r)?;
    let taken: BTreeSet<usize> = selected.iter().copied().collect();
    let cand: Vec<usize> = (0..d.n_atoms()).filter(|j| !taken.contains(j)).collect();
    let size = c.min(cand.len());
    if size == 0 {
        return Ok(0.0);
    }
    if reading == BlockRatioReading::Switched {
        return switched_ratio(&corr, part, &cand, c);
    }

    // Squared norm range per number of optimal atoms in the subset.
    let mut lo = vec![f64::INFINITY; size + 1];
    let mut hi = vec![f64::NEG_INFINITY; size + 1];
    let mut idx: Vec<usize> = (0..size).collect();
    loop {
        let (mut q, mut s) = (0, 0.0);
        for &p in &idx {
            let j = cand[p];
            q += usize::from(part.is_optimal(j));
            s += corr[j] * corr[j];
        }
        lo[q] = lo[q].min(s);
        hi[q] = hi[q].max(s);

        // Next combination in lexicographic order.
        let m = cand.len();
        let mut i = size;
        while i > 0 && idx[i - 1] == i - 1 + m - size {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        idx[i - 1] += 1;
        for p in i..size {
            idx[p] = idx[p - 1] + 1;
        }
    }

    let present: Vec<usize> = (0..=size).filter(|&q| hi[q] >= 0.0).collect();
    let (Some(&qmin), Some(&qmax)) = (present.first(), present.last()) else {
        return Ok(0.0);
    };
    if qmin == qmax {
        return Ok(0.0);
    }
    let degenerate = || Error::DegenerateResidual("zero-norm admissible denominator".into());
    match reading {
        BlockRatioReading::PairSupremum => {
            let mut best: f64 = 0.0;
            for &q1 in &present {
                for &q2 in present.iter().filter(|&&q2| q2 > q1) {
                    if lo[q2] == 0.0 {
                        return Err(degenerate());
                    }
                    best = best.max((hi[q1] / lo[q2]).sqrt());
                }
            }
            Ok(best)
        }
        BlockRatioReading::SeparateMaxima => {
            let num = present
                .iter()
                .filter(|&&q| q < qmax)
                .map(|&q| hi[q])
                .fold(0.0, f64::max);
            let den = present
                .iter()
                .filter(|&&q| q > qmin)
                .map(|&q| hi[q])
                .fold(0.0, f64::max);
            if den == 0.0 {
                return Err(degenerate());
            }
            Ok((num / den).sqrt())
        }
        BlockRatioReading::Switched => unreachable!("handled before enumeration"),
    }
}

fn switched_ratio(corr: &[f64], part: &OptimalPartition, cand: &[usize], c: usize) -> Result<f64> {
    let sorted_sq = |opt: bool| {
        let mut v: Vec<f64> = cand
            .iter()
            .filter(|&&j| part.is_optimal(j) == opt)
            .map(|&j| corr[j] * corr[j])
            .collect();
        v.sort_by(|a, b| b.total_cmp(a));
        v
    };
    let (psi, phi) = (sorted_sq(false), sorted_sq(true));
    let (mut num, mut den, mut best) = (0.0, 0.0, 0.0f64);
    for s in 0..c.min(psi.len()).min(phi.len()) {
        num += psi[s];
        den += phi[s];
        if den == 0.0 {
            return Err(Error::DegenerateResidual("zero-norm optimal subset".into()));
        }
        best = best.max((num / den).sqrt());
    }
    Ok(best)
}

/// `max_{psi in Psi_Jbar} ||(X^+)_{Pi,:} psi||_1` with `X = [Phi_opt | Psi_J]`.
///
/// `selected` is every atom chosen so far; `Psi_J` is its non-optimal part,
/// `Pi` the optimal atoms not yet chosen and `Psi_Jbar` the unchosen
/// non-optimal atoms. Returns 0 when `Pi` or `Psi_Jbar` is empty.
pub fn lemma1_quantity(d: &Dictionary, part: &OptimalPartition, selected: &[usize]) -> Result<f64> {
    part.check(d)?;
    let taken: BTreeSet<usize> = selected.iter().copied().collect();
    if let Some(&j) = taken.iter().find(|&&j| j >= d.n_atoms()) {
        return Err(Error::Parameter(format!("selected index {j} out of range")));
    }
    let psi_j: Vec<usize> = part
        .psi_indices()
        .iter()
        .copied()
        .filter(|j| taken.contains(j))
        .collect();
    let pi_rows: Vec<usize> = part
        .lambda_opt()
        .iter()
        .enumerate()
        .filter(|(_, j)| !taken.contains(j))
        .map(|(p, _)| p)
        .collect();
    let rest: Vec<usize> = part
        .psi_indices()
        .iter()
        .copied()
        .filter(|j| !taken.contains(j))
        .collect();
    if pi_rows.is_empty() || rest.is_empty() {
        return Ok(0.0);
    }
    let cols: Vec<usize> = part.lambda_opt().iter().chain(&psi_j).copied().collect();
    let x = d.matrix().select_columns(&cols);
    let mut ctr = FlopCounter::new();
    let qr = HouseholderQr::factor(&x, &mut ctr)?;
    let mut best: f64 = 0.0;
    for &j in &rest {
        let coef = qr.solve(d.atom(j), &mut ctr)?;
        best = best.max(pi_rows.iter().map(|&p| coef[p].abs()).sum());
    }
    Ok(best)
}

/// `||x_est - x_true||^2 / ||x_true||^2`.
pub fn nmse(x_true: &SparseSignal, x_est: &SparseSignal) -> Result<f64> {
    if x_true.dim() != x_est.dim() {
        return Err(Error::Dimension(format!(
            "signals of dimension {} and {}",
            x_true.dim(),
            x_est.dim()
        )));
    }
    let a = x_true.to_dense();
    let den: f64 = a.iter().map(|v| v * v).sum();
    if den == 0.0 {
        return Err(Error::Parameter("true signal is zero".into()));
    }
    let num: f64 = a
        .iter()
        .zip(x_est.to_dense())
        .map(|(t, e)| (e - t).powi(2))
        .sum();
    Ok(num / den)
}

/// `||y - Phi x|| / ||y||`.
pub fn normalized_residual(y: &[f64], d: &Dictionary, x: &SparseSignal) -> Result<f64> {
    if x.dim() != d.n_atoms() || y.len() != d.n_measurements() {
        return Err(Error::Dimension(format!(
            "y of length {}, x of dimension {} for a {}x{} dictionary",
            y.len(),
            x.dim(),
            d.n_measurements(),
            d.n_atoms()
        )));
    }
    let ny = norm2(y);
    if ny == 0.0 {
        return Err(Error::Parameter("measurement is zero".into()));
    }
    let mut r = y.to_vec();
    for (&j, &v) in x.support().iter().zip(x.values()) {
        for (ri, a) in r.iter_mut().zip(d.atom(j)) {
            *ri -= v * a;
        }
    }
    Ok(norm2(&r) / ny)
}

/// State before one iteration of a traced run, and what it then selected.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionRecord {
    pub iteration: usize,
    /// `None` when the residual is orthogonal to every optimal atom.
    pub rho: Option<f64>,
    /// Block ratio, pair-supremum reading. `None` when enumeration is out
    /// of bounds or degenerate.
    pub rho_c: Option<f64>,
    pub rho_c_separate: Option<f64>,
    pub rho_c_switched: Option<f64>,
    /// Optimal / non-optimal atoms selected before this iteration.
    pub optimal_selected: usize,
    pub nonoptimal_selected: usize,
    /// Optimal atoms among this iteration's picks.
    pub chosen_optimal: usize,
    pub chosen: usize,
    /// `min(|Pi|, k - 1)`.
    pub l: usize,
    /// Columns of `X = [Phi_opt | Psi_J]`.
    pub n: usize,
    /// `mu_1(l) + mu_1(n)`, `None` when `n > d - 1`.
    pub mu_sum: Option<f64>,
    pub lemma1: Option<f64>,
}

impl ConditionRecord {
    pub fn weak_condition(&self) -> bool {
        self.mu_sum.is_some_and(|s| s < 1.0)
    }

    pub fn rho_ok(&self) -> bool {
        self.rho.is_some_and(|v| v < 1.0)
    }

    pub fn rho_c_ok(&self) -> bool {
        self.rho_c.is_some_and(|v| v < 1.0)
    }

    pub fn lemma1_ok(&self) -> bool {
        self.lemma1.is_some_and(|v| v < 1.0)
    }

    /// Unselected optimal atoms before this iteration.
    pub fn remaining_optimal(&self, k: usize) -> usize {
        k - self.optimal_selected
    }
}

#[derive(Clone, Debug)]
pub struct ConditionTrace {
    pub k: usize,
    pub block_size: usize,
    pub records: Vec<ConditionRecord>,
    pub result: SolverResult,
}

impl ConditionTrace {
    /// True when every pick before the last iteration was an optimal atom.
    pub fn prefinal_all_optimal(&self) -> bool {
        let n = self.records.len();
        self.records
            .iter()
            .take(n.saturating_sub(1))
            .all(|r| r.chosen_optimal == r.chosen)
    }

    pub fn every_iteration_finds_optimal(&self) -> bool {
        self.records.iter().all(|r| r.chosen_optimal >= 1)
    }

    pub fn recovered(&self) -> bool {
        self.records
            .last()
            .is_some_and(|r| r.optimal_selected + r.chosen_optimal == self.k)
    }
}

/// Runs [`bsr`](crate::pursuit::bsr) on `y` and records the recovery
/// conditions at each iteration's residual. Nothing is asserted here.
pub fn trace_conditions(
    d: &Dictionary,
    y: &[f64],
    x_true: &SparseSignal,
    cfg: &SolverConfig,
) -> Result<ConditionTrace> {
    let part = OptimalPartition::from_signal(x_true)?;
    part.check(d)?;
    let k = part.k();
    if k == 0 {
        return Err(Error::Parameter("true signal has empty support".into()));
    }
    let dd = d.n_atoms();
    let profile = if dd >= 2 {
        cumulative_coherence_profile(d, dd - 1)?
    } else {
        vec![0.0]
    };
    let mu1 = |m: usize| -> Option<f64> { (m < dd).then(|| profile[m]) };
    let c = cfg.block_size;
    let enumerable = binomial(dd, c) <= ENUMERATION_LIMIT;

    let mut records = Vec::new();
    let mut failure: Option<Error> = None;
    let mut observe = |v: &IterationView<'_>| {
        if failure.is_some() {
            return;
        }
        let optimal_selected = v.selected.iter().filter(|&&j| part.is_optimal(j)).count();
        let nonoptimal_selected = v.selected.len() - optimal_selected;
        let l = (k - optimal_selected).min(k - 1);
        let n = k + nonoptimal_selected;
        let rho = match greedy_ratio(d, v.residual, &part) {
            Ok(x) => Some(x),
            Err(Error::DegenerateResidual(_)) => None,
            Err(e) => {
                failure = Some(e);
                return;
            }
        };
        let block = |reading| {
            enumerable
                .then(|| greedy_ratio_block_with(d, v.residual, &part, c, v.selected, reading).ok())
                .flatten()
        };
        let lemma1 = match lemma1_quantity(d, &part, v.selected) {
            Ok(x) => Some(x),
            Err(e) if e.is_numerical() => None,
            Err(e) => {
                failure = Some(e);
                return;
            }
        };
        let mu_sum = match (mu1(l), mu1(n)) {
            (Some(a), Some(b)) => Some(a + b),
            _ => None,
        };
        records.push(ConditionRecord {
            iteration: v.iteration,
            rho,
            rho_c: block(BlockRatioReading::PairSupremum),
            rho_c_separate: block(BlockRatioReading::SeparateMaxima),
            rho_c_switched: block(BlockRatioReading::Switched),
            optimal_selected,
            nonoptimal_selected,
            chosen_optimal: v.chosen.iter().filter(|&&j| part.is_optimal(j)).count(),
            chosen: v.chosen.len(),
            l,
            n,
            mu_sum,
            lemma1,
        });
    };
    let result = bsr_observed(d, y, cfg, &mut observe).map_err(|f| f.error)?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(ConditionTrace {
        k,
        block_size: c,
        records,
        result,
    })
}

/// `(X^T X)^{-1}` for unit-norm columns through the Neumann series
/// `sum_k (-A)^k`, `A` the off-diagonal Gram part. `None` unless
/// `||A||_1 < 1`. Used as a cross-check on the factorisation route.
#[doc(hidden)]
pub fn neumann_inverse(x: &DenseMatrix, terms: usize) -> Option<DenseMatrix> {
    let n = x.cols();
    let gram = x.transpose().mul(x).ok()?;
    let mut a = gram.clone();
    for i in 0..n {
        a.set(i, i, 0.0);
    }
    let one_norm = (0..n)
        .map(|j| a.col(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    if one_norm >= 1.0 {
        return None;
    }
    let mut sum = DenseMatrix::identity(n);
    let mut term = DenseMatrix::identity(n);
    for _ in 0..terms {
        term = term.mul(&a).ok()?;
        for j in 0..n {
            for i in 0..n {
                term.set(i, j, -term.get(i, j));
            }
        }
        for j in 0..n {
            for i in 0..n {
                sum.set(i, j, sum.get(i, j) + term.get(i, j));
            }
        }
    }
    Some(sum)
}
