//! Greedy pursuit solvers.
//!
//! All five solvers share one driver: atom (or block) selection against the
//! current residual, halting on `||r|| <= delta` or the iteration budget, and
//! per-iteration bookkeeping. They differ only in how the least-squares fit
//! over the selected atoms is refreshed:
//!
//! | solver      | selection  | refit                                        |
//! |-------------|------------|----------------------------------------------|
//! | `omp_naive` | one atom   | Householder least squares over all atoms     |
//! | `omp_qr`    | one atom   | incremental QR, `h = Q^T y`, back-substitute |
//! | `omp_sr`    | one atom   | successive regression and back-tracking      |
//! | `gomp`      | `c` atoms  | Householder least squares over all atoms     |
//! | `bsr`       | `c` atoms  | blocked successive regression                |

mod bsr;
mod cost;
mod naive;
mod qr;
mod signal;
mod sr;

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::matrix::{dot_counted, norm2, FlopCounter, Flops, Kernel, KernelFlops};

pub use cost::{cost_model, qr_minus_sr_margin, sr_core_kernels};
pub use signal::SparseSignal;

/// Relative default for the residual threshold: `delta = 1e-9 * ||y||`.
pub const DEFAULT_RELATIVE_THRESHOLD: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TieBreak {
    #[default]
    LowestIndex,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    /// Iteration budget; `None` means `min(N, d)`.
    pub max_iterations: Option<usize>,
    /// Absolute threshold on `||r||_2`; `None` means `1e-9 * ||y||_2`.
    pub residual_threshold: Option<f64>,
    pub block_size: usize,
    /// Include the all-ones direction `z_0` in the orthogonalisation of the
    /// successive-regression solvers.
    pub ones_regressor: bool,
    pub tie_break: TieBreak,
    /// Stop as soon as every index listed here has been selected.
    pub oracle_support: Option<Vec<usize>>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iterations: None,
            residual_threshold: None,
            block_size: 1,
            ones_regressor: false,
            tie_break: TieBreak::LowestIndex,
            oracle_support: None,
        }
    }
}

impl SolverConfig {
    pub fn with_block_size(mut self, c: usize) -> Self {
        self.block_size = c;
        self
    }

    pub fn with_max_iterations(mut self, k: usize) -> Self {
        self.max_iterations = Some(k);
        self
    }

    pub fn with_threshold(mut self, delta: f64) -> Self {
        self.residual_threshold = Some(delta);
        self
    }

    pub fn with_ones_regressor(mut self, on: bool) -> Self {
        self.ones_regressor = on;
        self
    }

    pub fn with_oracle_support(mut self, support: Vec<usize>) -> Self {
        self.oracle_support = Some(support);
        self
    }

    fn validate(&self, d: &Dictionary) -> Result<()> {
        let atoms = d.n_atoms();
        if self.block_size == 0 || self.block_size > atoms {
            return Err(Error::Parameter(format!(
                "block size {} outside 1..={atoms}",
                self.block_size
            )));
        }
        if let Some(k) = self.max_iterations {
            if k == 0 || k > atoms {
                return Err(Error::Parameter(format!(
                    "iteration budget {k} outside 1..={atoms}"
                )));
            }
        }
        if let Some(delta) = self.residual_threshold {
            if !(delta >= 0.0) || !delta.is_finite() {
                return Err(Error::Parameter(format!("residual threshold {delta}")));
            }
        }
        if let Some(s) = &self.oracle_support {
            if let Some(&j) = s.iter().find(|&&j| j >= atoms) {
                return Err(Error::Parameter(format!("oracle index {j} out of range")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HaltReason {
    Threshold,
    Budget,
    /// Every index of the caller-supplied ground-truth support was found.
    Oracle,
}

/// Bookkeeping for one iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    /// Atoms added this iteration, in selection order.
    pub selected: Vec<usize>,
    pub residual_norm: f64,
    /// Cumulative flops after this iteration.
    pub flops: u64,
    /// Flops spent in this iteration, per kernel.
    pub kernel_flops: KernelFlops,
    /// Time since solver entry.
    pub elapsed: Duration,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverResult {
    pub coefficients: SparseSignal,
    pub selection_order: Vec<usize>,
    /// Coefficients aligned with `selection_order`.
    pub selection_coefficients: Vec<f64>,
    pub per_iteration: Vec<IterationRecord>,
    pub iterations_used: usize,
    pub halted_by: HaltReason,
    pub initial_residual_norm: f64,
    pub flops: Flops,
    pub kernel_flops: KernelFlops,
    pub elapsed: Duration,
    /// Number of `<z, z>` evaluations (successive-regression solvers).
    pub norm_evaluations: usize,
}

impl SolverResult {
    pub fn final_residual_norm(&self) -> f64 {
        self.per_iteration
            .last()
            .map_or(self.initial_residual_norm, |r| r.residual_norm)
    }

    /// Residual norms starting with `||y||`.
    pub fn residual_trace(&self) -> Vec<f64> {
        std::iter::once(self.initial_residual_norm)
            .chain(self.per_iteration.iter().map(|r| r.residual_norm))
            .collect()
    }

    /// Atoms selected in each iteration.
    pub fn blocks(&self) -> Vec<&[usize]> {
        self.per_iteration
            .iter()
            .map(|r| r.selected.as_slice())
            .collect()
    }

    /// Number of indices of `support` that were selected.
    pub fn found(&self, support: &[usize]) -> usize {
        support
            .iter()
            .filter(|j| self.selection_order.contains(j))
            .count()
    }
}

/// A failed run, carrying whatever was computed before the failure.
#[derive(Debug, thiserror::Error)]
#[error("{error} (after {} iterations)", partial.iterations_used)]
pub struct SolverFailure {
    #[source]
    pub error: Error,
    pub partial: Box<SolverResult>,
}

pub type SolveResult = std::result::Result<SolverResult, SolverFailure>;

/// State handed to an observer before each selection is absorbed.
pub struct IterationView<'a> {
    /// 1-based iteration number.
    pub iteration: usize,
    /// Residual before this iteration's selection.
    pub residual: &'a [f64],
    /// Atoms selected in earlier iterations.
    pub selected: &'a [usize],
    /// Atoms chosen this iteration.
    pub chosen: &'a [usize],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    OmpNaive,
    OmpQr,
    OmpSr,
    Gomp,
    Bsr,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::OmpNaive,
        Method::OmpQr,
        Method::OmpSr,
        Method::Gomp,
        Method::Bsr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::OmpNaive => "omp_naive",
            Method::OmpQr => "omp_qr",
            Method::OmpSr => "omp_sr",
            Method::Gomp => "gomp",
            Method::Bsr => "bsr",
        }
    }

    pub fn is_blocked(self) -> bool {
        matches!(self, Method::Gomp | Method::Bsr)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown solver '{s}'")))
    }
}

/// Runs `method` with `cfg`. Non-blocked methods require `block_size == 1`.
pub fn solve(method: Method, d: &Dictionary, y: &[f64], cfg: &SolverConfig) -> SolveResult {
    match method {
        Method::OmpNaive => omp_naive(d, y, cfg),
        Method::OmpQr => omp_qr(d, y, cfg),
        Method::OmpSr => omp_sr(d, y, cfg),
        Method::Gomp => gomp(d, y, cfg),
        Method::Bsr => bsr(d, y, cfg),
    }
}

/// OMP with a full Householder least-squares refit every iteration.
pub fn omp_naive(d: &Dictionary, y: &[f64], cfg: &SolverConfig) -> SolveResult {
    require_single(cfg, d, y)?;
    drive(d, y, cfg, naive::LeastSquaresEngine::new(d, y), None)
}

/// OMP with an incrementally updated thin QR factorisation.
pub fn omp_qr(d: &Dictionary, y: &[f64], cfg: &SolverConfig) -> SolveResult {
    require_single(cfg, d, y)?;
    drive(d, y, cfg, qr::QrEngine::new(d, y), None)
}

/// OMP through successive regression on orthogonalised atoms.
pub fn omp_sr(d: &Dictionary, y: &[f64], cfg: &SolverConfig) -> SolveResult {
    require_single(cfg, d, y)?;
    drive(d, y, cfg, sr::SuccessiveRegression::new(d, y, cfg.ones_regressor), None)
}

/// Generalised OMP: `c` atoms per iteration, full least-squares refit.
pub fn gomp(d: &Dictionary, y: &[f64], cfg: &SolverConfig) -> SolveResult {
    drive(d, y, cfg, naive::LeastSquaresEngine::new(d, y), None)
}

/// Blocked successive regression: gOMP's selection with a per-block
/// orthogonalised solve.
pub fn bsr(d: &Dictionary, y: &[f64], cfg: &SolverConfig) -> SolveResult {
    drive(d, y, cfg, bsr::BlockedRegression::new(d, y, cfg.ones_regressor), None)
}

/// [`bsr`] with a callback invoked before each block is absorbed.
pub fn bsr_observed(
    d: &Dictionary,
    y: &[f64],
    cfg: &SolverConfig,
    observer: &mut dyn FnMut(&IterationView<'_>),
) -> SolveResult {
    drive(
        d,
        y,
        cfg,
        bsr::BlockedRegression::new(d, y, cfg.ones_regressor),
        Some(observer),
    )
}

fn require_single(cfg: &SolverConfig, d: &Dictionary, y: &[f64]) -> std::result::Result<(), SolverFailure> {
    if cfg.block_size != 1 {
        return Err(failure_before_start(
            d,
            y,
            Error::Parameter(format!(
                "single-atom solver called with block size {}",
                cfg.block_size
            )),
        ));
    }
    Ok(())
}

/// Index of the non-excluded atom with the largest `|<phi_j, r>|`, lowest
/// index on ties.
pub fn select_atom(d: &Dictionary, r: &[f64], excluded: &[usize]) -> Result<usize> {
    let mask = exclusion_mask(d, excluded)?;
    let mut ctr = FlopCounter::new();
    Ok(select_block_masked(d, r, &mask, 1, &mut ctr)?[0])
}

/// The `min(c, remaining)` non-excluded atoms with the largest
/// `|<phi_j, r>|`, ordered by decreasing magnitude (lowest index on ties).
pub fn select_block(d: &Dictionary, r: &[f64], excluded: &[usize], c: usize) -> Result<Vec<usize>> {
    if c == 0 {
        return Err(Error::Parameter("block size 0".into()));
    }
    let mask = exclusion_mask(d, excluded)?;
    let mut ctr = FlopCounter::new();
    select_block_masked(d, r, &mask, c, &mut ctr)
}

fn exclusion_mask(d: &Dictionary, excluded: &[usize]) -> Result<Vec<bool>> {
    let mut mask = vec![false; d.n_atoms()];
    for &j in excluded {
        *mask
            .get_mut(j)
            .ok_or_else(|| Error::Parameter(format!("excluded index {j} out of range")))? = true;
    }
    Ok(mask)
}

pub(crate) fn select_block_masked(
    d: &Dictionary,
    r: &[f64],
    excluded: &[bool],
    c: usize,
    ctr: &mut FlopCounter,
) -> Result<Vec<usize>> {
    if r.len() != d.n_measurements() {
        return Err(Error::Dimension(format!(
            "residual of length {} for {} measurements",
            r.len(),
            d.n_measurements()
        )));
    }
    if r.iter().all(|&v| v == 0.0) {
        return Err(Error::ZeroResidual);
    }
    let mut scored: Vec<(f64, usize)> = (0..d.n_atoms())
        .filter(|&j| !excluded[j])
        .map(|j| (dot_counted(d.atom(j), r, ctr).abs(), j))
        .collect();
    if scored.is_empty() {
        return Err(Error::ExhaustedDictionary);
    }
    let rank = |a: &(f64, usize), b: &(f64, usize)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
    let take = c.min(scored.len());
    if take < scored.len() {
        scored.select_nth_unstable_by(take - 1, rank);
        scored.truncate(take);
    }
    scored.sort_by(rank);
    Ok(scored.into_iter().map(|(_, j)| j).collect())
}

/// How a solver refreshes its fit after new atoms are selected.
pub(crate) trait Engine {
    /// Adds `atoms` to the model and refreshes coefficients and residual.
    fn absorb(&mut self, atoms: &[usize], ctr: &mut FlopCounter) -> Result<()>;
    fn residual(&self) -> &[f64];
    /// Coefficients in selection order.
    fn coefficients(&self) -> &[f64];
    fn norm_evaluations(&self) -> usize {
        0
    }
}

fn empty_result(d: &Dictionary, y: &[f64]) -> SolverResult {
    SolverResult {
        coefficients: SparseSignal::zeros(d.n_atoms()),
        selection_order: Vec::new(),
        selection_coefficients: Vec::new(),
        per_iteration: Vec::new(),
        iterations_used: 0,
        halted_by: HaltReason::Budget,
        initial_residual_norm: norm2(y),
        flops: Flops::ZERO,
        kernel_flops: KernelFlops::default(),
        elapsed: Duration::ZERO,
        norm_evaluations: 0,
    }
}

fn failure_before_start(d: &Dictionary, y: &[f64], error: Error) -> SolverFailure {
    SolverFailure {
        error,
        partial: Box::new(empty_result(d, y)),
    }
}

struct Run<'a> {
    dict: &'a Dictionary,
    selected: Vec<usize>,
    records: Vec<IterationRecord>,
    initial: f64,
    ctr: FlopCounter,
    start: Instant,
}

impl Run<'_> {
    fn finish<E: Engine>(self, engine: &E, halted_by: HaltReason) -> SolverResult {
        let coefs = if self.selected.is_empty() {
            Vec::new()
        } else {
            engine.coefficients().to_vec()
        };
        SolverResult {
            coefficients: SparseSignal::from_pairs(
                self.dict.n_atoms(),
                self.selected.iter().copied().zip(coefs.iter().copied()),
            ),
            selection_order: self.selected,
            selection_coefficients: coefs,
            iterations_used: self.records.len(),
            per_iteration: self.records,
            halted_by,
            initial_residual_norm: self.initial,
            flops: self.ctr.flops(),
            kernel_flops: *self.ctr.by_kernel(),
            elapsed: self.start.elapsed(),
            norm_evaluations: engine.norm_evaluations(),
        }
    }
}

fn drive<E: Engine>(
    d: &Dictionary,
    y: &[f64],
    cfg: &SolverConfig,
    mut engine: E,
    mut observer: Option<&mut dyn FnMut(&IterationView<'_>)>,
) -> SolveResult {
    let start = Instant::now();
    if y.len() != d.n_measurements() {
        return Err(failure_before_start(
            d,
            y,
            Error::Dimension(format!(
                "measurement of length {} for {} rows",
                y.len(),
                d.n_measurements()
            )),
        ));
    }
    if let Err(e) = cfg.validate(d) {
        return Err(failure_before_start(d, y, e));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(failure_before_start(
            d,
            y,
            Error::Parameter("measurement has non-finite entries".into()),
        ));
    }

    let y_norm = norm2(y);
    let delta = cfg
        .residual_threshold
        .unwrap_or(DEFAULT_RELATIVE_THRESHOLD * y_norm);
    let budget = cfg
        .max_iterations
        .unwrap_or_else(|| d.n_measurements().min(d.n_atoms()));
    let oracle = cfg.oracle_support.as_deref();

    let mut run = Run {
        dict: d,
        selected: Vec::new(),
        records: Vec::new(),
        initial: y_norm,
        ctr: FlopCounter::new(),
        start,
    };
    let mut excluded = vec![false; d.n_atoms()];
    let mut residual = y.to_vec();
    let mut residual_norm = y_norm;

    let halted = loop {
        if residual_norm <= delta {
            break HaltReason::Threshold;
        }
        if let Some(s) = oracle {
            if s.iter().all(|&j| excluded[j]) {
                break HaltReason::Oracle;
            }
        }
        if run.records.len() >= budget || run.selected.len() == d.n_atoms() {
            break HaltReason::Budget;
        }

        let before = *run.ctr.by_kernel();
        run.ctr.set_kernel(Kernel::Selection);
        let chosen = match select_block_masked(d, &residual, &excluded, cfg.block_size, &mut run.ctr) {
            Ok(c) => c,
            Err(e) => {
                let partial = run.finish(&engine, HaltReason::Budget);
                return Err(SolverFailure {
                    error: e,
                    partial: Box::new(partial),
                });
            }
        };
        if let Some(obs) = observer.as_mut() {
            obs(&IterationView {
                iteration: run.records.len() + 1,
                residual: &residual,
                selected: &run.selected,
                chosen: &chosen,
            });
        }
        if let Err(e) = engine.absorb(&chosen, &mut run.ctr) {
            let partial = run.finish(&engine, HaltReason::Budget);
            return Err(SolverFailure {
                error: e,
                partial: Box::new(partial),
            });
        }
        for &j in &chosen {
            excluded[j] = true;
        }
        run.selected.extend_from_slice(&chosen);
        residual.copy_from_slice(engine.residual());
        run.ctr.set_kernel(Kernel::Residual);
        residual_norm = dot_counted(&residual, &residual, &mut run.ctr).sqrt();
        run.ctr.divs(1);
        run.ctr.set_kernel(Kernel::Other);

        run.records.push(IterationRecord {
            selected: chosen,
            residual_norm,
            flops: run.ctr.total(),
            kernel_flops: run.ctr.by_kernel().delta(&before),
            elapsed: run.start.elapsed(),
        });
    };
    Ok(run.finish(&engine, halted))
}

#[cfg(test)]
mod tests;
