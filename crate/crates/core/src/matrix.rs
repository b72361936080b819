//! Dense real kernels with scalar-operation accounting.
//!
//! Every kernel that takes a [`FlopCounter`] charges one flop per scalar
//! multiply, add/subtract, divide or square root. Comparisons, negations
//! and copies are free. Charges land on the counter's current [`Kernel`]
//! label so solvers can report a per-kernel breakdown alongside the total.

use std::fmt;
use std::ops::{Add, AddAssign, Index, Sub};

use crate::error::{Error, Result};

/// Relative tolerance separating genuine rank collapse from roundoff.
pub const RANK_TOL: f64 = 1e-10;

/// Raw scalar-operation tallies.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Flops {
    pub mults: u64,
    pub adds: u64,
    pub divs: u64,
}

impl Flops {
    pub const ZERO: Flops = Flops {
        mults: 0,
        adds: 0,
        divs: 0,
    };

    pub fn total(&self) -> u64 {
        self.mults + self.adds + self.divs
    }
}

impl Add for Flops {
    type Output = Flops;
    fn add(self, o: Flops) -> Flops {
        Flops {
            mults: self.mults + o.mults,
            adds: self.adds + o.adds,
            divs: self.divs + o.divs,
        }
    }
}

impl AddAssign for Flops {
    fn add_assign(&mut self, o: Flops) {
        *self = *self + o;
    }
}

impl Sub for Flops {
    type Output = Flops;
    fn sub(self, o: Flops) -> Flops {
        Flops {
            mults: self.mults - o.mults,
            adds: self.adds - o.adds,
            divs: self.divs - o.divs,
        }
    }
}

/// Labels for the solver stages that flops are attributed to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Kernel {
    /// Correlation scan of candidate atoms against the residual.
    Selection,
    /// Inner products of a new atom against earlier orthogonal directions.
    GammaInner,
    /// Division of those inner products by the cached squared norms.
    GammaDivide,
    /// Subtracting the projections to form the new orthogonal direction.
    Orthogonalize,
    /// Regression of the measurement on the new direction(s).
    Beta,
    /// Triangular back-tracking from orthogonal to atom coefficients.
    Backtrack,
    /// Residual recomputation.
    Residual,
    /// Incremental QR factor update.
    QrUpdate,
    /// `h = Q^T y` update.
    Project,
    /// Solve of the triangular factor system.
    BackSubstitute,
    /// Full least-squares refit.
    LeastSquares,
    Other,
}

impl Kernel {
    pub const ALL: [Kernel; 12] = [
        Kernel::Selection,
        Kernel::GammaInner,
        Kernel::GammaDivide,
        Kernel::Orthogonalize,
        Kernel::Beta,
        Kernel::Backtrack,
        Kernel::Residual,
        Kernel::QrUpdate,
        Kernel::Project,
        Kernel::BackSubstitute,
        Kernel::LeastSquares,
        Kernel::Other,
    ];

    fn slot(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Kernel::Selection => "selection",
            Kernel::GammaInner => "gamma_inner",
            Kernel::GammaDivide => "gamma_divide",
            Kernel::Orthogonalize => "orthogonalize",
            Kernel::Beta => "beta",
            Kernel::Backtrack => "backtrack",
            Kernel::Residual => "residual",
            Kernel::QrUpdate => "qr_update",
            Kernel::Project => "project",
            Kernel::BackSubstitute => "back_substitute",
            Kernel::LeastSquares => "least_squares",
            Kernel::Other => "other",
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-kernel flop tallies.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct KernelFlops([Flops; Kernel::ALL.len()]);

impl KernelFlops {
    pub fn get(&self, k: Kernel) -> Flops {
        self.0[k.slot()]
    }

    pub fn total(&self) -> u64 {
        self.0.iter().map(Flops::total).sum()
    }

    /// Sum of totals over a set of kernels.
    pub fn sum_of(&self, kernels: &[Kernel]) -> u64 {
        kernels.iter().map(|k| self.get(*k).total()).sum()
    }

    pub fn delta(&self, earlier: &KernelFlops) -> KernelFlops {
        let mut out = KernelFlops::default();
        for k in Kernel::ALL {
            out.0[k.slot()] = self.0[k.slot()] - earlier.0[k.slot()];
        }
        out
    }
}

impl Index<Kernel> for KernelFlops {
    type Output = Flops;
    fn index(&self, k: Kernel) -> &Flops {
        &self.0[k.slot()]
    }
}

/// Scalar-operation counter owned by one solver invocation.
#[derive(Clone, Debug)]
pub struct FlopCounter {
    totals: Flops,
    by_kernel: KernelFlops,
    current: Kernel,
}

impl Default for FlopCounter {
    fn default() -> Self {
        Self::new()
    }
}

impl FlopCounter {
    pub fn new() -> Self {
        FlopCounter {
            totals: Flops::ZERO,
            by_kernel: KernelFlops::default(),
            current: Kernel::Other,
        }
    }

    pub fn reset(&mut self) {
        *self = FlopCounter::new();
    }

    /// Route subsequent charges to `kernel`; returns the previous label.
    pub fn set_kernel(&mut self, kernel: Kernel) -> Kernel {
        std::mem::replace(&mut self.current, kernel)
    }

    pub fn kernel(&self) -> Kernel {
        self.current
    }

    pub fn mults(&mut self, n: u64) {
        self.totals.mults += n;
        self.by_kernel.0[self.current.slot()].mults += n;
    }

    pub fn adds(&mut self, n: u64) {
        self.totals.adds += n;
        self.by_kernel.0[self.current.slot()].adds += n;
    }

    pub fn divs(&mut self, n: u64) {
        self.totals.divs += n;
        self.by_kernel.0[self.current.slot()].divs += n;
    }

    pub fn flops(&self) -> Flops {
        self.totals
    }

    pub fn total(&self) -> u64 {
        self.totals.total()
    }

    pub fn by_kernel(&self) -> &KernelFlops {
        &self.by_kernel
    }
}

/// Column-major dense matrix of finite reals.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    /// Builds a matrix from column-major storage.
    pub fn from_col_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(p) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: p % rows.max(1),
                col: p / rows.max(1),
            });
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != m) {
            return Err(Error::Dimension(format!(
                "row {i} has {} entries, expected {m}",
                rows[i].len()
            )));
        }
        let mut data = Vec::with_capacity(n * m);
        for j in 0..m {
            data.extend(rows.iter().map(|r| r[j]));
        }
        DenseMatrix::from_col_major(n, m, data)
    }

    pub fn from_columns(cols: &[Vec<f64>]) -> Result<Self> {
        let m = cols.len();
        let n = cols.first().map_or(0, Vec::len);
        if let Some(j) = cols.iter().position(|c| c.len() != n) {
            return Err(Error::Dimension(format!(
                "column {j} has {} entries, expected {n}",
                cols[j].len()
            )));
        }
        DenseMatrix::from_col_major(n, m, cols.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[c * self.rows + r]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[c * self.rows + r] = v;
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.cols).map(move |j| self.col(j))
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.cols).map(|j| self.get(i, j)).collect()
    }

    pub fn push_column(&mut self, c: &[f64]) -> Result<()> {
        if c.len() != self.rows {
            return Err(Error::Dimension(format!(
                "column of length {} for {} rows",
                c.len(),
                self.rows
            )));
        }
        self.data.extend_from_slice(c);
        self.cols += 1;
        Ok(())
    }

    /// Columns `idx` in the given order.
    pub fn select_columns(&self, idx: &[usize]) -> DenseMatrix {
        let mut data = Vec::with_capacity(idx.len() * self.rows);
        for &j in idx {
            data.extend_from_slice(self.col(j));
        }
        DenseMatrix {
            rows: self.rows,
            cols: idx.len(),
            data,
        }
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = DenseMatrix::zeros(self.cols, self.rows);
        for j in 0..self.cols {
            for i in 0..self.rows {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    /// `self * x`, uninstrumented.
    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::Dimension(format!(
                "vector of length {} for {} columns",
                x.len(),
                self.cols
            )));
        }
        let mut out = vec![0.0; self.rows];
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                for (o, a) in out.iter_mut().zip(self.col(j)) {
                    *o += a * xj;
                }
            }
        }
        Ok(out)
    }

    /// `self^T * v`, uninstrumented.
    pub fn tr_mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.rows {
            return Err(Error::Dimension(format!(
                "vector of length {} for {} rows",
                v.len(),
                self.rows
            )));
        }
        Ok(self.columns().map(|c| dot_plain(c, v)).collect())
    }

    pub fn mul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut data = Vec::with_capacity(self.rows * other.cols);
        for j in 0..other.cols {
            data.extend(self.mul_vec(other.col(j))?);
        }
        Ok(DenseMatrix {
            rows: self.rows,
            cols: other.cols,
            data,
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm2(&self.data)
    }

    pub fn as_col_major(&self) -> &[f64] {
        &self.data
    }
}

pub(crate) fn dot_plain(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// Euclidean norm, uninstrumented.
pub fn norm2(v: &[f64]) -> f64 {
    dot_plain(v, v).sqrt()
}

/// Inner product; charges `n` multiplies and `n - 1` adds.
pub fn dot(u: &[f64], v: &[f64], ctr: &mut FlopCounter) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Dimension(format!(
            "dot of lengths {} and {}",
            u.len(),
            v.len()
        )));
    }
    if u.is_empty() {
        return Err(Error::Dimension("dot of empty vectors".into()));
    }
    Ok(dot_counted(u, v, ctr))
}

#[inline]
pub(crate) fn dot_counted(u: &[f64], v: &[f64], ctr: &mut FlopCounter) -> f64 {
    debug_assert_eq!(u.len(), v.len());
    let n = u.len() as u64;
    ctr.mults(n);
    ctr.adds(n.saturating_sub(1));
    dot_plain(u, v)
}

/// `y -= alpha * x`; charges `n` multiplies and `n` subtracts.
#[inline]
pub(crate) fn sub_scaled(y: &mut [f64], alpha: f64, x: &[f64], ctr: &mut FlopCounter) {
    debug_assert_eq!(y.len(), x.len());
    let n = y.len() as u64;
    ctr.mults(n);
    ctr.adds(n);
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi -= alpha * xi;
    }
}

pub(crate) fn norm2_counted(v: &[f64], ctr: &mut FlopCounter) -> f64 {
    let s = dot_counted(v, v, ctr);
    ctr.divs(1);
    s.sqrt()
}

/// Returns `r - columns * coeffs`.
pub fn axpy_update(
    r: &[f64],
    coeffs: &[f64],
    columns: &DenseMatrix,
    ctr: &mut FlopCounter,
) -> Result<Vec<f64>> {
    if columns.rows() != r.len() || columns.cols() != coeffs.len() {
        return Err(Error::Dimension(format!(
            "residual of length {} with {}x{} columns and {} coefficients",
            r.len(),
            columns.rows(),
            columns.cols(),
            coeffs.len()
        )));
    }
    let mut out = r.to_vec();
    for (j, &b) in coeffs.iter().enumerate() {
        sub_scaled(&mut out, b, columns.col(j), ctr);
    }
    Ok(out)
}

/// Solves an upper-triangular system `R x = h`.
///
/// Charges exactly `t^2` flops for a `t x t` system: `t` divides and
/// `t(t-1)/2` each of multiplies and subtracts.
pub fn back_substitute(r: &DenseMatrix, h: &[f64], ctr: &mut FlopCounter) -> Result<Vec<f64>> {
    let t = r.rows();
    if r.cols() != t || h.len() != t {
        return Err(Error::Dimension(format!(
            "triangular system {}x{} with rhs of length {}",
            r.rows(),
            r.cols(),
            h.len()
        )));
    }
    back_substitute_with(t, |i, j| r.get(i, j), h, ctr)
}

pub(crate) fn back_substitute_with(
    t: usize,
    entry: impl Fn(usize, usize) -> f64,
    h: &[f64],
    ctr: &mut FlopCounter,
) -> Result<Vec<f64>> {
    let scale = (0..t).map(|i| entry(i, i).abs()).fold(0.0, f64::max);
    for i in 0..t {
        let d = entry(i, i).abs();
        if d == 0.0 || d <= RANK_TOL * scale {
            return Err(Error::Singular {
                index: i,
                value: entry(i, i),
            });
        }
    }
    let mut x = vec![0.0; t];
    for i in (0..t).rev() {
        let m = (t - 1 - i) as u64;
        let mut acc = h[i];
        for j in i + 1..t {
            acc -= entry(i, j) * x[j];
        }
        ctr.mults(m);
        ctr.adds(m);
        ctr.divs(1);
        x[i] = acc / entry(i, i);
    }
    Ok(x)
}

/// Householder QR of a tall matrix, kept in compact reflector form.
#[derive(Clone, Debug)]
pub struct HouseholderQr {
    rows: usize,
    cols: usize,
    /// Reflector vectors (length `rows - j` for column `j`).
    vs: Vec<Vec<f64>>,
    taus: Vec<f64>,
    /// Upper triangle, column `j` holds `R[0..=j, j]`.
    r: Vec<Vec<f64>>,
}

impl HouseholderQr {
    /// Factors `a` (rows >= cols >= 1). Fails when a diagonal entry of `R`
    /// falls below `RANK_TOL` times the largest column norm.
    pub fn factor(a: &DenseMatrix, ctr: &mut FlopCounter) -> Result<Self> {
        let (m, n) = (a.rows(), a.cols());
        if n == 0 || m == 0 {
            return Err(Error::Dimension(format!(
                "least squares needs rows >= cols >= 1, got {m}x{n}"
            )));
        }
        let scale = a.columns().map(norm2).fold(0.0, f64::max);
        if m < n {
            // More columns than rows: column m is the first one that cannot
            // be independent.
            return Err(Error::RankDeficient {
                column: m,
                diag: 0.0,
                scale,
            });
        }
        let mut work: Vec<Vec<f64>> = a.columns().map(<[f64]>::to_vec).collect();
        let mut vs = Vec::with_capacity(n);
        let mut taus = Vec::with_capacity(n);
        let mut r = Vec::with_capacity(n);

        for j in 0..n {
            let x = &work[j][j..];
            let xnorm = norm2_counted(x, ctr);
            let alpha = if x[0] >= 0.0 { -xnorm } else { xnorm };
            let mut v = x.to_vec();
            v[0] -= alpha;
            ctr.adds(1);
            let vv = dot_counted(&v, &v, ctr);
            let tau = if vv > 0.0 {
                ctr.divs(1);
                2.0 / vv
            } else {
                0.0
            };

            let mut rcol: Vec<f64> = work[j][..j].to_vec();
            rcol.push(alpha);
            if alpha.abs() <= RANK_TOL * scale || scale == 0.0 {
                return Err(Error::RankDeficient {
                    column: j,
                    diag: alpha,
                    scale,
                });
            }
            r.push(rcol);

            for col in work.iter_mut().skip(j + 1) {
                let s = tau * dot_counted(&v, &col[j..], ctr);
                ctr.mults(1);
                sub_scaled(&mut col[j..], s, &v, ctr);
            }
            vs.push(v);
            taus.push(tau);
        }
        Ok(HouseholderQr {
            rows: m,
            cols: n,
            vs,
            taus,
            r,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn r_entry(&self, i: usize, j: usize) -> f64 {
        if i <= j {
            self.r[j][i]
        } else {
            0.0
        }
    }

    /// Applies `Q^T` in place.
    pub fn apply_qt(&self, y: &mut [f64], ctr: &mut FlopCounter) {
        for (j, (v, &tau)) in self.vs.iter().zip(&self.taus).enumerate() {
            let s = tau * dot_counted(v, &y[j..], ctr);
            ctr.mults(1);
            sub_scaled(&mut y[j..], s, v, ctr);
        }
    }

    /// Least-squares coefficients minimising `||y - A b||`.
    pub fn solve(&self, y: &[f64], ctr: &mut FlopCounter) -> Result<Vec<f64>> {
        if y.len() != self.rows {
            return Err(Error::Dimension(format!(
                "rhs of length {} for {} rows",
                y.len(),
                self.rows
            )));
        }
        let mut w = y.to_vec();
        self.apply_qt(&mut w, ctr);
        back_substitute_with(self.cols, |i, j| self.r_entry(i, j), &w[..self.cols], ctr)
    }
}

/// Least-squares minimiser of `||y - A b||_2` through Householder QR.
pub fn solve_small_ls(a: &DenseMatrix, y: &[f64], ctr: &mut FlopCounter) -> Result<Vec<f64>> {
    HouseholderQr::factor(a, ctr)?.solve(y, ctr)
}

/// Thin QR `[a_1 .. a_t] = Q R` grown one column at a time.
#[derive(Clone, Debug)]
pub struct IncrementalQr {
    q: DenseMatrix,
    /// Column `j` holds `R[0..=j, j]`.
    r: Vec<Vec<f64>>,
}

impl IncrementalQr {
    pub fn new(rows: usize) -> Self {
        IncrementalQr {
            q: DenseMatrix::zeros(rows, 0),
            r: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn q(&self) -> &DenseMatrix {
        &self.q
    }

    pub fn r_entry(&self, i: usize, j: usize) -> f64 {
        if i <= j {
            self.r[j][i]
        } else {
            0.0
        }
    }

    pub fn r_matrix(&self) -> DenseMatrix {
        let t = self.len();
        let mut m = DenseMatrix::zeros(t, t);
        for j in 0..t {
            for i in 0..=j {
                m.set(i, j, self.r[j][i]);
            }
        }
        m
    }

    /// Appends column `a` using Gram-Schmidt with one re-orthogonalisation
    /// pass. Returns the new column of `R`.
    pub fn append(&mut self, a: &[f64], ctr: &mut FlopCounter) -> Result<&[f64]> {
        let n = self.q.rows();
        if a.len() != n {
            return Err(Error::Dimension(format!(
                "column of length {} for {n} rows",
                a.len()
            )));
        }
        let t = self.len();
        let anorm = norm2(a);
        let mut w = a.to_vec();
        let mut coeffs = vec![0.0; t];
        for pass in 0..2 {
            for (j, c) in coeffs.iter_mut().enumerate() {
                let h = dot_counted(self.q.col(j), &w, ctr);
                sub_scaled(&mut w, h, self.q.col(j), ctr);
                *c += h;
                if pass == 1 {
                    ctr.adds(1);
                }
            }
        }
        let rho = norm2_counted(&w, ctr);
        if rho <= RANK_TOL * anorm || anorm == 0.0 {
            return Err(Error::RankDeficient {
                column: t,
                diag: rho,
                scale: anorm,
            });
        }
        ctr.divs(1);
        let inv = 1.0 / rho;
        ctr.mults(n as u64);
        w.iter_mut().for_each(|v| *v *= inv);
        self.q.push_column(&w)?;
        coeffs.push(rho);
        self.r.push(coeffs);
        Ok(&self.r[t])
    }

    /// Solves `R x = h` for the current factor.
    pub fn solve_r(&self, h: &[f64], ctr: &mut FlopCounter) -> Result<Vec<f64>> {
        if h.len() != self.len() {
            return Err(Error::Dimension(format!(
                "rhs of length {} for {} columns",
                h.len(),
                self.len()
            )));
        }
        back_substitute_with(self.len(), |i, j| self.r_entry(i, j), h, ctr)
    }
}

/// Appends `a` to the thin QR factors `(Q, R)` and returns the grown pair.
pub fn qr_append_column(
    q: &DenseMatrix,
    r: &DenseMatrix,
    a: &[f64],
    ctr: &mut FlopCounter,
) -> Result<(DenseMatrix, DenseMatrix)> {
    let t = q.cols();
    if r.rows() != t || r.cols() != t {
        return Err(Error::Dimension(format!(
            "R is {}x{} but Q has {t} columns",
            r.rows(),
            r.cols()
        )));
    }
    for i in 0..t {
        for j in 0..i {
            if r.get(i, j) != 0.0 {
                return Err(Error::Parameter(format!(
                    "R is not upper triangular at ({i}, {j})"
                )));
            }
        }
        for j in 0..=i {
            let d = dot_plain(q.col(i), q.col(j));
            let target = if i == j { 1.0 } else { 0.0 };
            if (d - target).abs() > 1e-10 {
                return Err(Error::Parameter(format!(
                    "Q columns {i} and {j} are not orthonormal (inner product {d:.3e})"
                )));
            }
        }
    }
    let mut inc = IncrementalQr {
        q: q.clone(),
        r: (0..t).map(|j| (0..=j).map(|i| r.get(i, j)).collect()).collect(),
    };
    inc.append(a, ctr)?;
    let r = inc.r_matrix();
    Ok((inc.q, r))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    }

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut s = seed;
        let data = (0..rows * cols).map(|_| lcg(&mut s)).collect();
        DenseMatrix::from_col_major(rows, cols, data).unwrap()
    }

    #[test]
    fn dot_hand_cases() {
        let mut ctr = FlopCounter::new();
        assert_eq!(dot(&[1.0, 0.0, 0.0], &[0.0, 5.0, 0.0], &mut ctr).unwrap(), 0.0);
        assert_eq!(ctr.total(), 5);
        let mut ctr = FlopCounter::new();
        assert_eq!(dot(&[2.0, 3.0], &[4.0, 1.0], &mut ctr).unwrap(), 11.0);
        assert_eq!(ctr.total(), 3);
    }

    #[test]
    fn dot_matches_naive_loop() {
        let m = random_matrix(100, 2, 7);
        let (u, v) = (m.col(0), m.col(1));
        let mut oracle = 0.0;
        for i in 0..100 {
            oracle += u[i] * v[i];
        }
        let mut ctr = FlopCounter::new();
        let got = dot(u, v, &mut ctr).unwrap();
        assert!((got - oracle).abs() <= 1e-12 * oracle.abs().max(1e-300));
        assert_eq!(ctr.total(), 199);
    }

    #[test]
    fn dot_rejects_mismatch() {
        let mut ctr = FlopCounter::new();
        assert!(matches!(
            dot(&[1.0], &[1.0, 2.0], &mut ctr),
            Err(Error::Dimension(_))
        ));
        assert!(dot(&[], &[], &mut ctr).is_err());
    }

    #[test]
    fn axpy_cases() {
        let mut ctr = FlopCounter::new();
        let y = [1.0, 2.0];
        let out = axpy_update(&y, &[], &DenseMatrix::zeros(2, 0), &mut ctr).unwrap();
        assert_eq!(out, y);
        assert_eq!(ctr.total(), 0);

        let cols = DenseMatrix::from_columns(&[vec![1.0, 0.0]]).unwrap();
        let out = axpy_update(&[1.0, 1.0], &[1.0], &cols, &mut ctr).unwrap();
        assert_eq!(out, vec![0.0, 1.0]);

        assert!(axpy_update(&[1.0], &[1.0], &cols, &mut ctr).is_err());
    }

    #[test]
    fn axpy_matches_naive_loop() {
        let cols = random_matrix(50, 4, 11);
        let r = random_matrix(50, 1, 12).col(0).to_vec();
        let b = [0.3, -1.2, 2.5, 0.7];
        let mut ctr = FlopCounter::new();
        let got = axpy_update(&r, &b, &cols, &mut ctr).unwrap();
        for i in 0..50 {
            let mut o = r[i];
            for j in 0..4 {
                o -= cols.get(i, j) * b[j];
            }
            assert!((got[i] - o).abs() <= 1e-12 * o.abs().max(1.0));
        }
        assert_eq!(ctr.total(), 4 * 100);
    }

    #[test]
    fn back_substitute_cases() {
        let mut ctr = FlopCounter::new();
        let r = DenseMatrix::from_rows(&[vec![2.0]]).unwrap();
        assert_eq!(back_substitute(&r, &[6.0], &mut ctr).unwrap(), vec![3.0]);
        assert_eq!(ctr.total(), 1);

        let mut ctr = FlopCounter::new();
        let h = [1.5, -2.0, 7.0];
        assert_eq!(
            back_substitute(&DenseMatrix::identity(3), &h, &mut ctr).unwrap(),
            h.to_vec()
        );
        // t^2 regardless of the entries: 3 divides, 3 multiplies, 3 adds.
        assert_eq!(ctr.total(), 9);
    }

    #[test]
    fn back_substitute_random_multiply_back() {
        let mut r = random_matrix(8, 8, 3);
        for i in 0..8 {
            for j in 0..i {
                r.set(i, j, 0.0);
            }
            r.set(i, i, 3.0 + r.get(i, i));
        }
        let h = random_matrix(8, 1, 4).col(0).to_vec();
        let mut ctr = FlopCounter::new();
        let x = back_substitute(&r, &h, &mut ctr).unwrap();
        assert_eq!(ctr.total(), 64);
        let rx = r.mul_vec(&x).unwrap();
        let err: Vec<f64> = rx.iter().zip(&h).map(|(a, b)| a - b).collect();
        assert!(norm2(&err) <= 1e-10 * norm2(&h));
    }

    #[test]
    fn back_substitute_singular() {
        let r = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 0.0]]).unwrap();
        let mut ctr = FlopCounter::new();
        assert!(matches!(
            back_substitute(&r, &[1.0, 1.0], &mut ctr),
            Err(Error::Singular { index: 1, .. })
        ));
    }

    #[test]
    fn small_ls_trivial_cases() {
        let mut ctr = FlopCounter::new();
        let a = DenseMatrix::from_columns(&[vec![1.0, 0.0, 0.0]]).unwrap();
        let b = solve_small_ls(&a, &[7.0, 0.0, 0.0], &mut ctr).unwrap();
        assert!((b[0] - 7.0).abs() < 1e-15);

        let s = 0.5;
        let a = DenseMatrix::from_columns(&[vec![s, s, s, s], vec![s, -s, s, -s]]).unwrap();
        let y: Vec<f64> = (0..4).map(|i| 3.0 * a.get(i, 0) - 2.0 * a.get(i, 1)).collect();
        let b = solve_small_ls(&a, &y, &mut ctr).unwrap();
        assert!((b[0] - 3.0).abs() < 1e-14 && (b[1] + 2.0).abs() < 1e-14);
        let r: Vec<f64> = y
            .iter()
            .zip(a.mul_vec(&b).unwrap())
            .map(|(u, v)| u - v)
            .collect();
        assert!(norm2(&r) < 1e-14);
    }

    #[test]
    fn small_ls_rank_deficient_names_column() {
        let a = DenseMatrix::from_columns(&[
            vec![1.0, 2.0, 3.0],
            vec![0.0, 1.0, 0.0],
            vec![2.0, 4.0, 6.0],
        ])
        .unwrap();
        let mut ctr = FlopCounter::new();
        match solve_small_ls(&a, &[1.0, 1.0, 1.0], &mut ctr) {
            Err(Error::RankDeficient { column, .. }) => assert_eq!(column, 2),
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }

    #[test]
    fn qr_append_trivial_cases() {
        let mut ctr = FlopCounter::new();
        let (q, r) =
            qr_append_column(&DenseMatrix::zeros(2, 0), &DenseMatrix::zeros(0, 0), &[3.0, 4.0], &mut ctr)
                .unwrap();
        assert!((q.get(0, 0) - 0.6).abs() < 1e-15 && (q.get(1, 0) - 0.8).abs() < 1e-15);
        assert!((r.get(0, 0) - 5.0).abs() < 1e-15);

        let (q, r) = qr_append_column(
            &DenseMatrix::zeros(3, 0),
            &DenseMatrix::zeros(0, 0),
            &[1.0, 0.0, 0.0],
            &mut ctr,
        )
        .unwrap();
        let (_, r) = qr_append_column(&q, &r, &[0.0, 1.0, 0.0], &mut ctr).unwrap();
        assert_eq!(r, DenseMatrix::identity(2));
    }

    #[test]
    fn qr_append_reconstructs_stack() {
        let a = random_matrix(20, 6, 99);
        let mut ctr = FlopCounter::new();
        let mut q = DenseMatrix::zeros(20, 0);
        let mut r = DenseMatrix::zeros(0, 0);
        for j in 0..6 {
            (q, r) = qr_append_column(&q, &r, a.col(j), &mut ctr).unwrap();
            let stack = a.select_columns(&(0..=j).collect::<Vec<_>>());
            // direct multiplication oracle
            let mut diff = 0.0;
            for c in 0..=j {
                for i in 0..20 {
                    let mut s = 0.0;
                    for l in 0..=j {
                        s += q.get(i, l) * r.get(l, c);
                    }
                    diff += (s - stack.get(i, c)).powi(2);
                }
            }
            assert!(diff.sqrt() <= 1e-9 * stack.frobenius_norm());
            for c1 in 0..=j {
                for c2 in 0..c1 {
                    assert!(dot_plain(q.col(c1), q.col(c2)).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn qr_append_rejects_dependent_column() {
        let mut qr = IncrementalQr::new(3);
        let mut ctr = FlopCounter::new();
        qr.append(&[1.0, 1.0, 0.0], &mut ctr).unwrap();
        qr.append(&[0.0, 1.0, 0.0], &mut ctr).unwrap();
        assert!(matches!(
            qr.append(&[2.0, -1.0, 0.0], &mut ctr),
            Err(Error::RankDeficient { column: 2, .. })
        ));
    }

    #[test]
    fn kernel_attribution() {
        let mut ctr = FlopCounter::new();
        ctr.set_kernel(Kernel::Beta);
        dot(&[1.0, 2.0], &[3.0, 4.0], &mut ctr).unwrap();
        ctr.set_kernel(Kernel::Residual);
        ctr.divs(2);
        assert_eq!(ctr.by_kernel()[Kernel::Beta].total(), 3);
        assert_eq!(ctr.by_kernel()[Kernel::Residual].divs, 2);
        assert_eq!(ctr.total(), 5);
        ctr.reset();
        assert_eq!(ctr.total(), 0);
    }

    #[test]
    fn non_finite_rejected() {
        assert!(matches!(
            DenseMatrix::from_col_major(2, 1, vec![1.0, f64::NAN]),
            Err(Error::NonFinite { row: 1, col: 0 })
        ));
    }
}
