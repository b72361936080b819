use crate::error::{Error, Result};

/// A vector of length `dim` stored as its sorted support and the values on it.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseSignal {
    dim: usize,
    support: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSignal {
    pub fn zeros(dim: usize) -> Self {
        SparseSignal {
            dim,
            support: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds a signal from `(index, value)` pairs. Indices must be distinct
    /// and in range, values finite and nonzero.
    pub fn new(dim: usize, support: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if support.len() != values.len() {
            return Err(Error::Dimension(format!(
                "{} support indices for {} values",
                support.len(),
                values.len()
            )));
        }
        let mut pairs: Vec<(usize, f64)> = support.into_iter().zip(values).collect();
        pairs.sort_by_key(|p| p.0);
        for w in pairs.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::Parameter(format!("duplicate support index {}", w[0].0)));
            }
        }
        for &(j, v) in &pairs {
            if j >= dim {
                return Err(Error::Parameter(format!("support index {j} >= dimension {dim}")));
            }
            if !v.is_finite() || v == 0.0 {
                return Err(Error::Parameter(format!("value {v} at index {j}")));
            }
        }
        let (support, values) = pairs.into_iter().unzip();
        Ok(SparseSignal { dim, support, values })
    }

    /// Keeps the nonzero entries of `x`.
    pub fn from_dense(x: &[f64]) -> Self {
        Self::from_pairs(x.len(), x.iter().copied().enumerate())
    }

    /// Like [`SparseSignal::new`] but silently drops exact zeros. Callers
    /// guarantee distinct in-range indices.
    pub(crate) fn from_pairs(dim: usize, pairs: impl IntoIterator<Item = (usize, f64)>) -> Self {
        let mut pairs: Vec<(usize, f64)> = pairs.into_iter().filter(|p| p.1 != 0.0).collect();
        pairs.sort_by_key(|p| p.0);
        let (support, values) = pairs.into_iter().unzip();
        SparseSignal { dim, support, values }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sparsity(&self) -> usize {
        self.support.len()
    }

    pub fn get(&self, j: usize) -> f64 {
        self.support
            .binary_search(&j)
            .map_or(0.0, |p| self.values[p])
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.dim];
        for (&j, &v) in self.support.iter().zip(&self.values) {
            x[j] = v;
        }
        x
    }
}
