use super::Engine;
use crate::dictionary::Dictionary;
use crate::error::Result;
use crate::matrix::{axpy_update, solve_small_ls, DenseMatrix, FlopCounter, Kernel};

/// Refits every selected atom from scratch with Householder least squares.
pub(crate) struct LeastSquaresEngine<'a> {
    dict: &'a Dictionary,
    y: &'a [f64],
    selected: Vec<usize>,
    coefs: Vec<f64>,
    residual: Vec<f64>,
}

impl<'a> LeastSquaresEngine<'a> {
    pub(crate) fn new(dict: &'a Dictionary, y: &'a [f64]) -> Self {
        LeastSquaresEngine {
            dict,
            y,
            selected: Vec::new(),
            coefs: Vec::new(),
            residual: y.to_vec(),
        }
    }
}

impl Engine for LeastSquaresEngine<'_> {
    fn absorb(&mut self, atoms: &[usize], ctr: &mut FlopCounter) -> Result<()> {
        let mut trial = self.selected.clone();
        trial.extend_from_slice(atoms);
        let a: DenseMatrix = self.dict.matrix().select_columns(&trial);
        ctr.set_kernel(Kernel::LeastSquares);
        let coefs = solve_small_ls(&a, self.y, ctr)?;
        ctr.set_kernel(Kernel::Residual);
        self.residual = axpy_update(self.y, &coefs, &a, ctr)?;
        self.selected = trial;
        self.coefs = coefs;
        Ok(())
    }

    fn residual(&self) -> &[f64] {
        &self.residual
    }

    fn coefficients(&self) -> &[f64] {
        &self.coefs
    }
}
