use super::Engine;
use crate::dictionary::Dictionary;
use crate::error::Result;
use crate::matrix::{dot_counted, sub_scaled, FlopCounter, IncrementalQr, Kernel};

/// Keeps `A_t = Q R` and `h = Q^T y`; each new atom adds one column to both.
pub(crate) struct QrEngine<'a> {
    dict: &'a Dictionary,
    y: &'a [f64],
    qr: IncrementalQr,
    h: Vec<f64>,
    selected: Vec<usize>,
    coefs: Vec<f64>,
    residual: Vec<f64>,
}

impl<'a> QrEngine<'a> {
    pub(crate) fn new(dict: &'a Dictionary, y: &'a [f64]) -> Self {
        QrEngine {
            dict,
            y,
            qr: IncrementalQr::new(dict.n_measurements()),
            h: Vec::new(),
            selected: Vec::new(),
            coefs: Vec::new(),
            residual: y.to_vec(),
        }
    }
}

impl Engine for QrEngine<'_> {
    fn absorb(&mut self, atoms: &[usize], ctr: &mut FlopCounter) -> Result<()> {
        for &j in atoms {
            ctr.set_kernel(Kernel::QrUpdate);
            self.qr.append(self.dict.atom(j), ctr)?;
            ctr.set_kernel(Kernel::Project);
            let q = self.qr.q();
            self.h.push(dot_counted(q.col(q.cols() - 1), self.y, ctr));
            self.selected.push(j);
        }
        ctr.set_kernel(Kernel::BackSubstitute);
        self.coefs = self.qr.solve_r(&self.h, ctr)?;
        ctr.set_kernel(Kernel::Residual);
        let mut r = self.y.to_vec();
        for (&j, &b) in self.selected.iter().zip(&self.coefs) {
            sub_scaled(&mut r, b, self.dict.atom(j), ctr);
        }
        self.residual = r;
        Ok(())
    }

    fn residual(&self) -> &[f64] {
        &self.residual
    }

    fn coefficients(&self) -> &[f64] {
        &self.coefs
    }
}
