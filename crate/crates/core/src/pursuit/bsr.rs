use super::Engine;
use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::matrix::{norm2, sub_scaled, DenseMatrix, FlopCounter, HouseholderQr, Kernel, RANK_TOL};

struct Block {
    start: usize,
    z: DenseMatrix,
    qr: HouseholderQr,
    beta: Vec<f64>,
}

impl Block {
    fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.z.cols()
    }
}

/// Blocked successive regression: the scalar regressions of
/// [`super::sr::SuccessiveRegression`] become small least-squares problems
/// against whole blocks, `gamma_{l,j} = Z_l^+ z_j` and `beta_t = Z_t^+ y`,
/// each solved with a Householder factorisation cached per block.
pub(crate) struct BlockedRegression<'a> {
    dict: &'a Dictionary,
    y: &'a [f64],
    ones: Option<(Vec<f64>, f64)>,
    blocks: Vec<Block>,
    /// Per position, coefficients on every earlier position.
    gamma: Vec<Vec<f64>>,
    b: Vec<f64>,
    selected: Vec<usize>,
    residual: Vec<f64>,
}

impl<'a> BlockedRegression<'a> {
    pub(crate) fn new(dict: &'a Dictionary, y: &'a [f64], ones_regressor: bool) -> Self {
        let n = dict.n_measurements();
        BlockedRegression {
            dict,
            y,
            ones: ones_regressor.then(|| (vec![1.0; n], n as f64)),
            blocks: Vec::new(),
            gamma: Vec::new(),
            b: Vec::new(),
            selected: Vec::new(),
            residual: y.to_vec(),
        }
    }

    fn orthogonalize(&self, a: &[f64], ctr: &mut FlopCounter) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut w = a.to_vec();
        if let Some((z0, zz0)) = &self.ones {
            ctr.set_kernel(Kernel::GammaInner);
            let num = crate::matrix::dot_counted(z0, &w, ctr);
            ctr.set_kernel(Kernel::GammaDivide);
            ctr.divs(1);
            ctr.set_kernel(Kernel::Orthogonalize);
            sub_scaled(&mut w, num / zz0, z0, ctr);
        }
        let mut g = vec![0.0; self.selected.len()];
        for blk in &self.blocks {
            ctr.set_kernel(Kernel::GammaInner);
            let coef = blk.qr.solve(&w, ctr)?;
            ctr.set_kernel(Kernel::Orthogonalize);
            for (c, zc) in coef.iter().zip(blk.z.columns()) {
                sub_scaled(&mut w, *c, zc, ctr);
            }
            g[blk.range()].copy_from_slice(&coef);
        }
        Ok((w, g))
    }

    fn backtrack(&mut self, ctr: &mut FlopCounter) {
        ctr.set_kernel(Kernel::Backtrack);
        let t = self.selected.len();
        self.b = vec![0.0; t];
        for blk in self.blocks.iter().rev() {
            let later = blk.range().end;
            for (i, &beta) in blk.range().zip(&blk.beta) {
                let mut acc = beta;
                for k in later..t {
                    acc -= self.b[k] * self.gamma[k][i];
                }
                let m = (t - later) as u64;
                ctr.mults(m);
                ctr.adds(m);
                self.b[i] = acc;
            }
        }
    }
}

impl Engine for BlockedRegression<'_> {
    fn absorb(&mut self, atoms: &[usize], ctr: &mut FlopCounter) -> Result<()> {
        let start = self.selected.len();
        let mut zs = Vec::with_capacity(atoms.len());
        let mut gs = Vec::with_capacity(atoms.len());
        for (i, &j) in atoms.iter().enumerate() {
            let a = self.dict.atom(j);
            let (w, g) = self.orthogonalize(a, ctr)?;
            let (rho, scale) = (norm2(&w), norm2(a));
            if rho <= RANK_TOL * scale {
                return Err(Error::RankDeficient {
                    column: start + i,
                    diag: rho,
                    scale,
                });
            }
            zs.push(w);
            gs.push(g);
        }
        ctr.set_kernel(Kernel::Beta);
        let z = DenseMatrix::from_columns(&zs)?;
        let qr = HouseholderQr::factor(&z, ctr).map_err(|e| match e {
            Error::RankDeficient { column, diag, scale } => Error::RankDeficient {
                column: start + column,
                diag,
                scale,
            },
            other => other,
        })?;
        let beta = qr.solve(self.y, ctr)?;

        self.blocks.push(Block { start, z, qr, beta });
        self.gamma.extend(gs);
        self.selected.extend_from_slice(atoms);
        self.backtrack(ctr);

        ctr.set_kernel(Kernel::Residual);
        let mut r = self.y.to_vec();
        for (&j, &b) in self.selected.iter().zip(&self.b) {
            sub_scaled(&mut r, b, self.dict.atom(j), ctr);
        }
        self.residual = r;
        Ok(())
    }

    fn residual(&self) -> &[f64] {
        &self.residual
    }

    fn coefficients(&self) -> &[f64] {
        &self.b
    }

    fn norm_evaluations(&self) -> usize {
        self.blocks.iter().map(|b| b.z.cols()).sum()
    }
}
