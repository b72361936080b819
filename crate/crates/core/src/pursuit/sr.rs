use super::Engine;
use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::matrix::{dot_counted, norm2, sub_scaled, FlopCounter, Kernel, RANK_TOL};

/// Successive regression.
///
/// Each new atom `a_t` is regressed on the earlier orthogonal directions
/// `z_l` (`gamma_{l,t} = <z_l, a_t> / <z_l, z_l>`), leaving
/// `z_t = a_t - sum_l gamma_{l,t} z_l`. Its coefficient against `y` is
/// `beta_t = <z_t, y> / <z_t, z_t>`, and the least-squares coefficients follow
/// by back-tracking `b_t = beta_t`, `b_l = beta_l - sum_{k>l} b_k gamma_{l,k}`.
///
/// `<z_l, z_l>` is computed once, when `z_l` is formed, and cached.
/// The projections are taken against the partially orthogonalised vector
/// (modified Gram-Schmidt), which gives the same `gamma` in exact arithmetic
/// at the same cost.
pub(crate) struct SuccessiveRegression<'a> {
    dict: &'a Dictionary,
    y: &'a [f64],
    /// `(z_0, <z_0, z_0>)` when the all-ones regressor is enabled.
    ones: Option<(Vec<f64>, f64)>,
    z: Vec<Vec<f64>>,
    zz: Vec<f64>,
    /// `gamma[t][l]` for `l < t`.
    gamma: Vec<Vec<f64>>,
    beta: Vec<f64>,
    b: Vec<f64>,
    selected: Vec<usize>,
    residual: Vec<f64>,
    norm_evaluations: usize,
}

impl<'a> SuccessiveRegression<'a> {
    pub(crate) fn new(dict: &'a Dictionary, y: &'a [f64], ones_regressor: bool) -> Self {
        let n = dict.n_measurements();
        SuccessiveRegression {
            dict,
            y,
            ones: ones_regressor.then(|| (vec![1.0; n], n as f64)),
            z: Vec::new(),
            zz: Vec::new(),
            gamma: Vec::new(),
            beta: Vec::new(),
            b: Vec::new(),
            selected: Vec::new(),
            residual: y.to_vec(),
            norm_evaluations: 0,
        }
    }

    #[cfg(test)]
    pub(crate) fn directions(&self) -> &[Vec<f64>] {
        &self.z
    }

    fn add_atom(&mut self, j: usize, ctr: &mut FlopCounter) -> Result<()> {
        let a = self.dict.atom(j);
        let mut w = a.to_vec();
        if let Some((z0, zz0)) = &self.ones {
            regress(z0, *zz0, &mut w, ctr);
        }
        let mut gamma_t = Vec::with_capacity(self.z.len());
        for (zl, &zzl) in self.z.iter().zip(&self.zz) {
            gamma_t.push(regress(zl, zzl, &mut w, ctr));
        }

        ctr.set_kernel(Kernel::Beta);
        let zy = dot_counted(&w, self.y, ctr);
        let zz = dot_counted(&w, &w, ctr);
        self.norm_evaluations += 1;
        let scale = norm2(a);
        if zz.sqrt() <= RANK_TOL * scale {
            return Err(Error::RankDeficient {
                column: self.z.len(),
                diag: zz.sqrt(),
                scale,
            });
        }
        ctr.divs(1);
        self.beta.push(zy / zz);
        self.z.push(w);
        self.zz.push(zz);
        self.gamma.push(gamma_t);
        self.selected.push(j);
        Ok(())
    }

    fn backtrack(&mut self, ctr: &mut FlopCounter) {
        ctr.set_kernel(Kernel::Backtrack);
        let t = self.beta.len();
        self.b = self.beta.clone();
        for l in (0..t.saturating_sub(1)).rev() {
            let mut acc = self.beta[l];
            for k in l + 1..t {
                acc -= self.b[k] * self.gamma[k][l];
            }
            let m = (t - 1 - l) as u64;
            ctr.mults(m);
            ctr.adds(m);
            self.b[l] = acc;
        }
    }
}

/// Regresses `w` on `z` in place and returns the coefficient.
fn regress(z: &[f64], zz: f64, w: &mut [f64], ctr: &mut FlopCounter) -> f64 {
    ctr.set_kernel(Kernel::GammaInner);
    let num = dot_counted(z, w, ctr);
    ctr.set_kernel(Kernel::GammaDivide);
    ctr.divs(1);
    let g = num / zz;
    ctr.set_kernel(Kernel::Orthogonalize);
    sub_scaled(w, g, z, ctr);
    g
}

impl Engine for SuccessiveRegression<'_> {
    fn absorb(&mut self, atoms: &[usize], ctr: &mut FlopCounter) -> Result<()> {
        for &j in atoms {
            self.add_atom(j, ctr)?;
        }
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
        self.norm_evaluations
    }
}
