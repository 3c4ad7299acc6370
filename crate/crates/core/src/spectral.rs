//! Zero-frequency spectral density of the reduced-form VAR and the
//! low-frequency ratio `π_ij = Π_ij(0)/Π_jj(0)`.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::sampler::quantile;
use crate::var::{structural_to_reduced, VarDraws};

/// Spectral radius above which a draw counts as non-stationary.
pub const STABILITY_MARGIN: f64 = 1e-8;

/// First-order stacking `Z_t = F Z_{t-1} + E_t` of a VAR(p) without the
/// intercept.
#[derive(Clone, Debug, PartialEq)]
pub struct CompanionForm {
    pub m: usize,
    pub p: usize,
    /// `mp×mp`.
    pub f: DMatrix<f64>,
    /// `mp×mp` with the reduced-form covariance in the leading block.
    pub upsilon: DMatrix<f64>,
}

/// Builds the companion form from `A = [A₁, …, A_p, c]` (the intercept
/// column is ignored) and the reduced-form covariance.
pub fn companion(a: &DMatrix<f64>, sigma_red: &DMatrix<f64>, p: usize) -> Result<CompanionForm> {
    let m = a.nrows();
    if a.ncols() < m * p || sigma_red.shape() != (m, m) {
        return Err(Error::Dimension("coefficient or covariance shape disagrees with m and p".into()));
    }
    let mp = m * p;
    let mut f = DMatrix::zeros(mp, mp);
    f.view_mut((0, 0), (m, mp)).copy_from(&a.columns(0, mp));
    for r in m..mp {
        f[(r, r - m)] = 1.0;
    }
    let mut upsilon = DMatrix::zeros(mp, mp);
    upsilon.view_mut((0, 0), (m, m)).copy_from(sigma_red);
    Ok(CompanionForm { m, p, f, upsilon })
}

impl CompanionForm {
    /// Largest eigenvalue modulus of `F`.
    pub fn spectral_radius(&self) -> f64 {
        self.f
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn is_stable(&self) -> bool {
        self.spectral_radius() < 1.0 - STABILITY_MARGIN
    }

    /// `Π(0) = J(I−F)⁻¹Υ(I−F')⁻¹J'`.
    pub fn long_run_covariance(&self) -> Result<DMatrix<f64>> {
        if !self.is_stable() {
            return Err(Error::Numerical(format!(
                "spectral radius {} is not below one",
                self.spectral_radius()
            )));
        }
        let mp = self.m * self.p;
        let inv = (DMatrix::identity(mp, mp) - &self.f)
            .try_inverse()
            .ok_or_else(|| Error::Numerical("I - F is singular".into()))?;
        let j_inv = inv.rows(0, self.m).into_owned();
        let pi = &j_inv * &self.upsilon * j_inv.transpose();
        Ok((&pi + pi.transpose()) * 0.5)
    }
}

/// `π_ij = Π_ij(0)/Π_jj(0)`.
pub fn low_freq(cf: &CompanionForm, i: usize, j: usize) -> Result<f64> {
    if i >= cf.m || j >= cf.m {
        return Err(Error::Dimension(format!("pair ({i}, {j}) outside m = {}", cf.m)));
    }
    let pi = cf.long_run_covariance()?;
    Ok(pi[(i, j)] / pi[(j, j)])
}

/// Posterior summary of `π_ij` at one period.
#[derive(Clone, Debug, PartialEq)]
pub struct BandRow {
    pub t: usize,
    pub i: usize,
    pub j: usize,
    pub median: f64,
    pub q16: f64,
    pub q84: f64,
    /// Draws dropped as non-stationary.
    pub excluded: usize,
}

/// 16/50/84% bands of `π_ij` per period over stationary draws.
pub fn low_freq_bands(draws: &VarDraws, pairs: &[(usize, usize)]) -> Result<Vec<BandRow>> {
    let n = draws.n();
    let per_t = |t: usize| -> Result<Vec<BandRow>> {
        let mut vals = vec![Vec::with_capacity(n); pairs.len()];
        let mut excluded = 0;
        for d in 0..n {
            let (a, cov) = structural_to_reduced(&draws.structural(d, t));
            let cf = companion(&a, &cov, draws.p)?;
            match cf.long_run_covariance() {
                Ok(pi) => {
                    for (v, &(i, j)) in vals.iter_mut().zip(pairs) {
                        v.push(pi[(i, j)] / pi[(j, j)]);
                    }
                }
                Err(_) => excluded += 1,
            }
        }
        Ok(pairs
            .iter()
            .zip(vals)
            .map(|(&(i, j), mut v)| {
                let (q16, median, q84) = if v.is_empty() {
                    (f64::NAN, f64::NAN, f64::NAN)
                } else {
                    (quantile(&mut v, 0.16), quantile(&mut v, 0.5), quantile(&mut v, 0.84))
                };
                BandRow { t, i, j, median, q16, q84, excluded }
            })
            .collect())
    };
    if let Some(&(i, j)) = pairs.iter().find(|&&(i, j)| i >= draws.m || j >= draws.m) {
        return Err(Error::Dimension(format!("pair ({i}, {j}) outside m = {}", draws.m)));
    }
    let periods = draws.periods();
    #[cfg(feature = "parallel")]
    let rows: Vec<Vec<BandRow>> = {
        use rayon::prelude::*;
        (0..periods).into_par_iter().map(per_t).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let rows: Vec<Vec<BandRow>> = (0..periods).map(per_t).collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

/// CSV with columns `t,i,j,median,q16,q84,excluded`.
pub fn write_bands(path: &Path, rows: &[BandRow]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "t,i,j,median,q16,q84,excluded")?;
    for r in rows {
        writeln!(w, "{},{},{},{:e},{:e},{:e},{}", r.t, r.i, r.j, r.median, r.q16, r.q84, r.excluded)?;
    }
    w.flush()?;
    Ok(())
}
