//! Structured linear algebra for the static state-space form.
//!
//! The normalized states are stacked period by period into a vector of
//! length `ν = T·K` (index `t·K + i`). Their prior precision is `Φ'Φ`, where
//! `Φ` is unit lower block-bidiagonal with diagonal `K×K` subdiagonal blocks
//! `-φ_t`. Everything here works on that structure directly; the `ν×ν`
//! prior covariance `Ω₀ = (Φ'Φ)⁻¹` is never formed.

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{dim_err, Error, Result};

/// Unit lower block-bidiagonal matrix with diagonal subdiagonal blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockBidiagonal {
    periods: usize,
    block: usize,
    /// `(T-1)·K` entries; entry `(t-1)·K + i` is `φ_{t,i}` for period `t ≥ 1`.
    /// The matrix holds `-φ` in those positions.
    phi: Vec<f64>,
}

impl BlockBidiagonal {
    /// `Φ = I`: every period starts a fresh white-noise innovation.
    pub fn identity(periods: usize, block: usize) -> Self {
        Self {
            periods,
            block,
            phi: vec![0.0; periods.saturating_sub(1) * block],
        }
    }

    /// Builds `Φ` from one diagonal per period. The first period's diagonal
    /// is ignored because the initial normalized state is pinned at zero.
    pub fn from_diagonals(phi_diagonals: &[Vec<f64>]) -> Result<Self> {
        let periods = phi_diagonals.len();
        if periods == 0 {
            return dim_err("at least one period is required");
        }
        let block = phi_diagonals[0].len();
        if block == 0 {
            return dim_err("block size must be positive");
        }
        let mut phi = Vec::with_capacity((periods - 1) * block);
        for (t, d) in phi_diagonals.iter().enumerate() {
            if d.len() != block {
                return dim_err(format!(
                    "period {t} has {} diagonal entries, expected {block}",
                    d.len()
                ));
            }
            if t > 0 {
                phi.extend_from_slice(d);
            }
        }
        if phi.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("phi diagonal".into()));
        }
        Ok(Self {
            periods,
            block,
            phi,
        })
    }

    /// Builds `Φ` from a row-major `T×K` array of diagonals (row 0 ignored).
    pub fn from_row_major(periods: usize, block: usize, phi: &[f64]) -> Result<Self> {
        if phi.len() != periods * block {
            return dim_err(format!(
                "expected {} phi entries, got {}",
                periods * block,
                phi.len()
            ));
        }
        Ok(Self {
            periods,
            block,
            phi: phi[block.min(phi.len())..].to_vec(),
        })
    }

    pub fn periods(&self) -> usize {
        self.periods
    }

    pub fn block(&self) -> usize {
        self.block
    }

    /// `ν = T·K`.
    pub fn dim(&self) -> usize {
        self.periods * self.block
    }

    /// `φ_{t,i}` for `t ≥ 1`; zero for `t = 0`.
    #[inline]
    pub fn phi(&self, t: usize, i: usize) -> f64 {
        if t == 0 {
            0.0
        } else {
            self.phi[(t - 1) * self.block + i]
        }
    }

    /// The stored subdiagonal blocks, each as a `K`-vector of `φ` values.
    pub fn subdiagonal_blocks(&self) -> impl Iterator<Item = &[f64]> {
        self.phi.chunks(self.block.max(1))
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return dim_err(format!("vector length {len}, expected {}", self.dim()));
        }
        Ok(())
    }

    /// `Φx`.
    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x.len())?;
        let k = self.block;
        let mut out = x.to_vec();
        for t in 1..self.periods {
            for i in 0..k {
                out[t * k + i] -= self.phi(t, i) * x[(t - 1) * k + i];
            }
        }
        Ok(out)
    }

    /// Solves `Φx = rhs` by forward substitution.
    pub fn solve_lower(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.check_len(rhs.len())?;
        let k = self.block;
        let mut x = rhs.to_vec();
        for t in 1..self.periods {
            for i in 0..k {
                x[t * k + i] += self.phi(t, i) * x[(t - 1) * k + i];
            }
        }
        Ok(x)
    }

    /// Solves `Φ'x = rhs` by backward substitution.
    pub fn solve_upper_transpose(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.check_len(rhs.len())?;
        let k = self.block;
        let mut x = rhs.to_vec();
        for t in (1..self.periods).rev() {
            for i in 0..k {
                x[(t - 1) * k + i] += self.phi(t, i) * x[t * k + i];
            }
        }
        Ok(x)
    }

    /// `Ω₀v = Φ⁻¹(Φ⁻ᵀv)`.
    pub fn apply_omega0(&self, v: &[f64]) -> Result<Vec<f64>> {
        let w = self.solve_upper_transpose(v)?;
        self.solve_lower(&w)
    }

    /// Dense `Φ`; only for tests and small oracles.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let k = self.block;
        let mut m = DMatrix::identity(n, n);
        for t in 1..self.periods {
            for i in 0..k {
                m[(t * k + i, (t - 1) * k + i)] = -self.phi(t, i);
            }
        }
        m
    }

    /// `W̃Ω₀W̃'` for the block-diagonal observation matrix whose row `t`
    /// carries `w_t'` (row `t` of `w`, a `T×K` matrix) in the columns of
    /// period `t`.
    ///
    /// Per coefficient, `Ω₀[t,s] = L[t,s]·D[s]` for `t ≥ s`, with
    /// `L[t,s] = Π_{q=s+1..t} φ_q` and `D[s] = 1 + φ_s²·D[s-1]`, so the
    /// whole product costs `O(T²K)` and stops early at `φ = 0` breaks.
    pub fn sandwich_omega0(&self, w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let (t_len, k) = (self.periods, self.block);
        if w.nrows() != t_len || w.ncols() != k {
            return dim_err(format!(
                "weights are {}x{}, expected {t_len}x{k}",
                w.nrows(),
                w.ncols()
            ));
        }
        let mut out = DMatrix::zeros(t_len, t_len);
        let mut d = vec![0.0; t_len];
        for i in 0..k {
            d[0] = 1.0;
            for s in 1..t_len {
                let p = self.phi(s, i);
                d[s] = 1.0 + p * p * d[s - 1];
            }
            for s in 0..t_len {
                let ws = w[(s, i)];
                if ws == 0.0 {
                    continue;
                }
                let base = ws * d[s];
                out[(s, s)] += ws * base;
                let mut prod = 1.0;
                for t in (s + 1)..t_len {
                    prod *= self.phi(t, i);
                    if prod == 0.0 {
                        break;
                    }
                    out[(t, s)] += w[(t, i)] * prod * base;
                }
            }
        }
        for s in 0..t_len {
            for t in (s + 1)..t_len {
                out[(s, t)] = out[(t, s)];
            }
        }
        Ok(out)
    }
}

/// Lower Cholesky factor of a dense symmetric positive definite matrix.
pub fn cholesky_spd(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(cholesky(a)?.l())
}

pub(crate) fn cholesky(a: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    if !a.is_square() {
        return dim_err(format!("{}x{} matrix is not square", a.nrows(), a.ncols()));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix entries".into()));
    }
    Cholesky::new(a.clone()).ok_or_else(|| {
        Error::NotPositiveDefinite(format!("{}x{} Cholesky pivot <= 0", a.nrows(), a.nrows()))
    })
}

/// Symmetric tridiagonal positive definite system, stored as diagonal and
/// first off-diagonal.
#[derive(Clone, Debug)]
pub struct Tridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

/// Cholesky factor of a [`Tridiagonal`]: lower bidiagonal with diagonal
/// `l_diag` and subdiagonal `l_off`.
#[derive(Clone, Debug)]
pub struct TridiagonalCholesky {
    l_diag: Vec<f64>,
    l_off: Vec<f64>,
}

impl Tridiagonal {
    pub fn cholesky(&self) -> Result<TridiagonalCholesky> {
        let n = self.diag.len();
        if self.off.len() + 1 != n.max(1) {
            return dim_err("off-diagonal must have n-1 entries");
        }
        let mut l_diag = vec![0.0; n];
        let mut l_off = vec![0.0; n.saturating_sub(1)];
        for i in 0..n {
            let mut piv = self.diag[i];
            if i > 0 {
                piv -= l_off[i - 1] * l_off[i - 1];
            }
            if !(piv > 0.0) || !piv.is_finite() {
                return Err(Error::NotPositiveDefinite(format!("tridiagonal pivot {i}")));
            }
            l_diag[i] = piv.sqrt();
            if i + 1 < n {
                l_off[i] = self.off[i] / l_diag[i];
            }
        }
        Ok(TridiagonalCholesky { l_diag, l_off })
    }
}

impl TridiagonalCholesky {
    /// Solves `Lx = b`.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        for i in 0..x.len() {
            if i > 0 {
                x[i] -= self.l_off[i - 1] * x[i - 1];
            }
            x[i] /= self.l_diag[i];
        }
        x
    }

    /// Solves `L'x = b`.
    pub fn solve_upper(&self, b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut x = b.to_vec();
        for i in (0..n).rev() {
            if i + 1 < n {
                x[i] -= self.l_off[i] * x[i + 1];
            }
            x[i] /= self.l_diag[i];
        }
        x
    }
}
