//! Non-centered static form of the TVP regression and the fast joint draw of
//! the normalized states.
//!
//! Matrices of states and indicators are `T×K` (period by coefficient). The
//! stacked `ν`-vector of states is their row-major flattening.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::dist::std_normal;
use crate::error::{dim_err, Error, Result};
use crate::linalg::{cholesky, BlockBidiagonal};
use crate::shrinkage::ConstantBlock;

/// Below this magnitude a square root maps normalized states to zero.
pub const ROOT_EPS: f64 = 1e-10;

/// Row-major flattening of a `T×K` matrix into a `ν`-vector.
pub fn stack(m: &DMatrix<f64>) -> Vec<f64> {
    let (t_len, k) = m.shape();
    let mut v = Vec::with_capacity(t_len * k);
    for t in 0..t_len {
        for i in 0..k {
            v.push(m[(t, i)]);
        }
    }
    v
}

pub fn unstack(v: &[f64], t_len: usize, k: usize) -> Result<DMatrix<f64>> {
    if v.len() != t_len * k {
        return dim_err(format!("vector of {} entries is not {t_len}x{k}", v.len()));
    }
    Ok(DMatrix::from_row_slice(t_len, k, v))
}

fn check_shapes(x: &DMatrix<f64>, other: (usize, usize), what: &str) -> Result<()> {
    if x.shape() != other {
        return dim_err(format!("{what} is {:?}, regressors are {:?}", other, x.shape()));
    }
    Ok(())
}

/// Design rows `x̂_t`: `(x_t, S_t x_t ⊙ α̃_t, (I - S_t) x_t ⊙ α̃_t)` for
/// two-variance models, `(x_t, x_t ⊙ α̃_t)` when `single` is set.
pub fn build_design_rows(
    x: &DMatrix<f64>,
    alpha_tilde: &DMatrix<f64>,
    s: &DMatrix<u8>,
    single: bool,
) -> Result<DMatrix<f64>> {
    let (t_len, k) = x.shape();
    check_shapes(x, alpha_tilde.shape(), "normalized state matrix")?;
    if !single {
        check_shapes(x, s.shape(), "indicator matrix")?;
    }
    let p = if single { 2 * k } else { 3 * k };
    let mut out = DMatrix::zeros(t_len, p);
    for t in 0..t_len {
        for i in 0..k {
            let xi = x[(t, i)];
            out[(t, i)] = xi;
            let v = xi * alpha_tilde[(t, i)];
            if single || s[(t, i)] == 1 {
                out[(t, k + i)] = v;
            } else {
                out[(t, 2 * k + i)] = v;
            }
        }
    }
    Ok(out)
}

/// `√Ψ_t` entries: the signed root of the active regime per `(t, i)`.
pub fn state_roots(block: &ConstantBlock, s: Option<&DMatrix<u8>>, t_len: usize) -> DMatrix<f64> {
    let k = block.k();
    DMatrix::from_fn(t_len, k, |t, i| {
        let reg = s.map_or(1, |s| s[(t, i)]);
        block.root(i, reg)
    })
}

/// `α_t = α₀ + √Ψ_t α̃_t`.
pub fn reconstruct_centered(
    block: &ConstantBlock,
    s: Option<&DMatrix<u8>>,
    alpha_tilde: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let (t_len, k) = alpha_tilde.shape();
    if block.k() != k || s.is_some_and(|s| s.shape() != (t_len, k)) {
        return dim_err("constant block, indicators and states disagree in shape");
    }
    let roots = state_roots(block, s, t_len);
    Ok(DMatrix::from_fn(t_len, k, |t, i| {
        block.alpha0[i] + roots[(t, i)] * alpha_tilde[(t, i)]
    }))
}

/// Inverse of [`reconstruct_centered`]: `α̃_it = (α_it - α₀_i)/√ψ_it`, and 0
/// where the root is below [`ROOT_EPS`].
pub fn normalize_centered(
    block: &ConstantBlock,
    s: Option<&DMatrix<u8>>,
    alpha: &DMatrix<f64>,
) -> DMatrix<f64> {
    let (t_len, k) = alpha.shape();
    let roots = state_roots(block, s, t_len);
    DMatrix::from_fn(t_len, k, |t, i| {
        let r = roots[(t, i)];
        if r.abs() < ROOT_EPS {
            0.0
        } else {
            (alpha[(t, i)] - block.alpha0[i]) / r
        }
    })
}

/// Exact draw from `N(a₁, Ω₁)` with `Ω₁⁻¹ = W̃'W̃ + Φ'Φ` and
/// `a₁ = Ω₁(W̃'ỹ + Φ'Φa₀)`.
///
/// `wtilde` holds the `K` nonzero entries of each row of the `T×ν`
/// observation matrix. Only a `T×T` factorization is needed.
pub fn draw_states_fast<R: Rng + ?Sized>(
    ytilde: &[f64],
    wtilde: &DMatrix<f64>,
    a0: &[f64],
    phi: &BlockBidiagonal,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let u: Vec<f64> = (0..phi.dim()).map(|_| std_normal(rng)).collect();
    let v: Vec<f64> = (0..ytilde.len()).map(|_| std_normal(rng)).collect();
    draw_states_fast_with(ytilde, wtilde, a0, phi, &u, &v)
}

/// [`draw_states_fast`] with the two standard Gaussian inputs supplied.
/// With `u = v = 0` the output is the posterior mean.
pub fn draw_states_fast_with(
    ytilde: &[f64],
    wtilde: &DMatrix<f64>,
    a0: &[f64],
    phi: &BlockBidiagonal,
    u: &[f64],
    v: &[f64],
) -> Result<Vec<f64>> {
    let (t_len, k) = (phi.periods(), phi.block());
    if wtilde.shape() != (t_len, k) || ytilde.len() != t_len || v.len() != t_len {
        return dim_err(format!(
            "observation rows {:?}, ỹ {}, v {} for T={t_len}, K={k}",
            wtilde.shape(),
            ytilde.len(),
            v.len()
        ));
    }
    if a0.len() != phi.dim() || u.len() != phi.dim() {
        return dim_err("prior mean or u has the wrong length");
    }
    let mut q = phi.solve_lower(u)?;
    for (qj, aj) in q.iter_mut().zip(a0) {
        *qj += aj;
    }
    let mut resid = DVector::zeros(t_len);
    for t in 0..t_len {
        let mut r = v[t];
        for i in 0..k {
            r += wtilde[(t, i)] * q[t * k + i];
        }
        resid[t] = ytilde[t] - r;
    }
    let mut m = phi.sandwich_omega0(wtilde)?;
    for t in 0..t_len {
        m[(t, t)] += 1.0;
    }
    let ch = cholesky(&m).map_err(|e| Error::Numerical(format!("state draw: {e}")))?;
    let f = ch.solve(&resid);
    let mut g = vec![0.0; phi.dim()];
    for t in 0..t_len {
        for i in 0..k {
            g[t * k + i] = wtilde[(t, i)] * f[t];
        }
    }
    let mut out = phi.apply_omega0(&g)?;
    for (o, qj) in out.iter_mut().zip(&q) {
        *o += qj;
    }
    Ok(out)
}

/// Largest `ν` accepted by [`posterior_moments_naive`].
pub const NAIVE_MAX_DIM: usize = 500;

/// Dense `(a₁, Ω₁)` by direct inversion of the `ν×ν` precision.
pub fn posterior_moments_naive(
    ytilde: &[f64],
    wtilde: &DMatrix<f64>,
    a0: &[f64],
    phi: &BlockBidiagonal,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let (t_len, k) = (phi.periods(), phi.block());
    let nu = phi.dim();
    if nu > NAIVE_MAX_DIM {
        return Err(Error::InvalidParameter(format!(
            "dense moments limited to {NAIVE_MAX_DIM} states, got {nu}"
        )));
    }
    if wtilde.shape() != (t_len, k) || ytilde.len() != t_len || a0.len() != nu {
        return dim_err("inconsistent shapes for dense moments");
    }
    let mut w = DMatrix::zeros(t_len, nu);
    for t in 0..t_len {
        for i in 0..k {
            w[(t, t * k + i)] = wtilde[(t, i)];
        }
    }
    let p = phi.to_dense();
    let ptp = p.transpose() * &p;
    let prec = w.transpose() * &w + &ptp;
    let cov = cholesky(&prec)?.inverse();
    let lin = w.transpose() * DVector::from_column_slice(ytilde) + &ptp * DVector::from_column_slice(a0);
    let mean = &cov * lin;
    Ok((mean.iter().copied().collect(), cov))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::chain_rng;

    #[test]
    fn zero_states_zero_tvp_columns() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let at = DMatrix::zeros(2, 2);
        let s = DMatrix::from_element(2, 2, 1u8);
        let d = build_design_rows(&x, &at, &s, false).unwrap();
        assert_eq!(d.columns(0, 2), x);
        assert!(d.columns(2, 4).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn design_row_examples() {
        let d = build_design_rows(
            &DMatrix::from_element(1, 1, 2.0),
            &DMatrix::from_element(1, 1, 3.0),
            &DMatrix::from_element(1, 1, 1u8),
            false,
        )
        .unwrap();
        assert_eq!(d.row(0).iter().copied().collect::<Vec<_>>(), vec![2.0, 6.0, 0.0]);
        let d = build_design_rows(
            &DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            &DMatrix::from_row_slice(1, 2, &[1.0, -1.0]),
            &DMatrix::zeros(0, 0),
            true,
        )
        .unwrap();
        assert_eq!(d.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 1.0, 1.0, -1.0]);
    }

    #[test]
    fn centered_reconstruction() {
        let block = ConstantBlock {
            alpha0: vec![2.0],
            sqrt_psi1: vec![0.5],
            sqrt_psi0: Some(vec![0.1]),
        };
        let s = DMatrix::from_element(1, 1, 1u8);
        let a = reconstruct_centered(&block, Some(&s), &DMatrix::from_element(1, 1, 4.0)).unwrap();
        assert_eq!(a[(0, 0)], 4.0);
        let a = reconstruct_centered(&block, Some(&s), &DMatrix::zeros(1, 1)).unwrap();
        assert_eq!(a[(0, 0)], 2.0);
        let back = normalize_centered(&block, Some(&s), &DMatrix::from_element(1, 1, 4.0));
        assert_eq!(back[(0, 0)], 4.0);
    }

    #[test]
    fn no_data_gives_prior_draw() {
        let phi = BlockBidiagonal::identity(3, 2);
        let mut rng = chain_rng(31);
        let n = 20_000;
        let mut s2 = 0.0;
        for _ in 0..n {
            let d = draw_states_fast(&[0.0; 3], &DMatrix::zeros(3, 2), &[0.0; 6], &phi, &mut rng).unwrap();
            s2 += d.iter().map(|x| x * x).sum::<f64>() / 6.0;
        }
        assert!((s2 / n as f64 - 1.0).abs() < 0.02);
    }

    #[test]
    fn scalar_naive_moments() {
        let phi = BlockBidiagonal::identity(1, 1);
        let (a1, om) = posterior_moments_naive(&[2.0], &DMatrix::from_element(1, 1, 1.0), &[0.0], &phi).unwrap();
        assert!((a1[0] - 1.0).abs() < 1e-15);
        assert!((om[(0, 0)] - 0.5).abs() < 1e-15);
        let (a1, om) = posterior_moments_naive(&[0.0; 2], &DMatrix::zeros(2, 1), &[0.0; 2], &BlockBidiagonal::identity(2, 1)).unwrap();
        assert_eq!(a1, vec![0.0, 0.0]);
        assert_eq!(om, DMatrix::identity(2, 2));
    }

    #[test]
    fn naive_guard() {
        let phi = BlockBidiagonal::identity(251, 2);
        let r = posterior_moments_naive(&[0.0; 251], &DMatrix::zeros(251, 2), &[0.0; 502], &phi);
        assert!(r.is_err());
    }

    #[test]
    fn fast_mean_equals_naive_mean() {
        let mut rng = chain_rng(32);
        for pattern in 0..8u32 {
            let (t_len, k) = (6, 2);
            let diags: Vec<Vec<f64>> = (0..t_len)
                .map(|t| (0..k).map(|i| ((pattern >> ((t + i) % 3)) & 1) as f64).collect())
                .collect();
            let phi = BlockBidiagonal::from_diagonals(&diags).unwrap();
            let w = DMatrix::from_fn(t_len, k, |_, _| std_normal(&mut rng));
            let y: Vec<f64> = (0..t_len).map(|_| std_normal(&mut rng)).collect();
            let a0: Vec<f64> = (0..t_len * k).map(|_| std_normal(&mut rng)).collect();
            let fast = draw_states_fast_with(&y, &w, &a0, &phi, &[0.0; 12], &[0.0; 6]).unwrap();
            let (naive, _) = posterior_moments_naive(&y, &w, &a0, &phi).unwrap();
            for (a, b) in fast.iter().zip(&naive) {
                assert!((a - b).abs() < 1e-8);
            }
        }
    }
}
