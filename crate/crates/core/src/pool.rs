//! Sparse finite location mixture on the normalized states.
//!
//! `α̃_t | θ_t = n ~ N(μ̃_n, I)`, `ω ~ Dir(ξ, …, ξ)`, `ξ ~ G(d₀, d₀N)`,
//! `μ̃_n ~ N(0, Λ₀)` with `Λ₀ = diag(l_j r_j²)`, `r_j` the range of the
//! current state row `j`, and `l_j ~ G(e₀, e₁)`. Labels are 0-based.

use nalgebra::DMatrix;
use rand::Rng;

use crate::dist::{
    ln_gamma, log_rw_mh, sample_categorical_log, sample_dirichlet, sample_gig, std_normal, Gig,
};
use crate::error::{Error, Result};
use crate::shrinkage::AdaptiveScale;

/// Lower bound on state ranges.
pub const RANGE_FLOOR: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct PoolState {
    pub omega: Vec<f64>,
    pub xi: f64,
    pub theta: Vec<usize>,
    /// `N×K` group means.
    pub mu: DMatrix<f64>,
    pub l: Vec<f64>,
    pub r: Vec<f64>,
}

impl PoolState {
    pub fn new(n_clusters: usize, periods: usize, k: usize) -> Self {
        Self {
            omega: vec![1.0 / n_clusters as f64; n_clusters],
            xi: 0.1,
            theta: vec![0; periods],
            mu: DMatrix::zeros(n_clusters, k),
            l: vec![1.0; k],
            r: vec![1.0; k],
        }
    }

    pub fn n_clusters(&self) -> usize {
        self.omega.len()
    }

    /// Number of occupied clusters.
    pub fn nonempty(&self) -> usize {
        occupancy(&self.theta, self.n_clusters()).iter().filter(|c| **c > 0).count()
    }

    /// `T×K` matrix whose row `t` is `μ̃_{θ_t}`: the prior mean of the states.
    pub fn assigned_means(&self) -> DMatrix<f64> {
        let k = self.mu.ncols();
        DMatrix::from_fn(self.theta.len(), k, |t, j| self.mu[(self.theta[t], j)])
    }
}

/// Cluster occupancy counts `T_n`.
pub fn occupancy(theta: &[usize], n: usize) -> Vec<usize> {
    let mut c = vec![0; n];
    for &th in theta {
        c[th] += 1;
    }
    c
}

/// Dirichlet concentrations `ξ + T_n`.
pub fn weight_posterior(theta: &[usize], xi: f64, n: usize) -> Result<Vec<f64>> {
    if theta.iter().any(|&t| t >= n) {
        return Err(Error::InvalidParameter(format!("group label outside 0..{n}")));
    }
    Ok(occupancy(theta, n).iter().map(|&c| xi + c as f64).collect())
}

pub fn sample_weights<R: Rng + ?Sized>(theta: &[usize], xi: f64, n: usize, rng: &mut R) -> Result<Vec<f64>> {
    sample_dirichlet(&weight_posterior(theta, xi, n)?, rng)
}

/// Log prior of `ξ` plus, optionally, the symmetric Dirichlet log density
/// of `ω`.
pub fn ln_xi_target(omega: Option<&[f64]>, xi: f64, d0: f64, n: usize) -> f64 {
    if !(xi > 0.0) {
        return f64::NEG_INFINITY;
    }
    let nf = n as f64;
    let mut v = (d0 - 1.0) * xi.ln() - d0 * nf * xi;
    if let Some(w) = omega {
        let slog: f64 = w.iter().map(|x| x.max(1e-300).ln()).sum();
        v += ln_gamma(nf * xi) - nf * ln_gamma(xi) + (xi - 1.0) * slog;
    }
    v
}

/// Log-scale random-walk MH step for `ξ`.
pub fn update_xi<R: Rng + ?Sized>(
    omega: &[f64],
    xi: f64,
    d0: f64,
    scale: f64,
    rng: &mut R,
) -> (f64, bool) {
    let n = omega.len();
    log_rw_mh(xi, scale, |x| ln_xi_target(Some(omega), x, d0, n), rng)
}

/// `P(θ_t = n) ∝ ω_n N(α̃_t; μ̃_n, I)`, drawn independently per period.
pub fn sample_group_indicators<R: Rng + ?Sized>(
    alpha_tilde: &DMatrix<f64>,
    omega: &[f64],
    mu: &DMatrix<f64>,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let (t_len, k) = alpha_tilde.shape();
    let n = omega.len();
    if mu.shape() != (n, k) {
        return Err(Error::Dimension(format!("means {:?}, expected {n}x{k}", mu.shape())));
    }
    let mut logw = vec![0.0; n];
    (0..t_len)
        .map(|t| {
            for (c, lw) in logw.iter_mut().enumerate() {
                let mut d2 = 0.0;
                for j in 0..k {
                    let d = alpha_tilde[(t, j)] - mu[(c, j)];
                    d2 += d * d;
                }
                *lw = omega[c].ln() - 0.5 * d2;
            }
            if logw.iter().any(|v| v.is_nan()) {
                return Err(Error::NonFinite("group indicator weights".into()));
            }
            sample_categorical_log(&logw, rng)
        })
        .collect()
}

/// Scalar Gaussian conditionals of the group means: `(means, variances)`,
/// both `N×K`, with variance `1/(T_n + 1/Λ₀ⱼ)` and mean `variance·Σ α̃_jt`.
pub fn group_mean_posterior(
    alpha_tilde: &DMatrix<f64>,
    theta: &[usize],
    lambda0: &[f64],
    n: usize,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (t_len, k) = alpha_tilde.shape();
    if theta.len() != t_len || lambda0.len() != k {
        return Err(Error::Dimension("group mean inputs disagree in shape".into()));
    }
    if lambda0.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidParameter("prior variances must be positive".into()));
    }
    let counts = occupancy(theta, n);
    let mut sums = DMatrix::<f64>::zeros(n, k);
    for t in 0..t_len {
        for j in 0..k {
            sums[(theta[t], j)] += alpha_tilde[(t, j)];
        }
    }
    let var = DMatrix::from_fn(n, k, |c, j| 1.0 / (counts[c] as f64 + 1.0 / lambda0[j]));
    let mean = DMatrix::from_fn(n, k, |c, j| var[(c, j)] * sums[(c, j)]);
    Ok((mean, var))
}

pub fn sample_group_means<R: Rng + ?Sized>(
    alpha_tilde: &DMatrix<f64>,
    theta: &[usize],
    lambda0: &[f64],
    n: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let (mean, var) = group_mean_posterior(alpha_tilde, theta, lambda0, n)?;
    Ok(DMatrix::from_fn(n, mean.ncols(), |c, j| {
        mean[(c, j)] + var[(c, j)].sqrt() * std_normal(rng)
    }))
}

/// Floored ranges `max_t α̃_jt - min_t α̃_jt`.
pub fn state_ranges(alpha_tilde: &DMatrix<f64>) -> Vec<f64> {
    alpha_tilde
        .column_iter()
        .map(|c| (c.max() - c.min()).max(RANGE_FLOOR))
        .collect()
}

/// GIG conditionals of the scales: `GIG(e₀ - N/2, 2e₁, Σ_n μ̃_jn² / r_j²)`.
pub fn l_posterior(mu: &DMatrix<f64>, r: &[f64], e0: f64, e1: f64) -> Vec<Gig> {
    let n = mu.nrows() as f64;
    r.iter()
        .enumerate()
        .map(|(j, rj)| {
            let rj = rj.max(RANGE_FLOOR);
            let ss: f64 = mu.column(j).iter().map(|m| m * m).sum();
            let a = e0 - 0.5 * n;
            let c = ss / (rj * rj);
            Gig {
                a,
                b: 2.0 * e1,
                // With a ≤ 0 and c → 0 the conditional collapses toward zero;
                // the smallest positive c keeps it a proper GIG.
                c: if a <= 0.0 { c.max(f64::MIN_POSITIVE) } else { c },
            }
        })
        .collect()
}

pub fn sample_l<R: Rng + ?Sized>(mu: &DMatrix<f64>, r: &[f64], e0: f64, e1: f64, rng: &mut R) -> Result<Vec<f64>> {
    l_posterior(mu, r, e0, e1)
        .into_iter()
        .map(|g| sample_gig(g, rng))
        .collect()
}

/// Constants of the pooling prior.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoolPrior {
    pub d0: f64,
    pub e0: f64,
    pub e1: f64,
}

/// One pass: weights, intensity, labels, means, scales.
pub fn pool_sweep<R: Rng + ?Sized>(
    state: &PoolState,
    alpha_tilde: &DMatrix<f64>,
    prior: &PoolPrior,
    tuner: &mut AdaptiveScale,
    rng: &mut R,
) -> Result<PoolState> {
    let n = state.n_clusters();
    let mut s = state.clone();
    s.omega = sample_weights(&s.theta, s.xi, n, rng)?;
    let (xi, acc) = update_xi(&s.omega, s.xi, prior.d0, tuner.scale, rng);
    s.xi = xi;
    tuner.record(acc);
    s.theta = sample_group_indicators(alpha_tilde, &s.omega, &s.mu, rng)?;
    s.r = state_ranges(alpha_tilde);
    let lambda0: Vec<f64> = s.l.iter().zip(&s.r).map(|(l, r)| (l * r * r).max(1e-300)).collect();
    s.mu = sample_group_means(alpha_tilde, &s.theta, &lambda0, n, rng)?;
    s.l = sample_l(&s.mu, &s.r, prior.e0, prior.e1, rng)?;
    Ok(s)
}
