//! Normal-Gamma shrinkage on the constant block `α̂ = (α₀, √ψ̄₁, √ψ̄₀)`.
//!
//! `α̂_j | τ_j ~ N(0, τ_j)`, `τ_j | λ_k, ρ_k ~ G(ρ_k, ρ_k λ_k / 2)` and
//! `λ_k ~ G(ζ, ζ)` with one `(λ_k, ρ_k)` pair per group. `ρ_k` has an
//! Exponential(1) prior and moves by a log-scale random walk.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::dist::{ln_gamma, log_rw_mh, sample_gamma, sample_gig, sample_mvn_precision, Gig};
use crate::error::{Error, Result};

/// Lower bound applied to `τ` before it enters a prior precision.
pub const TAU_FLOOR: f64 = 1e-12;

/// Shrinkage groups of the constant block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Group {
    /// Constant coefficients `α₀`.
    Alpha = 0,
    /// Signed square roots of the regime-1 state variances.
    Psi1 = 1,
    /// Signed square roots of the regime-0 state variances.
    Psi0 = 2,
}

pub const GROUPS: [Group; 3] = [Group::Alpha, Group::Psi1, Group::Psi0];

/// The constant block. `ψ̄` values used downstream are squares of the
/// stored signed roots.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstantBlock {
    pub alpha0: Vec<f64>,
    pub sqrt_psi1: Vec<f64>,
    /// Absent for single-variance models.
    pub sqrt_psi0: Option<Vec<f64>>,
}

impl ConstantBlock {
    pub fn k(&self) -> usize {
        self.alpha0.len()
    }

    /// Signed root of the state variance of coefficient `i` in regime `s`.
    #[inline]
    pub fn root(&self, i: usize, s: u8) -> f64 {
        match (&self.sqrt_psi0, s) {
            (Some(r0), 0) => r0[i],
            _ => self.sqrt_psi1[i],
        }
    }

    /// `ψ̄_{i,s}`.
    #[inline]
    pub fn psi(&self, i: usize, s: u8) -> f64 {
        let r = self.root(i, s);
        r * r
    }

    /// Stacked `(α₀, √ψ̄₁, √ψ̄₀)`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.alpha0.clone();
        v.extend_from_slice(&self.sqrt_psi1);
        if let Some(r0) = &self.sqrt_psi0 {
            v.extend_from_slice(r0);
        }
        v
    }
}

/// Normal-Gamma hyperparameters. `group_of[j]` is the group of entry `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct NgHyper {
    pub tau: Vec<f64>,
    pub lambda: [f64; 3],
    pub rho: [f64; 3],
    pub zeta: f64,
    pub group_of: Vec<Group>,
}

impl NgHyper {
    /// Standard layout: `K` entries per sampled group in `Alpha, Psi1, Psi0`
    /// order.
    pub fn new(k: usize, groups: &[Group]) -> Self {
        let group_of: Vec<Group> = groups.iter().flat_map(|g| std::iter::repeat_n(*g, k)).collect();
        Self {
            tau: vec![1.0; group_of.len()],
            lambda: [1.0; 3],
            rho: [1.0; 3],
            zeta: 0.01,
            group_of,
        }
    }

    pub fn group_indices(&self, g: Group) -> Vec<usize> {
        (0..self.group_of.len()).filter(|&j| self.group_of[j] == g).collect()
    }

    pub fn has_group(&self, g: Group) -> bool {
        self.group_of.contains(&g)
    }
}

/// Canonical Gaussian parameters of `α̂`: precision `X̂'Σ⁻²X̂ + diag(1/τ)`
/// and linear term `X̂'Σ⁻²y`.
pub fn constant_block_posterior(
    y: &[f64],
    xhat: &DMatrix<f64>,
    sigma: &[f64],
    tau: &[f64],
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let (t_len, p) = xhat.shape();
    if y.len() != t_len || sigma.len() != t_len || tau.len() != p {
        return Err(Error::Dimension(format!(
            "y {}, sigma {}, tau {} vs design {t_len}x{p}",
            y.len(),
            sigma.len(),
            tau.len()
        )));
    }
    let mut prec = DMatrix::zeros(p, p);
    let mut lin = DVector::zeros(p);
    for t in 0..t_len {
        let w = 1.0 / (sigma[t] * sigma[t]);
        for a in 0..p {
            let xa = xhat[(t, a)] * w;
            if xa == 0.0 {
                continue;
            }
            lin[a] += xa * y[t];
            for b in 0..=a {
                prec[(a, b)] += xa * xhat[(t, b)];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            prec[(b, a)] = prec[(a, b)];
        }
        prec[(a, a)] += 1.0 / tau[a].max(TAU_FLOOR);
    }
    Ok((prec, lin))
}

/// Gaussian draw of the stacked constant block.
pub fn draw_constant_block<R: Rng + ?Sized>(
    y: &[f64],
    xhat: &DMatrix<f64>,
    sigma: &[f64],
    tau: &[f64],
    rng: &mut R,
) -> Result<Vec<f64>> {
    let (prec, lin) = constant_block_posterior(y, xhat, sigma, tau)?;
    let (draw, _) = sample_mvn_precision(&prec, &lin, rng)?;
    Ok(draw.iter().copied().collect())
}

/// `τ_j ~ GIG(ρ_k - 1/2, ρ_k λ_k, α̂_j²)`, floored at [`TAU_FLOOR`].
pub fn draw_tau<R: Rng + ?Sized>(alpha_hat: &[f64], hyper: &NgHyper, rng: &mut R) -> Result<Vec<f64>> {
    if alpha_hat.len() != hyper.group_of.len() {
        return Err(Error::Dimension(format!(
            "{} coefficients but {} group labels",
            alpha_hat.len(),
            hyper.group_of.len()
        )));
    }
    alpha_hat
        .iter()
        .zip(&hyper.group_of)
        .map(|(a, g)| {
            let (rho, lam) = (hyper.rho[*g as usize], hyper.lambda[*g as usize]);
            let p = Gig {
                a: rho - 0.5,
                b: rho * lam,
                c: a * a,
            };
            Ok(sample_gig(p, rng)?.max(TAU_FLOOR))
        })
        .collect()
}

/// Gamma `(shape, rate)` of the full conditional of `λ_k`.
pub fn lambda_posterior(tau: &[f64], hyper: &NgHyper, group: Group) -> Result<(f64, f64)> {
    let idx = hyper.group_indices(group);
    if idx.is_empty() {
        return Err(Error::InvalidParameter(format!("group {group:?} is empty")));
    }
    let rho = hyper.rho[group as usize];
    let sum: f64 = idx.iter().map(|&j| tau[j]).sum();
    Ok((hyper.zeta + rho * idx.len() as f64, hyper.zeta + 0.5 * rho * sum))
}

pub fn draw_lambda<R: Rng + ?Sized>(tau: &[f64], hyper: &NgHyper, group: Group, rng: &mut R) -> Result<f64> {
    let (shape, rate) = lambda_posterior(tau, hyper, group)?;
    sample_gamma(shape, rate, rng)
}

/// Log full conditional of `ρ` (up to a constant) under the Exponential(1)
/// prior: `Σ_j log G(τ_j; ρ, ρλ/2) - ρ`.
pub fn ln_rho_target(tau: &[f64], lambda: f64, rho: f64) -> f64 {
    if !(rho > 0.0) {
        return f64::NEG_INFINITY;
    }
    let n = tau.len() as f64;
    let rate = 0.5 * rho * lambda;
    let (mut slog, mut s) = (0.0, 0.0);
    for &t in tau {
        slog += t.ln();
        s += t;
    }
    n * (rho * rate.ln() - ln_gamma(rho)) + (rho - 1.0) * slog - rate * s - rho
}

/// Log-scale random-walk MH step for `ρ`.
pub fn update_rho<R: Rng + ?Sized>(tau: &[f64], lambda: f64, rho: f64, scale: f64, rng: &mut R) -> (f64, bool) {
    log_rw_mh(rho, scale, |r| ln_rho_target(tau, lambda, r), rng)
}

/// Random-walk proposal scale adapted toward a target acceptance rate in
/// batches of 50 proposals. Adaptation stops once `freeze` is called.
#[derive(Clone, Debug, PartialEq)]
pub struct AdaptiveScale {
    pub scale: f64,
    target: f64,
    batch_acc: u32,
    batch_n: u32,
    total_acc: u64,
    total_n: u64,
    adapting: bool,
}

impl AdaptiveScale {
    pub fn new(scale: f64, target: f64) -> Self {
        Self {
            scale,
            target,
            batch_acc: 0,
            batch_n: 0,
            total_acc: 0,
            total_n: 0,
            adapting: true,
        }
    }

    pub fn record(&mut self, accepted: bool) {
        self.total_n += 1;
        self.total_acc += accepted as u64;
        if !self.adapting {
            return;
        }
        self.batch_n += 1;
        self.batch_acc += accepted as u32;
        if self.batch_n == 50 {
            let rate = self.batch_acc as f64 / 50.0;
            self.scale *= if rate > self.target { 1.1 } else { 1.0 / 1.1 };
            self.batch_n = 0;
            self.batch_acc = 0;
        }
    }

    /// Stops adaptation and resets the acceptance counters.
    pub fn freeze(&mut self) {
        self.adapting = false;
        self.total_acc = 0;
        self.total_n = 0;
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.total_n == 0 {
            0.0
        } else {
            self.total_acc as f64 / self.total_n as f64
        }
    }
}

/// One pass over the hierarchy: `τ`, then `λ_k` and `ρ_k` per sampled group.
pub fn update_hyper<R: Rng + ?Sized>(
    alpha_hat: &[f64],
    hyper: &mut NgHyper,
    tuners: &mut [AdaptiveScale; 3],
    rng: &mut R,
) -> Result<()> {
    hyper.tau = draw_tau(alpha_hat, hyper, rng)?;
    for g in GROUPS {
        if !hyper.has_group(g) {
            continue;
        }
        let k = g as usize;
        hyper.lambda[k] = draw_lambda(&hyper.tau, hyper, g, rng)?;
        let taus: Vec<f64> = hyper.group_indices(g).iter().map(|&j| hyper.tau[j]).collect();
        let (rho, acc) = update_rho(&taus, hyper.lambda[k], hyper.rho[k], tuners[k].scale, rng);
        hyper.rho[k] = rho;
        tuners[k].record(acc);
    }
    Ok(())
}
