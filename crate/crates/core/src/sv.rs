//! Stochastic volatility block: `log σ_t² = h_t` with
//! `h_t = μ + φ(h_{t-1} - μ) + √ψ·η_t` and `h_0 ~ N(μ, ψ/(1-φ²))`.
//!
//! The observation `log(e_t² + 1e-8) = h_t + log ε_t²` is linearized with the
//! ten-component Gaussian mixture of Omori, Chib, Shephard and Nakajima for
//! `log χ²₁`. The path is drawn jointly from its tridiagonal precision;
//! parameters are updated in the centered form and then interweaved through
//! the non-centered form.

use rand::Rng;

use crate::dist::{normal_ln_pdf, open_unif, sample_gig, sample_inv_gamma, std_normal, Gig};
use crate::error::{ensure_finite, Error, Result};
use crate::linalg::Tridiagonal;

const MIX_PROB: [f64; 10] = [
    0.00609, 0.04775, 0.13057, 0.20674, 0.22715, 0.18842, 0.12047, 0.05591, 0.01575, 0.00115,
];
const MIX_MEAN: [f64; 10] = [
    1.92677, 1.34744, 0.73504, 0.02266, -0.85173, -1.97278, -3.46788, -5.55246, -8.68384, -14.65000,
];
const MIX_VAR: [f64; 10] = [
    0.11265, 0.17788, 0.26768, 0.40611, 0.62699, 0.98583, 1.57469, 2.54498, 4.16591, 7.33342,
];

/// Offset inside `log(e²)` so exact zero residuals stay finite.
pub const LOG_OFFSET: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct SvState {
    /// `h_1..h_T`.
    pub h: Vec<f64>,
    pub h0: f64,
    pub mu: f64,
    pub phi: f64,
    pub psi: f64,
}

impl SvState {
    /// Flat path at `level` with moderate persistence.
    pub fn flat(periods: usize, level: f64) -> Self {
        Self {
            h: vec![level; periods],
            h0: level,
            mu: level,
            phi: 0.9,
            psi: 0.1,
        }
    }

    /// `σ_t = exp(h_t/2)`.
    pub fn sigma(&self) -> Vec<f64> {
        self.h.iter().map(|h| (0.5 * h).exp()).collect()
    }

    pub fn check(&self) -> Result<()> {
        if !(self.phi.abs() < 1.0) || !(self.psi > 0.0) {
            return Err(Error::Numerical(format!(
                "invalid SV parameters phi={}, psi={}",
                self.phi, self.psi
            )));
        }
        ensure_finite(&self.h, "log-volatility path")?;
        ensure_finite(&[self.h0, self.mu], "SV parameters")
    }
}

/// Prior constants: `μ ~ N(mu_mean, mu_var)`, `(φ+1)/2 ~ Beta(phi_a, phi_b)`,
/// `ψ ~ G(1/2, 1/2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SvPrior {
    pub mu_mean: f64,
    pub mu_var: f64,
    pub phi_a: f64,
    pub phi_b: f64,
}

impl Default for SvPrior {
    fn default() -> Self {
        Self {
            mu_mean: 0.0,
            mu_var: 100.0,
            phi_a: 25.0,
            phi_b: 1.5,
        }
    }
}

fn ln_phi_prior(phi: f64, prior: &SvPrior) -> f64 {
    (prior.phi_a - 1.0) * (0.5 * (1.0 + phi)).ln() + (prior.phi_b - 1.0) * (0.5 * (1.0 - phi)).ln()
}

/// One full sweep of the volatility block given observation errors.
pub fn sv_sweep<R: Rng + ?Sized>(
    residuals: &[f64],
    state: &SvState,
    prior: &SvPrior,
    rng: &mut R,
) -> Result<SvState> {
    let t_len = residuals.len();
    if t_len == 0 {
        return Err(Error::Dimension("empty residual vector".into()));
    }
    if state.h.len() != t_len {
        return Err(Error::Dimension(format!(
            "SV path has {} periods, residuals {t_len}",
            state.h.len()
        )));
    }
    ensure_finite(residuals, "residuals")?;
    let ystar: Vec<f64> = residuals.iter().map(|e| (e * e + LOG_OFFSET).ln()).collect();

    // Mixture indicators.
    let mut comp = vec![0usize; t_len];
    let mut logw = [0.0; 10];
    for t in 0..t_len {
        for j in 0..10 {
            logw[j] = MIX_PROB[j].ln() + normal_ln_pdf(ystar[t], state.h[t] + MIX_MEAN[j], MIX_VAR[j]);
        }
        comp[t] = crate::dist::sample_categorical_log(&logw, rng)?;
    }
    let z: Vec<f64> = (0..t_len).map(|t| ystar[t] - MIX_MEAN[comp[t]]).collect();
    let v: Vec<f64> = comp.iter().map(|&j| MIX_VAR[j]).collect();

    let mut s = state.clone();
    draw_path(&z, &v, &mut s, rng)?;
    centered_parameters(&mut s, prior, rng)?;
    interweave(&z, &v, &mut s, prior, rng)?;
    s.check()?;
    Ok(s)
}

/// Joint draw of `(h_0, …, h_T)` from its Gaussian full conditional.
fn draw_path<R: Rng + ?Sized>(z: &[f64], v: &[f64], s: &mut SvState, rng: &mut R) -> Result<()> {
    let n = z.len() + 1;
    let (mu, phi) = (s.mu, s.phi);
    let ip = 1.0 / s.psi;
    let mut diag = vec![(1.0 + phi * phi) * ip; n];
    diag[0] = ip;
    diag[n - 1] = ip;
    let off = vec![-phi * ip; n - 1];
    let mut lin = vec![(1.0 - phi) * (1.0 - phi) * ip * mu; n];
    lin[0] = (1.0 - phi) * ip * mu;
    lin[n - 1] = (1.0 - phi) * ip * mu;
    for t in 1..n {
        diag[t] += 1.0 / v[t - 1];
        lin[t] += z[t - 1] / v[t - 1];
    }
    let ch = Tridiagonal { diag, off }.cholesky()?;
    let mean = ch.solve_upper(&ch.solve_lower(&lin));
    let eps: Vec<f64> = (0..n).map(|_| std_normal(rng)).collect();
    let dev = ch.solve_upper(&eps);
    s.h0 = mean[0] + dev[0];
    for t in 1..n {
        s.h[t - 1] = mean[t] + dev[t];
    }
    Ok(())
}

fn centered_parameters<R: Rng + ?Sized>(s: &mut SvState, prior: &SvPrior, rng: &mut R) -> Result<()> {
    let t_len = s.h.len();
    let prev = |t: usize, h: &[f64], h0: f64| if t == 0 { h0 } else { h[t - 1] };

    // φ: independence proposal from the AR(1) regression part, MH correction
    // for the prior and the initial-state density.
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for t in 0..t_len {
        let x = prev(t, &s.h, s.h0) - s.mu;
        sxx += x * x;
        sxy += x * (s.h[t] - s.mu);
    }
    if sxx > 0.0 {
        let prop = sxy / sxx + (s.psi / sxx).sqrt() * std_normal(rng);
        if prop.abs() < 1.0 {
            let ln_target = |phi: f64| {
                ln_phi_prior(phi, prior) + normal_ln_pdf(s.h0, s.mu, s.psi / (1.0 - phi * phi))
            };
            if open_unif(rng).ln() < ln_target(prop) - ln_target(s.phi) {
                s.phi = prop;
            }
        }
    }

    // μ: conjugate Gaussian.
    let phi = s.phi;
    let ip = 1.0 / s.psi;
    let mut prec = 1.0 / prior.mu_var + (1.0 - phi * phi) * ip;
    let mut lin = prior.mu_mean / prior.mu_var + (1.0 - phi * phi) * ip * s.h0;
    for t in 0..t_len {
        prec += (1.0 - phi) * (1.0 - phi) * ip;
        lin += (1.0 - phi) * ip * (s.h[t] - phi * prev(t, &s.h, s.h0));
    }
    s.mu = lin / prec + std_normal(rng) / prec.sqrt();

    // ψ: exact GIG conditional under the G(1/2, 1/2) prior.
    let mut ss = (1.0 - phi * phi) * (s.h0 - s.mu).powi(2);
    for t in 0..t_len {
        let d = s.h[t] - s.mu - phi * (prev(t, &s.h, s.h0) - s.mu);
        ss += d * d;
    }
    let a = 0.5 - 0.5 * (t_len as f64 + 1.0);
    s.psi = sample_gig(Gig { a, b: 1.0, c: ss.max(1e-300) }, rng)?;
    Ok(())
}

/// Non-centered move: with `h̃ = (h - μ)/σ` fixed, `(μ, σ)` is a Gaussian
/// regression coefficient under `μ ~ N(mu_mean, mu_var)`, `σ ~ N(0, 1)`.
fn interweave<R: Rng + ?Sized>(
    z: &[f64],
    v: &[f64],
    s: &mut SvState,
    prior: &SvPrior,
    rng: &mut R,
) -> Result<()> {
    let sd = s.psi.sqrt();
    let ht0 = (s.h0 - s.mu) / sd;
    let ht: Vec<f64> = s.h.iter().map(|h| (h - s.mu) / sd).collect();
    let (mut q00, mut q01, mut q11) = (1.0 / prior.mu_var, 0.0, 1.0);
    let (mut b0, mut b1) = (prior.mu_mean / prior.mu_var, 0.0);
    for t in 0..z.len() {
        let w = 1.0 / v[t];
        q00 += w;
        q01 += w * ht[t];
        q11 += w * ht[t] * ht[t];
        b0 += w * z[t];
        b1 += w * z[t] * ht[t];
    }
    // 2×2 Cholesky of the precision.
    let l00 = q00.sqrt();
    let l10 = q01 / l00;
    let l11sq = q11 - l10 * l10;
    if !(l11sq > 0.0) {
        return Ok(());
    }
    let l11 = l11sq.sqrt();
    let y0 = b0 / l00;
    let y1 = (b1 - l10 * y0) / l11;
    let m1 = y1 / l11;
    let m0 = (y0 - l10 * m1) / l00;
    let e1 = std_normal(rng) / l11;
    let e0 = (std_normal(rng) - l10 * e1) / l00;
    let (mu, sig) = (m0 + e0, m1 + e1);
    if sig == 0.0 || !sig.is_finite() || !mu.is_finite() {
        return Ok(());
    }
    s.mu = mu;
    s.psi = sig * sig;
    s.h0 = mu + sig * ht0;
    for (h, t) in s.h.iter_mut().zip(&ht) {
        *h = mu + sig * t;
    }
    Ok(())
}

/// Homoskedastic alternative: `σ² ~ IG(shape0 + T/2, scale0 + Σe²/2)`.
pub fn draw_constant_variance<R: Rng + ?Sized>(
    residuals: &[f64],
    shape0: f64,
    scale0: f64,
    rng: &mut R,
) -> Result<f64> {
    if residuals.is_empty() {
        return Err(Error::Dimension("empty residual vector".into()));
    }
    ensure_finite(residuals, "residuals")?;
    let ss: f64 = residuals.iter().map(|e| e * e).sum();
    sample_inv_gamma(shape0 + 0.5 * residuals.len() as f64, scale0 + 0.5 * ss, rng)
}
