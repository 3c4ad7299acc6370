//! Synthetic data: the regime-switching TVP regression used for recovery
//! checks and a small VAR with a single coefficient break.

use nalgebra::DMatrix;
use rand::Rng;

use crate::dist::{chain_rng, std_normal};
use crate::error::{Error, Result};
use crate::indicators::stationary_p1;

#[derive(Clone, Debug, PartialEq)]
pub struct DgpConfig {
    pub periods: usize,
    pub alpha0: Vec<f64>,
    pub psi0_bar: Vec<f64>,
    pub psi1_bar: Vec<f64>,
    pub p00: f64,
    pub p11: f64,
    pub h0: f64,
    /// Variance of the random-walk log-volatility innovations.
    pub h_innov_var: f64,
    pub seed: u64,
}

impl Default for DgpConfig {
    fn default() -> Self {
        Self {
            periods: 100,
            alpha0: vec![-4.0, 3.0, -2.0, 2.0, 0.0],
            psi0_bar: vec![1e-10, 0.5, 0.1, 1e-10, 1.0],
            psi1_bar: vec![1.0, 0.1, 0.5, 1e-10, 1e-10],
            p00: 0.6,
            p11: 0.95,
            h0: 0.1f64.ln(),
            h_innov_var: 0.1,
            seed: 42,
        }
    }
}

impl DgpConfig {
    pub fn k(&self) -> usize {
        self.alpha0.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.k();
        if k == 0 || self.periods == 0 {
            return Err(Error::Config("DGP needs at least one period and one covariate".into()));
        }
        if self.psi0_bar.len() != k || self.psi1_bar.len() != k {
            return Err(Error::Dimension("state variances must match alpha0 in length".into()));
        }
        if self.psi0_bar.iter().chain(&self.psi1_bar).any(|v| !(*v >= 0.0)) || self.h_innov_var < 0.0 {
            return Err(Error::Config("variances must be non-negative".into()));
        }
        for p in [self.p00, self.p11] {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::Config(format!("transition probability {p} outside (0, 1)")));
            }
        }
        Ok(())
    }
}

/// Simulated sample with its latent truth.
#[derive(Clone, Debug, PartialEq)]
pub struct SimulatedData {
    pub y: Vec<f64>,
    /// `T×K`; the last column is the intercept.
    pub x: DMatrix<f64>,
    /// `T×K` true coefficient paths.
    pub alpha: DMatrix<f64>,
    pub s: Vec<u8>,
    pub h: Vec<f64>,
}

/// Two-state Markov chain started from its stationary distribution.
pub fn simulate_chain<R: Rng + ?Sized>(periods: usize, p00: f64, p11: f64, rng: &mut R) -> Vec<u8> {
    let mut s = Vec::with_capacity(periods);
    let mut cur = u8::from(rng.random::<f64>() < stationary_p1(p00, p11));
    for _ in 0..periods {
        s.push(cur);
        let stay = if cur == 1 { p11 } else { p00 };
        if rng.random::<f64>() >= stay {
            cur = 1 - cur;
        }
    }
    s
}

/// Draws the regression sample. The coefficients start from `α₀` and
/// follow `α_t = α₀ + s_t(α_{t-1} - α₀) + ς_t`.
pub fn generate(config: &DgpConfig) -> Result<SimulatedData> {
    config.validate()?;
    let (t_len, k) = (config.periods, config.k());
    let mut rng = chain_rng(config.seed);
    let x = DMatrix::from_fn(t_len, k, |_, j| if j + 1 == k { 1.0 } else { std_normal(&mut rng) });
    let s = simulate_chain(t_len, config.p00, config.p11, &mut rng);
    let mut alpha = DMatrix::zeros(t_len, k);
    let mut prev = config.alpha0.clone();
    for t in 0..t_len {
        for i in 0..k {
            let (phi, var) = if s[t] == 1 {
                (1.0, config.psi1_bar[i])
            } else {
                (0.0, config.psi0_bar[i])
            };
            let a = config.alpha0[i] + phi * (prev[i] - config.alpha0[i]) + var.sqrt() * std_normal(&mut rng);
            alpha[(t, i)] = a;
            prev[i] = a;
        }
    }
    let mut h = Vec::with_capacity(t_len);
    let mut cur = config.h0;
    for _ in 0..t_len {
        cur += config.h_innov_var.sqrt() * std_normal(&mut rng);
        h.push(cur);
    }
    let y = (0..t_len)
        .map(|t| {
            let fit: f64 = (0..k).map(|i| x[(t, i)] * alpha[(t, i)]).sum();
            fit + (0.5 * h[t]).exp() * std_normal(&mut rng)
        })
        .collect();
    Ok(SimulatedData { y, x, alpha, s, h })
}

/// VAR(1) with intercept whose slope matrix switches once.
#[derive(Clone, Debug, PartialEq)]
pub struct VarBreakConfig {
    pub periods: usize,
    /// First period governed by `a_after`.
    pub break_at: usize,
    /// Row-major `m×m` slope matrices.
    pub a_before: Vec<f64>,
    pub a_after: Vec<f64>,
    pub intercept: Vec<f64>,
    /// Shock standard deviations; shocks are independent.
    pub shock_sd: Vec<f64>,
    /// Discarded start-up periods.
    pub burn: usize,
    pub seed: u64,
}

impl Default for VarBreakConfig {
    fn default() -> Self {
        Self {
            periods: 120,
            break_at: 60,
            a_before: vec![0.0, 0.0, 0.0, 0.3, 0.2, 0.0, 0.0, 0.2, 0.3],
            a_after: vec![0.9, 0.0, 0.0, 0.3, 0.2, 0.0, 0.0, 0.2, 0.3],
            intercept: vec![0.0; 3],
            shock_sd: vec![1.0, 0.5, 0.5],
            burn: 50,
            seed: 7,
        }
    }
}

impl VarBreakConfig {
    pub fn m(&self) -> usize {
        self.intercept.len()
    }
}

/// `T×m` panel from [`VarBreakConfig`].
pub fn generate_var_break(config: &VarBreakConfig) -> Result<DMatrix<f64>> {
    let m = config.m();
    if m == 0
        || config.a_before.len() != m * m
        || config.a_after.len() != m * m
        || config.shock_sd.len() != m
    {
        return Err(Error::Dimension("VAR DGP matrices disagree with m".into()));
    }
    if config.break_at > config.periods {
        return Err(Error::Config("break date beyond the sample".into()));
    }
    let mut rng = chain_rng(config.seed);
    let mut out = DMatrix::zeros(config.periods, m);
    let mut prev = vec![0.0; m];
    for t in 0..config.burn + config.periods {
        let a = if t >= config.burn + config.break_at { &config.a_after } else { &config.a_before };
        let next: Vec<f64> = (0..m)
            .map(|i| {
                let ar: f64 = (0..m).map(|j| a[i * m + j] * prev[j]).sum();
                config.intercept[i] + ar + config.shock_sd[i] * std_normal(&mut rng)
            })
            .collect();
        if t >= config.burn {
            for i in 0..m {
                out[(t - config.burn, i)] = next[i];
            }
        }
        prev = next;
    }
    Ok(out)
}
