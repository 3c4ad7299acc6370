//! Regime indicators `S_t` in the centered parameterization.
//!
//! With the centered path `α` held fixed, regime `k` of coefficient `i` at
//! period `t` has density `N(α_it; m_k, ψ̄_ik)`. The mean `m_k` depends on
//! the class: the mixture class uses `α₀` in regime 0 and `α_{i,t-1}` in
//! regime 1, the random-walk class uses `α_{i,t-1}` in both, and the pooling
//! class uses `α₀ + √ψ̄_ik·μ̃` with the period's group mean. In the first
//! period every mean is `α₀` (or the pooled mean).

use nalgebra::DMatrix;
use rand::Rng;

use crate::dist::{normal_ln_pdf, open_unif, sample_beta};
use crate::error::{Error, Result};
use crate::model::{Class, Pairing};
use crate::shrinkage::ConstantBlock;

/// Floor for state variances entering a regime density.
pub const PSI_FLOOR: f64 = 1e-10;

/// Regime densities for one equation.
#[derive(Clone, Copy, Debug)]
pub struct RegimeModel<'a> {
    pub class: Class,
    pub block: &'a ConstantBlock,
    /// `T×K` matrix of the group mean assigned to each period (pooling class).
    pub pool_means: Option<&'a DMatrix<f64>>,
}

impl RegimeModel<'_> {
    #[inline]
    pub fn mean(&self, alpha: &DMatrix<f64>, t: usize, i: usize, regime: u8) -> f64 {
        let a0 = self.block.alpha0[i];
        match self.class {
            Class::Pool => a0 + self.block.root(i, regime) * self.pool_means.map_or(0.0, |m| m[(t, i)]),
            Class::Mix if regime == 1 && t > 0 => alpha[(t - 1, i)],
            Class::Rw if t > 0 => alpha[(t - 1, i)],
            _ => a0,
        }
    }

    #[inline]
    pub fn ln_density(&self, alpha: &DMatrix<f64>, t: usize, i: usize, regime: u8) -> f64 {
        let var = self.block.psi(i, regime).max(PSI_FLOOR);
        normal_ln_pdf(alpha[(t, i)], self.mean(alpha, t, i, regime), var)
    }

    /// Per-period log likelihoods of both regimes for a joint indicator.
    pub fn period_log_lik(&self, alpha: &DMatrix<f64>) -> Vec<[f64; 2]> {
        let (t_len, k) = alpha.shape();
        (0..t_len)
            .map(|t| {
                let mut l = [0.0; 2];
                for i in 0..k {
                    l[0] += self.ln_density(alpha, t, i, 0);
                    l[1] += self.ln_density(alpha, t, i, 1);
                }
                l
            })
            .collect()
    }
}

#[inline]
fn transition(p00: f64, p11: f64) -> [[f64; 2]; 2] {
    [[p00, 1.0 - p00], [1.0 - p11, p11]]
}

/// Stationary probability of regime 1.
pub fn stationary_p1(p00: f64, p11: f64) -> f64 {
    let (q0, q1) = ((1.0 - p00).max(0.0), (1.0 - p11).max(0.0));
    if q0 + q1 <= 0.0 {
        0.5
    } else {
        q0 / (q0 + q1)
    }
}

/// Normalized forward filter: `P(s_t = k | data up to t)`.
fn forward(log_lik: &[[f64; 2]], p00: f64, p11: f64) -> Result<Vec<[f64; 2]>> {
    let tr = transition(p00, p11);
    let pi1 = stationary_p1(p00, p11);
    let mut pred = [1.0 - pi1, pi1];
    let mut out = Vec::with_capacity(log_lik.len());
    for (t, ll) in log_lik.iter().enumerate() {
        let lf = [pred[0].ln() + ll[0], pred[1].ln() + ll[1]];
        let m = lf[0].max(lf[1]);
        if !m.is_finite() {
            return Err(Error::Numerical(format!("zero regime likelihood at period {t}")));
        }
        let mut f = [(lf[0] - m).exp(), (lf[1] - m).exp()];
        let s = f[0] + f[1];
        f[0] /= s;
        f[1] /= s;
        out.push(f);
        pred = [
            f[0] * tr[0][0] + f[1] * tr[1][0],
            f[0] * tr[0][1] + f[1] * tr[1][1],
        ];
    }
    Ok(out)
}

/// Forward filtering, backward sampling of a two-state Markov chain whose
/// initial distribution is the stationary one.
pub fn ffbs<R: Rng + ?Sized>(log_lik: &[[f64; 2]], p00: f64, p11: f64, rng: &mut R) -> Result<Vec<u8>> {
    let filt = forward(log_lik, p00, p11)?;
    let tr = transition(p00, p11);
    let t_len = filt.len();
    let mut s = vec![0u8; t_len];
    if t_len == 0 {
        return Ok(s);
    }
    s[t_len - 1] = (open_unif(rng) < filt[t_len - 1][1]) as u8;
    for t in (0..t_len - 1).rev() {
        let next = s[t + 1] as usize;
        let w0 = filt[t][0] * tr[0][next];
        let w1 = filt[t][1] * tr[1][next];
        s[t] = (open_unif(rng) * (w0 + w1) < w1) as u8;
    }
    Ok(s)
}

/// Smoothed marginals `P(s_t = 1 | all data)` by forward-backward.
pub fn smoothed_marginals(log_lik: &[[f64; 2]], p00: f64, p11: f64) -> Result<Vec<f64>> {
    let filt = forward(log_lik, p00, p11)?;
    let tr = transition(p00, p11);
    let t_len = filt.len();
    let mut out = vec![0.0; t_len];
    if t_len == 0 {
        return Ok(out);
    }
    let mut smooth = filt[t_len - 1];
    out[t_len - 1] = smooth[1];
    for t in (0..t_len - 1).rev() {
        let f = filt[t];
        let pred = [
            f[0] * tr[0][0] + f[1] * tr[1][0],
            f[0] * tr[0][1] + f[1] * tr[1][1],
        ];
        let mut s = [0.0; 2];
        for k in 0..2 {
            for l in 0..2 {
                if pred[l] > 0.0 {
                    s[k] += f[k] * tr[k][l] * smooth[l] / pred[l];
                }
            }
        }
        smooth = s;
        out[t] = s[1];
    }
    Ok(out)
}

/// Joint Markov-switching indicator path.
pub fn sample_indicators_ms<R: Rng + ?Sized>(
    alpha: &DMatrix<f64>,
    model: &RegimeModel<'_>,
    p00: f64,
    p11: f64,
    rng: &mut R,
) -> Result<Vec<u8>> {
    ffbs(&model.period_log_lik(alpha), p00, p11, rng)
}

/// Transition counts `[[T00, T01], [T10, T11]]`.
pub fn transition_counts(s: &[u8]) -> [[f64; 2]; 2] {
    let mut c = [[0.0; 2]; 2];
    for w in s.windows(2) {
        c[w[0] as usize][w[1] as usize] += 1.0;
    }
    c
}

/// Beta parameters of `p00` and `p11` given prior counts `(c00, c01, c10, c11)`.
pub fn transition_posterior(s: &[u8], counts: [f64; 4]) -> ([f64; 2], [f64; 2]) {
    let n = transition_counts(s);
    let [c00, c01, c10, c11] = counts;
    (
        [n[0][0] + c00, n[0][1] + c10],
        [n[1][1] + c01, n[1][0] + c11],
    )
}

pub fn update_transition_probs<R: Rng + ?Sized>(s: &[u8], counts: [f64; 4], rng: &mut R) -> Result<(f64, f64)> {
    let (b0, b1) = transition_posterior(s, counts);
    Ok((sample_beta(b0[0], b0[1], rng)?, sample_beta(b1[0], b1[1], rng)?))
}

/// Probability of regime 1 implied by a stored Bernoulli parameter.
#[inline]
pub fn regime1_prob(p: f64, pairing: Pairing) -> f64 {
    match pairing {
        Pairing::SuccessFirst => p,
        Pairing::Literal => 1.0 - p,
    }
}

/// Independent Bernoulli indicators per `(t, i)`.
pub fn sample_indicators_mix<R: Rng + ?Sized>(
    alpha: &DMatrix<f64>,
    model: &RegimeModel<'_>,
    p: &[f64],
    pairing: Pairing,
    rng: &mut R,
) -> Result<DMatrix<u8>> {
    let (t_len, k) = alpha.shape();
    if p.len() != k {
        return Err(Error::Dimension(format!("{} probabilities for {k} coefficients", p.len())));
    }
    let mut s = DMatrix::zeros(t_len, k);
    for i in 0..k {
        let p1 = regime1_prob(p[i], pairing);
        for t in 0..t_len {
            let prob = regime1_posterior(
                p1,
                model.ln_density(alpha, t, i, 0),
                model.ln_density(alpha, t, i, 1),
            );
            s[(t, i)] = (open_unif(rng) < prob) as u8;
        }
    }
    Ok(s)
}

/// `P(s = 1)` from the prior probability and the two regime log densities.
pub fn regime1_posterior(p1: f64, ln_f0: f64, ln_f1: f64) -> f64 {
    let a = (1.0 - p1).ln() + ln_f0;
    let b = p1.ln() + ln_f1;
    if b == f64::NEG_INFINITY {
        return 0.0;
    }
    if a == f64::NEG_INFINITY {
        return 1.0;
    }
    1.0 / (1.0 + (a - b).exp())
}

/// Beta parameters of every `p_i`.
pub fn bernoulli_posterior(s: &DMatrix<u8>, counts: [f64; 2], pairing: Pairing) -> Vec<(f64, f64)> {
    let (t_len, k) = s.shape();
    (0..k)
        .map(|i| {
            let ones = (0..t_len).filter(|&t| s[(t, i)] == 1).count() as f64;
            let zeros = t_len as f64 - ones;
            match pairing {
                Pairing::SuccessFirst => (ones + counts[0], zeros + counts[1]),
                Pairing::Literal => (zeros + counts[0], ones + counts[1]),
            }
        })
        .collect()
}

pub fn update_bernoulli_probs<R: Rng + ?Sized>(
    s: &DMatrix<u8>,
    counts: [f64; 2],
    pairing: Pairing,
    rng: &mut R,
) -> Result<Vec<f64>> {
    bernoulli_posterior(s, counts, pairing)
        .into_iter()
        .map(|(a, b)| sample_beta(a, b, rng))
        .collect()
}
